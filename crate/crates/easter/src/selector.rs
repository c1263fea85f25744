//! The replanning loop: project, search, extract the target lane, and
//! carry switching state and per-vehicle beliefs across cycles.

use std::collections::HashMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cost::{CostWeights, SceneContext};
use crate::error::Result;
use crate::frame::{project_scene, WorldState};
use crate::graph::build_lattice;
use crate::prediction::{
    AccelerationBelief, ConstantVelocity, Observation, PredictionModel, TrajectoryHistory,
};
use crate::search::{extended_astar, Path};

/// A lane policy the simulator can drive: anything that maps a world
/// snapshot to a target lane.
pub trait LanePolicy {
    fn name(&self) -> &'static str;
    fn decide(&mut self, world: &WorldState) -> Result<PolicyDecision>;
}

/// Minimal decision surface shared by all policies.
#[derive(Debug, Clone, Copy)]
pub struct PolicyDecision {
    pub target_lane: usize,
    /// Wall-clock planning time, seconds.
    pub plan_seconds: f64,
}

/// Full decision of the search-based selector.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LaneDecision {
    pub target_lane_index: usize,
    /// Target lane center, meters from the leftmost lane center.
    pub target_lane_lat: f64,
    pub path: Path,
    /// Wall-clock planning time, seconds.
    pub planning_time: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectorConfig {
    pub weights: CostWeights,
    /// Planning time step that scales the lattice columns, seconds.
    pub plan_dt: f64,
    /// Search horizon in columns.
    pub horizon: usize,
    /// Observations retained per vehicle.
    pub history_capacity: usize,
    /// Ego desired speed the plan is evaluated at, m/s. The lattice and
    /// travel-time costs use this fixed speed so incentives survive when
    /// the ego is already slowed to its leader's pace.
    pub desired_speed: f64,
    /// Consecutive cycles a new target lane must win before it is
    /// committed. Filters one-cycle cost blips that would otherwise start
    /// (and then lock in) a marginal maneuver.
    pub commit_cycles: usize,
    /// Minimum seconds between committed target switches. Covers the
    /// lateral maneuver itself plus a settling margin, so a preference
    /// that appears the instant the ego reaches a lane center must
    /// persist before it can reverse the previous decision.
    pub min_dwell: f64,
}

impl Default for SelectorConfig {
    fn default() -> Self {
        SelectorConfig {
            weights: CostWeights::default(),
            plan_dt: 1.0,
            horizon: 10,
            history_capacity: 16,
            desired_speed: 15.0,
            commit_cycles: 5,
            min_dwell: 4.0,
        }
    }
}

struct Track {
    history: TrajectoryHistory,
    belief: AccelerationBelief,
}

/// The search-based lane selector. One instance owns the cross-cycle
/// state (previous target, vehicle histories and beliefs) for one ego.
pub struct Selector {
    config: SelectorConfig,
    predictor: Box<dyn PredictionModel>,
    prev_target_lat: Option<f64>,
    committed_target: Option<usize>,
    pending_target: Option<(usize, usize)>,
    last_switch_time: Option<f64>,
    tracks: HashMap<u64, Track>,
}

impl Selector {
    pub fn new(config: SelectorConfig) -> Self {
        Selector::with_predictor(config, Box::new(ConstantVelocity))
    }

    pub fn with_predictor(config: SelectorConfig, predictor: Box<dyn PredictionModel>) -> Self {
        Selector {
            config,
            predictor,
            prev_target_lat: None,
            committed_target: None,
            pending_target: None,
            last_switch_time: None,
            tracks: HashMap::new(),
        }
    }

    pub fn prev_target_lat(&self) -> Option<f64> {
        self.prev_target_lat
    }

    /// Seeds a vehicle's acceleration belief with observed samples, e.g.
    /// from a scenario file describing a known-volatile driver.
    pub fn seed_belief(&mut self, vehicle_id: u64, accel_samples: &[f64]) {
        let capacity = self.config.history_capacity;
        let track = self.tracks.entry(vehicle_id).or_insert_with(|| Track {
            history: TrajectoryHistory::new(capacity),
            belief: AccelerationBelief::default(),
        });
        for &a in accel_samples {
            track.belief.update(a);
        }
    }

    /// Debounces target switches: a lane differing from the committed one
    /// must win `commit_cycles` consecutive plans, and at least
    /// `min_dwell` seconds must have passed since the last switch, before
    /// it takes over. The very first plan commits unconditionally.
    fn commit(&mut self, raw_target: usize, ego_lane: usize, now: f64) -> usize {
        let Some(committed) = self.committed_target else {
            self.committed_target = Some(raw_target);
            if raw_target != ego_lane {
                self.last_switch_time = Some(now);
            }
            return raw_target;
        };
        if raw_target == committed {
            self.pending_target = None;
            return committed;
        }
        let streak = match self.pending_target {
            Some((lane, n)) if lane == raw_target => n + 1,
            _ => 1,
        };
        let dwell_over = self
            .last_switch_time
            .is_none_or(|t| now - t >= self.config.min_dwell);
        if streak >= self.config.commit_cycles.max(1) && dwell_over {
            self.committed_target = Some(raw_target);
            self.pending_target = None;
            self.last_switch_time = Some(now);
            raw_target
        } else {
            self.pending_target = Some((raw_target, streak.min(usize::MAX - 1)));
            committed
        }
    }

    /// Runs one planning cycle: projects the world, updates histories and
    /// beliefs, searches the lattice, and commits the first transition's
    /// lane as the new target.
    pub fn select_lane(&mut self, world: &WorldState) -> Result<LaneDecision> {
        let started = Instant::now();
        let scene = project_scene(world, self.prev_target_lat)?;
        let capacity = self.config.history_capacity;

        let mut histories = Vec::with_capacity(scene.others.len());
        let mut beliefs = Vec::with_capacity(scene.others.len());
        for veh in &scene.others {
            let track = self.tracks.entry(veh.id).or_insert_with(|| Track {
                history: TrajectoryHistory::new(capacity),
                belief: AccelerationBelief::default(),
            });
            // Acceleration from finite-differenced speeds between cycles.
            let accel = track
                .history
                .latest()
                .filter(|prev| world.time_now > prev.t)
                .map(|prev| (veh.v - prev.v) / (world.time_now - prev.t));
            if let Some(a) = accel {
                if a.is_finite() {
                    track.belief.update(a);
                }
            }
            track.history.push(Observation {
                t: world.time_now,
                x: veh.x,
                lat: veh.lat_m(scene.lane_width),
                v: veh.v,
                heading: veh.heading,
                accel: accel.unwrap_or(0.0),
            });
            histories.push(track.history.clone());
            beliefs.push(track.belief.clone());
        }

        let plan_speed = self.config.desired_speed;
        let ctx = SceneContext::new(
            &scene,
            self.predictor.as_ref(),
            &histories,
            &beliefs,
            self.prev_target_lat,
            &self.config.weights,
        )
        .with_plan_speed(plan_speed);
        let lattice = build_lattice(&scene, plan_speed, self.config.plan_dt, self.config.horizon);
        let path = extended_astar(&lattice, &ctx, &self.config.weights)?;

        let raw_target = target_from_path(&path);
        let target_lane_index = self.commit(raw_target, scene.ego_lane_index, world.time_now);
        let target_lane_lat = (target_lane_index as f64 - 1.0) * scene.lane_width;
        self.prev_target_lat = Some(target_lane_lat);

        Ok(LaneDecision {
            target_lane_index,
            target_lane_lat,
            path,
            planning_time: started.elapsed().as_secs_f64(),
        })
    }
}

impl LanePolicy for Selector {
    fn name(&self) -> &'static str {
        "easter"
    }

    fn decide(&mut self, world: &WorldState) -> Result<PolicyDecision> {
        let decision = self.select_lane(world)?;
        Ok(PolicyDecision {
            target_lane: decision.target_lane_index,
            plan_seconds: decision.planning_time,
        })
    }
}

/// The lane the path commits to: the destination of its first lane
/// transition (the start lane when the path never changes lane). Columns
/// after the first transition are advisory; the maneuver executor only
/// needs the next destination. Monotone columns and single-step
/// transitions make this the column-1 lane whenever the change is
/// immediate.
pub fn target_from_path(path: &Path) -> usize {
    let start = path.nodes[0].lane;
    path.nodes
        .iter()
        .map(|n| n.lane)
        .find(|&lane| lane != start)
        .unwrap_or(start)
}
