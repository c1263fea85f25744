//! Step-cost and heuristic model: control effort, travel time, adjacency
//! and uncertainty risk, switching penalty, and goal attraction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{nearest_lane, ProjectedScene};
use crate::graph::{Lattice, Node, SPEED_FLOOR};
use crate::prediction::{AccelerationBelief, Observation, PredictionModel, TrajectoryHistory};

/// How the extra travel time behind a slower front vehicle is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlowdownPenalty {
    /// Speed deficit over transition distance: (v - v_f)_+ / d.
    #[default]
    RateOverDistance,
    /// Extra seconds to cover the transition at the leader's speed:
    /// d * (1/v_f - 1/v)_+.
    ExtraTime,
}

/// All cost weights, clamps and ranges.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CostWeights {
    pub lambda_lng: f64,
    pub lambda_lat: f64,
    pub lambda_time: f64,
    pub lambda_adj: f64,
    pub lambda_uncert: f64,
    pub lambda_switch: f64,
    /// c in lambda_goal = c / max(d(ego, goal), d_floor).
    pub lambda_goal_scale: f64,
    /// Floor on the ego-to-goal distance when scaling lambda_goal, meters.
    pub d_floor: f64,
    /// Minimum distance used in the inverse-square risk terms, meters.
    pub d_clamp: f64,
    /// Front-vehicle detection range, meters.
    pub detection_range: f64,
    pub slowdown_penalty: SlowdownPenalty,
}

impl Default for CostWeights {
    fn default() -> Self {
        CostWeights {
            lambda_lng: 1.0,
            lambda_lat: 15.0,
            lambda_time: 20.0,
            lambda_adj: 6.0,
            lambda_uncert: 6.0,
            lambda_switch: 7.0,
            lambda_goal_scale: 10.0,
            d_floor: 10.0,
            d_clamp: 0.5,
            detection_range: 50.0,
            slowdown_penalty: SlowdownPenalty::default(),
        }
    }
}

impl CostWeights {
    pub fn validate(&self) -> Result<()> {
        let named = [
            ("lambda_lng", self.lambda_lng),
            ("lambda_lat", self.lambda_lat),
            ("lambda_time", self.lambda_time),
            ("lambda_adj", self.lambda_adj),
            ("lambda_uncert", self.lambda_uncert),
            ("lambda_switch", self.lambda_switch),
            ("lambda_goal_scale", self.lambda_goal_scale),
        ];
        for (name, value) in named {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::config(format!("{name} must be finite and >= 0")));
            }
        }
        if self.d_floor <= 0.0 || self.d_clamp <= 0.0 || self.detection_range <= 0.0 {
            return Err(Error::config(
                "d_floor, d_clamp and detection_range must be positive",
            ));
        }
        Ok(())
    }

    /// Non-fatal configuration smells.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.lambda_lat <= self.lambda_lng {
            out.push(format!(
                "lambda_lat ({}) <= lambda_lng ({}); lane changes should cost more than cruising",
                self.lambda_lat, self.lambda_lng
            ));
        }
        out
    }
}

/// Per-edge cost decomposition. The step cost `g` is the sum of the first
/// six terms; the heuristic is recorded alongside for diagnostics.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub control: f64,
    pub time: f64,
    pub risk_adjacency: f64,
    pub risk_uncertainty: f64,
    pub switching: f64,
    pub goal_distance: f64,
    pub heuristic: f64,
}

impl CostBreakdown {
    /// The step cost g contributed by this transition.
    pub fn g(&self) -> f64 {
        self.control
            + self.time
            + self.risk_adjacency
            + self.risk_uncertainty
            + self.switching
            + self.goal_distance
    }
}

/// Everything a search needs to evaluate costs against one projected scene.
/// `histories` and `beliefs` run parallel to `scene.others`.
pub struct SceneContext<'a> {
    pub scene: &'a ProjectedScene,
    pub predictor: &'a dyn PredictionModel,
    pub histories: &'a [TrajectoryHistory],
    pub beliefs: &'a [AccelerationBelief],
    pub prev_target_lat: Option<f64>,
    /// Signed divergence of the ego from the previous target lane, meters.
    pub delta: f64,
    pub lambda_goal: f64,
    /// Speed the plan is evaluated at; falls back to the measured ego
    /// speed when unset.
    pub plan_speed: Option<f64>,
    lane_centers: Vec<f64>,
}

impl<'a> SceneContext<'a> {
    pub fn new(
        scene: &'a ProjectedScene,
        predictor: &'a dyn PredictionModel,
        histories: &'a [TrajectoryHistory],
        beliefs: &'a [AccelerationBelief],
        prev_target_lat: Option<f64>,
        weights: &CostWeights,
    ) -> Self {
        assert_eq!(scene.others.len(), histories.len());
        assert_eq!(scene.others.len(), beliefs.len());
        let lane_centers = (0..scene.lane_count)
            .map(|j| j as f64 * scene.lane_width)
            .collect();
        SceneContext {
            scene,
            predictor,
            histories,
            beliefs,
            prev_target_lat,
            delta: scene.ego_offset_delta,
            lambda_goal: goal_weight([0.0, scene.ego_lat_raw], scene.goal, weights),
            plan_speed: None,
            lane_centers,
        }
    }

    /// Evaluates the plan at a fixed speed (the ego's desired speed)
    /// instead of the instantaneous measured one, so a slowed-down ego
    /// still sees the time cost of staying behind a slow leader.
    pub fn with_plan_speed(mut self, v: f64) -> Self {
        self.plan_speed = Some(v);
        self
    }

    pub fn predicted(&self, i: usize, t_n: f64) -> [f64; 2] {
        self.predictor.predict(&self.histories[i], t_n)
    }

    /// Lane index a lateral position (meters) snaps to.
    pub fn lane_of_lat(&self, lat: f64) -> usize {
        nearest_lane(lat, &self.lane_centers)
    }

    /// Floored planning speed used for lattice timing.
    pub fn ego_speed(&self) -> f64 {
        self.plan_speed
            .unwrap_or(self.scene.ego_speed)
            .max(SPEED_FLOOR)
    }
}

/// Builds single-observation histories and prior beliefs for a bare scene,
/// e.g. for one-shot searches on a snapshot.
pub fn single_observation_tracks(
    scene: &ProjectedScene,
    t0: f64,
) -> (Vec<TrajectoryHistory>, Vec<AccelerationBelief>) {
    let histories = scene
        .others
        .iter()
        .map(|veh| {
            TrajectoryHistory::with_observation(Observation {
                t: t0,
                x: veh.x,
                lat: veh.lat_m(scene.lane_width),
                v: veh.v,
                heading: veh.heading,
                accel: 0.0,
            })
        })
        .collect();
    let beliefs = scene
        .others
        .iter()
        .map(|_| AccelerationBelief::default())
        .collect();
    (histories, beliefs)
}

/// Control effort of a transition: longitudinal and lateral projections of
/// the node distance, weighted separately.
pub fn control_cost(lattice: &Lattice, n0: Node, n: Node, weights: &CostWeights) -> f64 {
    let d = lattice.distance(n0, n);
    let theta = if n0.lane != n.lane {
        (lattice.lane_width / d).atan()
    } else {
        0.0
    };
    weights.lambda_lng * (d * theta.cos()).abs() + weights.lambda_lat * (d * theta.sin()).abs()
}

/// Transition time in seconds at speed `v`.
pub fn travel_time(lattice: &Lattice, n0: Node, n: Node, v: f64) -> f64 {
    lattice.distance(n0, n) / v
}

/// Extra travel time charged when a slower vehicle leads the target node's
/// lane. Zero without a front vehicle or when the leader is not slower.
pub fn additional_time(
    lattice: &Lattice,
    n0: Node,
    n: Node,
    v: f64,
    v_front: Option<f64>,
    mode: SlowdownPenalty,
) -> f64 {
    let Some(vf) = v_front else { return 0.0 };
    let d = lattice.distance(n0, n);
    match mode {
        SlowdownPenalty::RateOverDistance => (v - vf).max(0.0) / d,
        SlowdownPenalty::ExtraTime => {
            if vf <= 0.0 {
                // Stopped leader: charge the full transition at the floor speed.
                d / SPEED_FLOOR
            } else {
                d * (1.0 / vf - 1.0 / v).max(0.0)
            }
        }
    }
}

/// Complete travel-time cost of a transition.
pub fn time_cost(
    lattice: &Lattice,
    n0: Node,
    n: Node,
    v: f64,
    v_front: Option<f64>,
    weights: &CostWeights,
) -> f64 {
    weights.lambda_time
        * (travel_time(lattice, n0, n, v)
            + additional_time(lattice, n0, n, v, v_front, weights.slowdown_penalty))
}

/// The nearest predicted vehicle ahead of node `n` in its lane at time
/// `t_n`, within the detection range. Returns (gap, current speed).
pub fn front_vehicle(
    lattice: &Lattice,
    n: Node,
    t_n: f64,
    ctx: &SceneContext<'_>,
    weights: &CostWeights,
) -> Option<(f64, f64)> {
    let node_x = lattice.x(n);
    let mut best: Option<(f64, f64)> = None;
    for i in 0..ctx.scene.others.len() {
        let pos = ctx.predicted(i, t_n);
        if ctx.lane_of_lat(pos[1]) != n.lane {
            continue;
        }
        let gap = pos[0] - node_x;
        if gap <= 0.0 || gap > weights.detection_range {
            continue;
        }
        let v = ctx.histories[i].latest().map_or(0.0, |o| o.v);
        if best.is_none_or(|(g, _)| gap < g) {
            best = Some((gap, v));
        }
    }
    best
}

/// Clamped inverse squared closest-approach distance between the ego
/// sweeping edge `a -> b` and a vehicle moving `c -> d` over the same
/// interval. Both motions are linear in the interval, so the relative
/// offset is linear and the minimum is a clamped quadratic argmin.
/// Sampling only the destination node would let the sweep skip straight
/// through a vehicle between two columns.
fn clamped_inv_sq_approach(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2], d_clamp: f64) -> f64 {
    let rx = a[0] - c[0];
    let ry = a[1] - c[1];
    let ux = (b[0] - a[0]) - (d[0] - c[0]);
    let uy = (b[1] - a[1]) - (d[1] - c[1]);
    let uu = ux * ux + uy * uy;
    let s = if uu > 0.0 {
        (-(rx * ux + ry * uy) / uu).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let dx = rx + s * ux;
    let dy = ry + s * uy;
    let d2 = (dx * dx + dy * dy).max(d_clamp * d_clamp);
    1.0 / d2
}

/// Inverse-squared-distance penalty to every vehicle predicted in `n`'s
/// lane at time `t_n`, taken at the closest approach along the edge
/// `n0 -> n` over `[t0, t_n]`.
pub fn adjacency_risk(
    lattice: &Lattice,
    n0: Node,
    t0: f64,
    n: Node,
    t_n: f64,
    ctx: &SceneContext<'_>,
    weights: &CostWeights,
) -> f64 {
    let a = lattice.position(n0);
    let b = lattice.position(n);
    let mut sum = 0.0;
    for i in 0..ctx.scene.others.len() {
        let pos = ctx.predicted(i, t_n);
        if ctx.lane_of_lat(pos[1]) == n.lane {
            let start = ctx.predicted(i, t0);
            sum += clamped_inv_sq_approach(a, b, start, pos, weights.d_clamp);
        }
    }
    weights.lambda_adj * sum
}

/// Entropy of each same-lane vehicle's acceleration belief, discounted by
/// the closest-approach distance along the edge.
pub fn uncertainty_risk(
    lattice: &Lattice,
    n0: Node,
    t0: f64,
    n: Node,
    t_n: f64,
    ctx: &SceneContext<'_>,
    weights: &CostWeights,
) -> f64 {
    let a = lattice.position(n0);
    let b = lattice.position(n);
    let mut sum = 0.0;
    for i in 0..ctx.scene.others.len() {
        let pos = ctx.predicted(i, t_n);
        if ctx.lane_of_lat(pos[1]) == n.lane {
            let start = ctx.predicted(i, t0);
            sum += ctx.beliefs[i].entropy()
                * clamped_inv_sq_approach(a, b, start, pos, weights.d_clamp);
        }
    }
    weights.lambda_uncert * sum
}

/// Penalty on nodes off the previously decided target lane, scaled by how
/// far the ego has already diverged toward that target. Zero on the first
/// plan.
pub fn switching_cost(
    lattice: &Lattice,
    n: Node,
    prev_target_lat: Option<f64>,
    delta: f64,
    weights: &CostWeights,
) -> f64 {
    let Some(prev) = prev_target_lat else {
        return 0.0;
    };
    let dynamic_weight = weights.lambda_switch * delta.abs() / lattice.lane_width;
    dynamic_weight * (lattice.lat(n) - prev).abs()
}

/// Adaptive goal weight: grows as the ego approaches the goal, clamped at
/// the distance floor.
pub fn goal_weight(ego_position: [f64; 2], goal: [f64; 2], weights: &CostWeights) -> f64 {
    let d = (ego_position[0] - goal[0]).hypot(ego_position[1] - goal[1]);
    weights.lambda_goal_scale / d.max(weights.d_floor)
}

/// Admissible cost-to-go estimate: goal-weighted Euclidean distance in the
/// projected frame.
pub fn heuristic(lattice: &Lattice, n: Node, goal: [f64; 2], lambda_goal: f64) -> f64 {
    let p = lattice.position(n);
    lambda_goal * (p[0] - goal[0]).hypot(p[1] - goal[1])
}

/// Full step cost of transitioning to `n` from `n0`, arriving at time
/// `t_n`. Returns the step cost g and its decomposition.
pub fn step_cost(
    lattice: &Lattice,
    n0: Node,
    n: Node,
    t_n: f64,
    ctx: &SceneContext<'_>,
    weights: &CostWeights,
) -> (f64, CostBreakdown) {
    let v = ctx.ego_speed();
    let t0 = (t_n - travel_time(lattice, n0, n, v)).max(0.0);
    let v_front = front_vehicle(lattice, n, t_n, ctx, weights).map(|(_, vf)| vf);
    let breakdown = CostBreakdown {
        control: control_cost(lattice, n0, n, weights),
        time: time_cost(lattice, n0, n, v, v_front, weights),
        risk_adjacency: adjacency_risk(lattice, n0, t0, n, t_n, ctx, weights),
        risk_uncertainty: uncertainty_risk(lattice, n0, t0, n, t_n, ctx, weights),
        switching: switching_cost(lattice, n, ctx.prev_target_lat, ctx.delta, weights),
        goal_distance: heuristic(lattice, n, ctx.scene.goal, ctx.lambda_goal),
        heuristic: heuristic(lattice, n, ctx.scene.goal, ctx.lambda_goal),
    };
    (breakdown.g(), breakdown)
}
