//! Deterministic kinematic highway simulator: IDM background traffic that
//! keeps lanes, and an ego vehicle executing lane decisions through a
//! simple lateral/longitudinal executor.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::baselines::{MobilPolicy, NoChangePolicy};
use crate::cost::{single_observation_tracks, SceneContext};
use crate::error::{Error, Result};
use crate::frame::{nearest_lane, rotate, LaneGeometry, VehicleState, WorldState};
use crate::graph::build_lattice;
use crate::metrics::{mean, percentile, MetricsLog, RunSummary, TickRow, SCHEMA_VERSION};
use crate::prediction::ConstantVelocity;
use crate::scenario::ScenarioConfig;
use crate::search::{extended_astar_full, Path, SearchRecord};
use crate::selector::{LanePolicy, Selector, SelectorConfig};

/// Deceleration applied when the IDM gap contract is violated, m/s^2.
pub const EMERGENCY_DECEL: f64 = 6.0;

/// Intelligent Driver Model parameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct IdmParams {
    /// Desired (free-flow) speed, m/s.
    pub v0: f64,
    /// Maximum acceleration, m/s^2.
    pub a: f64,
    /// Comfortable deceleration, m/s^2.
    pub b: f64,
    /// Desired time headway, seconds.
    pub time_headway: f64,
    /// Minimum bumper gap, meters.
    pub s0: f64,
    /// Acceleration exponent.
    pub delta: f64,
}

impl Default for IdmParams {
    fn default() -> Self {
        IdmParams {
            v0: 15.0,
            a: 1.0,
            b: 1.5,
            time_headway: 1.5,
            s0: 2.0,
            delta: 4.0,
        }
    }
}

impl IdmParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.v0, self.a, self.b, self.time_headway, self.s0];
        if positive.iter().any(|&p| p <= 0.0) || self.delta < 1.0 {
            return Err(Error::config(
                "idm parameters must be positive with delta >= 1",
            ));
        }
        Ok(())
    }

    pub fn with_desired_speed(self, v0: f64) -> Self {
        IdmParams { v0, ..self }
    }
}

/// IDM acceleration for a vehicle at speed `v`, optionally following a
/// leader `(v_lead, gap)`. A non-positive gap triggers the emergency clamp.
pub fn idm_accel(v: f64, lead: Option<(f64, f64)>, p: &IdmParams) -> f64 {
    let free = p.a * (1.0 - (v / p.v0).powf(p.delta));
    let accel = match lead {
        None => free,
        Some((_, gap)) if gap <= 0.0 => return -EMERGENCY_DECEL,
        Some((v_lead, gap)) => {
            let s_star = (p.s0 + v * p.time_headway + v * (v - v_lead) / (2.0 * (p.a * p.b).sqrt()))
                .max(0.0);
            free - p.a * (s_star / gap).powi(2)
        }
    };
    accel.clamp(-EMERGENCY_DECEL, p.a)
}

/// A lane-keeping background vehicle.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SimVehicle {
    pub id: u64,
    /// 1-based lane, fixed for the vehicle's lifetime.
    pub lane: usize,
    /// Longitudinal position (rear axle reference), meters from ego spawn.
    pub x: f64,
    pub v: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EgoState {
    pub x: f64,
    /// Lateral position, meters from the leftmost lane center.
    pub lat: f64,
    pub v: f64,
    pub target_lane: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimState {
    pub clock: f64,
    pub ego: EgoState,
    pub others: Vec<SimVehicle>,
    pub done: bool,
}

impl SimState {
    /// Lane the ego currently overlaps most.
    pub fn ego_lane(&self, cfg: &ScenarioConfig) -> usize {
        let centers: Vec<f64> = (0..cfg.n_lanes)
            .map(|j| j as f64 * cfg.lane_width)
            .collect();
        nearest_lane(self.ego.lat, &centers)
    }
}

/// Spawns background traffic. Explicit placements win; otherwise each lane
/// is filled with vehicles at gaps and speeds drawn around the configured
/// means, deterministically for a given rng state.
pub fn spawn_traffic(cfg: &ScenarioConfig, rng: &mut ChaCha8Rng) -> Result<Vec<SimVehicle>> {
    if !cfg.vehicles.is_empty() {
        return Ok(cfg
            .vehicles
            .iter()
            .enumerate()
            .map(|(i, veh)| SimVehicle {
                id: i as u64 + 1,
                lane: veh.lane,
                x: veh.x,
                v: veh.v,
            })
            .collect());
    }

    let mut out = Vec::new();
    let mut next_id = 1u64;
    for (j, lane) in cfg.lanes.iter().enumerate() {
        let lane_index = j + 1;
        if lane.density <= 0.0 {
            continue;
        }
        // Cover the route plus a detection-range tail behind the ego, so
        // faster lanes contain vehicles approaching from the rear, and a
        // detection-range apron past the finish line so lanes do not look
        // artificially empty as the ego nears it.
        let tail = if lane_index == cfg.ego.lane { 0.0 } else { 50.0 };
        let apron = 60.0;
        let count = (lane.density * (cfg.route_length + tail + apron) / 100.0).round() as usize;
        if count == 0 {
            continue;
        }
        let gap_dist = Normal::new(lane.mean_headway, 0.15 * lane.mean_headway)
            .map_err(|e| Error::config(format!("lane {lane_index}: bad headway spec: {e}")))?;
        let speed_sd = (0.15 * lane.mean_speed).max(1e-9);
        let speed_dist = Normal::new(lane.mean_speed, speed_sd)
            .map_err(|e| Error::config(format!("lane {lane_index}: bad speed spec: {e}")))?;

        // First vehicle: clear of the ego in its own lane, otherwise a
        // random phase within one headway.
        let mut cursor = if lane_index == cfg.ego.lane {
            cfg.vehicle_length + cfg.idm.s0 + rng.gen_range(0.0..lane.mean_headway)
        } else {
            -tail + rng.gen_range(0.0..lane.mean_headway)
        };
        for _ in 0..count {
            let v = speed_dist
                .sample(rng)
                .clamp(0.0, 1.3 * lane.mean_speed);
            out.push(SimVehicle {
                id: next_id,
                lane: lane_index,
                x: cursor,
                v,
            });
            next_id += 1;
            let gap = gap_dist.sample(rng).max(cfg.idm.s0);
            cursor += cfg.vehicle_length + gap;
        }
    }
    Ok(out)
}

/// The nearest leader of `(lane, x)` among background vehicles and,
/// unless excluded, the ego. Returns `(v_lead, bumper gap)`.
fn leader_of(
    cfg: &ScenarioConfig,
    state: &SimState,
    lane: usize,
    x: f64,
    include_ego: bool,
) -> Option<(f64, f64)> {
    let mut best: Option<(f64, f64)> = None;
    for veh in &state.others {
        if veh.lane != lane || veh.x <= x {
            continue;
        }
        let gap = veh.x - x - cfg.vehicle_length;
        if best.is_none_or(|(_, g)| gap < g) {
            best = Some((veh.v, gap));
        }
    }
    if include_ego && state.ego_lane(cfg) == lane && state.ego.x > x {
        let gap = state.ego.x - x - cfg.vehicle_length;
        if best.is_none_or(|(_, g)| gap < g) {
            best = Some((state.ego.v, gap));
        }
    }
    best
}

/// Advances the simulation one tick: background vehicles follow IDM in
/// their lane, the ego follows IDM against the lane it overlaps most and
/// slides laterally toward the commanded lane center at a fixed rate.
/// Semi-implicit integration: speeds first, then positions.
/// Whether the slot beside the ego in `lane` is too tight to merge into:
/// any vehicle within a car length plus the IDM minimum gap.
fn slot_blocked(cfg: &ScenarioConfig, state: &SimState, lane: usize) -> bool {
    state
        .others
        .iter()
        .any(|veh| veh.lane == lane && (veh.x - state.ego.x).abs() < cfg.vehicle_length + cfg.idm.s0)
}

pub fn step(cfg: &ScenarioConfig, state: &SimState, target_lane: usize, dt: f64) -> SimState {
    assert!(dt > 0.0);
    let mut next = state.clone();
    next.ego.target_lane = target_lane;

    // Background accelerations from the current state.
    let accels: Vec<f64> = state
        .others
        .iter()
        .map(|veh| {
            let params = cfg.idm.with_desired_speed(cfg.lanes[veh.lane - 1].mean_speed);
            idm_accel(veh.v, leader_of(cfg, state, veh.lane, veh.x, true), &params)
        })
        .collect();

    // The ego always respects its current lane's front vehicle. While
    // actually steering across (slot open), it additionally brakes for the
    // target lane's front vehicle; while held by the merge gate it keeps
    // flowing with its own lane instead of stalling behind traffic it
    // cannot join yet.
    let ego_params = cfg.idm.with_desired_speed(cfg.ego.desired_speed);
    let ego_lane = state.ego_lane(cfg);
    let crossing = ego_lane != target_lane;
    let blocked = crossing && slot_blocked(cfg, state, target_lane);
    let mut ego_accel = idm_accel(
        state.ego.v,
        leader_of(cfg, state, ego_lane, state.ego.x, false),
        &ego_params,
    );
    if crossing && !blocked {
        ego_accel = ego_accel.min(idm_accel(
            state.ego.v,
            leader_of(cfg, state, target_lane, state.ego.x, false),
            &ego_params,
        ));
    }

    for (veh, accel) in next.others.iter_mut().zip(accels) {
        veh.v = (veh.v + accel * dt).max(0.0);
        veh.x += veh.v * dt;
    }
    next.ego.v = (state.ego.v + ego_accel * dt).max(0.0);
    next.ego.x += next.ego.v * dt;

    // Merge gate: crossing toward another lane requires a physically open
    // slot there; otherwise hold laterally until one opens.
    let target_lat = (target_lane as f64 - 1.0) * cfg.lane_width;
    if !blocked {
        let max_move = cfg.lateral_speed * dt;
        next.ego.lat += (target_lat - state.ego.lat).clamp(-max_move, max_move);
    }

    next.clock += dt;
    next.done = next.ego.x >= cfg.route_length;
    next
}

/// Initial simulation state for a scenario (traffic spawned from the
/// scenario seed).
pub fn initial_state(cfg: &ScenarioConfig) -> Result<SimState> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let others = spawn_traffic(cfg, &mut rng)?;
    Ok(SimState {
        clock: 0.0,
        ego: EgoState {
            x: 0.0,
            lat: (cfg.ego.lane as f64 - 1.0) * cfg.lane_width,
            v: cfg.ego.speed,
            target_lane: cfg.ego.lane,
        },
        others,
        done: false,
    })
}

/// Absolute-frame snapshot handed to lane policies. The road runs at
/// `cfg.road_angle`; internal road-frame coordinates are pushed through
/// the (involutory) frame transform to produce absolute positions.
pub fn world_state(cfg: &ScenarioConfig, state: &SimState) -> WorldState {
    let psi = cfg.road_angle;
    let to_abs = |x: f64, lat: f64| rotate(x, lat, psi);
    let (ex, ey) = to_abs(state.ego.x, state.ego.lat);
    let heading = {
        let (hx, hy) = rotate(1.0, 0.0, psi);
        hy.atan2(hx)
    };
    let others = state
        .others
        .iter()
        .map(|veh| {
            let (x, y) = to_abs(veh.x, (veh.lane as f64 - 1.0) * cfg.lane_width);
            VehicleState {
                id: veh.id,
                x,
                y,
                v: veh.v,
                heading,
                accel: 0.0,
            }
        })
        .collect();
    let mid_lat = (cfg.n_lanes as f64 - 1.0) / 2.0 * cfg.lane_width;
    let (gx, gy) = to_abs(cfg.exit_distance, mid_lat);
    WorldState {
        ego: VehicleState {
            id: 0,
            x: ex,
            y: ey,
            v: state.ego.v,
            heading,
            accel: 0.0,
        },
        others,
        lanes: LaneGeometry {
            centerline_offsets: (0..cfg.n_lanes).map(|j| j as f64 * cfg.lane_width).collect(),
        },
        road_angle: psi,
        goal: [gx, gy],
        time_now: state.clock,
    }
}

/// Smallest same-lane bumper gap in the state, ego included.
fn min_same_lane_gap(cfg: &ScenarioConfig, state: &SimState) -> f64 {
    let mut min_gap = f64::INFINITY;
    for (i, a) in state.others.iter().enumerate() {
        for b in state.others.iter().skip(i + 1) {
            if a.lane == b.lane {
                let gap = (a.x - b.x).abs() - cfg.vehicle_length;
                min_gap = min_gap.min(gap);
            }
        }
    }
    let ego_lane = state.ego_lane(cfg);
    for veh in &state.others {
        if veh.lane == ego_lane {
            let gap = (veh.x - state.ego.x).abs() - cfg.vehicle_length;
            min_gap = min_gap.min(gap);
        }
    }
    min_gap
}

fn background_collision_free(cfg: &ScenarioConfig, state: &SimState) -> bool {
    for (i, a) in state.others.iter().enumerate() {
        for b in state.others.iter().skip(i + 1) {
            if a.lane == b.lane && (a.x - b.x).abs() - cfg.vehicle_length <= 0.0 {
                return false;
            }
        }
    }
    true
}

/// Runs one full simulation of a scenario under a lane policy.
pub fn run(cfg: &ScenarioConfig, policy: &mut dyn LanePolicy) -> Result<MetricsLog> {
    cfg.validate()?;
    let mut state = initial_state(cfg)?;
    let mut rows: Vec<TickRow> = Vec::new();
    let mut lane_changes = 0usize;
    let mut min_gap = f64::INFINITY;
    let mut prev_lane = state.ego_lane(cfg);

    while !state.done && state.clock < cfg.timeout {
        let world = world_state(cfg, &state);
        let decision = policy.decide(&world)?;

        let lane = state.ego_lane(cfg);
        if lane != prev_lane {
            lane_changes += 1;
            prev_lane = lane;
        }
        let headway = leader_of(cfg, &state, lane, state.ego.x, false)
            .map_or(cfg.weights.detection_range, |(_, gap)| {
                gap.min(cfg.weights.detection_range)
            });
        rows.push(TickRow {
            t: state.clock,
            x: state.ego.x,
            y_lat: state.ego.lat,
            lane,
            v: state.ego.v,
            headway,
            decision_lane: decision.target_lane,
            plan_ms: decision.plan_seconds * 1e3,
        });

        state = step(cfg, &state, decision.target_lane, cfg.dt);

        min_gap = min_gap.min(min_same_lane_gap(cfg, &state));
        if !background_collision_free(cfg, &state) {
            return Err(Error::invariant(format!(
                "background vehicles collided at t = {:.2}",
                state.clock
            )));
        }
        for veh in &state.others {
            let v0 = cfg.lanes[veh.lane - 1].mean_speed;
            if veh.v < 0.0 || veh.v > 1.5 * v0.max(1.0) {
                return Err(Error::invariant(format!(
                    "vehicle {} speed {:.2} outside [0, {:.2}]",
                    veh.id,
                    veh.v,
                    1.5 * v0.max(1.0)
                )));
            }
        }
    }

    let plan_ms: Vec<f64> = rows.iter().map(|r| r.plan_ms).collect();
    let headways: Vec<f64> = rows.iter().map(|r| r.headway).collect();
    let summary = RunSummary {
        schema_version: SCHEMA_VERSION,
        policy: policy.name().to_string(),
        seed: cfg.seed,
        completed: state.done,
        travel_time: state.clock,
        mean_headway: mean(&headways),
        min_gap,
        lane_changes,
        plan_ms_mean: mean(&plan_ms),
        plan_ms_p99: percentile(&plan_ms, 99.0),
    };
    Ok(MetricsLog { rows, summary })
}

/// Which lane policy drives a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Easter,
    Mobil,
    NoChange,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 3] = [PolicyKind::Easter, PolicyKind::Mobil, PolicyKind::NoChange];

    pub fn as_str(&self) -> &'static str {
        match self {
            PolicyKind::Easter => "easter",
            PolicyKind::Mobil => "mobil",
            PolicyKind::NoChange => "nochange",
        }
    }

    pub fn make(&self, cfg: &ScenarioConfig) -> Box<dyn LanePolicy> {
        match self {
            PolicyKind::Easter => {
                let mut selector = Selector::new(SelectorConfig {
                    weights: cfg.weights.clone(),
                    plan_dt: cfg.plan_dt,
                    horizon: cfg.horizon,
                    history_capacity: 16,
                    desired_speed: cfg.ego.desired_speed,
                    ..SelectorConfig::default()
                });
                for (i, veh) in cfg.vehicles.iter().enumerate() {
                    if !veh.accel_samples.is_empty() {
                        selector.seed_belief(i as u64 + 1, &veh.accel_samples);
                    }
                }
                Box::new(selector)
            }
            PolicyKind::Mobil => Box::new(MobilPolicy::new(
                cfg.idm.with_desired_speed(cfg.ego.desired_speed),
                cfg.mobil,
                cfg.vehicle_length,
            )),
            PolicyKind::NoChange => Box::new(NoChangePolicy),
        }
    }
}

impl std::str::FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "easter" => Ok(PolicyKind::Easter),
            "mobil" => Ok(PolicyKind::Mobil),
            "nochange" => Ok(PolicyKind::NoChange),
            other => Err(Error::config(format!(
                "unknown policy '{other}' (expected easter, mobil or nochange)"
            ))),
        }
    }
}

impl std::fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Vehicle positions predicted for one lattice column.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ColumnPredictions {
    pub column: usize,
    pub t: f64,
    /// (id, x, lat) per vehicle, projected frame.
    pub vehicles: Vec<(u64, f64, f64)>,
}

/// Everything needed to plot a single search instance externally.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchSnapshot {
    pub schema_version: u32,
    pub lattice: crate::graph::Lattice,
    pub lambda_goal: f64,
    pub records: Vec<SearchRecord>,
    pub path: Path,
    pub predictions: Vec<ColumnPredictions>,
    pub expansions: usize,
}

/// Runs one projection + search on a scenario's initial snapshot.
pub fn search_snapshot(cfg: &ScenarioConfig) -> Result<SearchSnapshot> {
    cfg.validate()?;
    let state = initial_state(cfg)?;
    let world = world_state(cfg, &state);
    let scene = crate::frame::project_scene(&world, None)?;
    let (histories, mut beliefs) = single_observation_tracks(&scene, 0.0);
    // Warm up beliefs for hand-placed vehicles with declared volatility.
    for (i, veh) in cfg.vehicles.iter().enumerate() {
        if let Some(belief) = beliefs.get_mut(i) {
            for &a in &veh.accel_samples {
                belief.update(a);
            }
        }
    }
    let predictor = ConstantVelocity;
    let ctx = SceneContext::new(&scene, &predictor, &histories, &beliefs, None, &cfg.weights)
        .with_plan_speed(cfg.ego.desired_speed);
    let lattice = build_lattice(&scene, cfg.ego.desired_speed, cfg.plan_dt, cfg.horizon);
    let result = extended_astar_full(&lattice, &ctx, &cfg.weights)?;

    let v = ctx.ego_speed();
    let predictions = (0..=lattice.n_columns)
        .map(|column| {
            let t = column as f64 * lattice.dx / v;
            let vehicles = scene
                .others
                .iter()
                .enumerate()
                .map(|(i, veh)| {
                    let pos = ctx.predicted(i, t);
                    (veh.id, pos[0], pos[1])
                })
                .collect();
            ColumnPredictions {
                column,
                t,
                vehicles,
            }
        })
        .collect();

    Ok(SearchSnapshot {
        schema_version: SCHEMA_VERSION,
        lattice,
        lambda_goal: ctx.lambda_goal,
        records: result.records,
        path: result.path,
        predictions,
        expansions: result.expansions,
    })
}
