//! Projection of absolute-frame vehicle and lane states into the rotated,
//! ego-relative, lane-indexed space the search operates in.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Snapshot of a single vehicle in the absolute (inertial) frame.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct VehicleState {
    pub id: u64,
    pub x: f64,
    pub y: f64,
    /// Speed, m/s. Never negative.
    pub v: f64,
    /// Inertial heading angle, radians.
    pub heading: f64,
    /// Latest observed acceleration, m/s^2.
    pub accel: f64,
}

/// Straight multi-lane road geometry. The centerline offsets are lateral
/// coordinates in the rotated (Eastbound) frame, strictly increasing with
/// uniform spacing equal to the lane width. Lane 1 is the leftmost lane.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LaneGeometry {
    pub centerline_offsets: Vec<f64>,
}

impl LaneGeometry {
    pub fn uniform(n_lanes: usize, lane_width: f64) -> Self {
        LaneGeometry {
            centerline_offsets: (0..n_lanes).map(|j| j as f64 * lane_width).collect(),
        }
    }

    pub fn n_lanes(&self) -> usize {
        self.centerline_offsets.len()
    }

    pub fn lane_width(&self) -> f64 {
        if self.centerline_offsets.len() < 2 {
            3.5
        } else {
            self.centerline_offsets[1] - self.centerline_offsets[0]
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.centerline_offsets.is_empty() {
            return Err(Error::config("lane geometry has no lanes"));
        }
        let w = self.lane_width();
        for pair in self.centerline_offsets.windows(2) {
            let step = pair[1] - pair[0];
            if step <= 0.0 || (step - w).abs() > 1e-9 {
                return Err(Error::config(
                    "lane centerline offsets must be strictly increasing with uniform spacing",
                ));
            }
        }
        Ok(())
    }
}

/// Absolute-frame snapshot handed to a lane policy each planning cycle.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WorldState {
    pub ego: VehicleState,
    pub others: Vec<VehicleState>,
    pub lanes: LaneGeometry,
    /// Road angle psi, radians.
    pub road_angle: f64,
    /// Goal (highway exit) position in the absolute frame.
    pub goal: [f64; 2],
    pub time_now: f64,
}

/// An other vehicle expressed in the projected frame: longitudinal meters
/// relative to the ego, lateral in lane-widths relative to lane 1.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ProjectedVehicle {
    pub id: u64,
    /// Longitudinal position, meters (ego at 0).
    pub x: f64,
    /// Lateral position in lane-widths from the leftmost lane center.
    /// Continuous, never snapped.
    pub y_lanes: f64,
    pub v: f64,
    /// Heading in the projected frame, radians.
    pub heading: f64,
}

impl ProjectedVehicle {
    /// Lateral position in meters from the leftmost lane center.
    pub fn lat_m(&self, lane_width: f64) -> f64 {
        self.y_lanes * lane_width
    }
}

/// Rotated, shifted scene with the ego at the longitudinal origin and
/// snapped to the nearest lane center.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProjectedScene {
    /// Ego lateral position after snapping, meters: (lane_index - 1) * lane_width.
    pub ego_lat: f64,
    /// Snapped lane index, 1-based from the leftmost lane.
    pub ego_lane_index: usize,
    /// Signed distance of the ego's rotated lateral position from the
    /// previous target lane center (0 when no previous target).
    pub ego_offset_delta: f64,
    /// Ego rotated lateral position relative to lane 1, meters (unsnapped).
    pub ego_lat_raw: f64,
    pub ego_speed: f64,
    pub others: Vec<ProjectedVehicle>,
    pub lane_count: usize,
    pub lane_width: f64,
    /// Goal position in the projected frame, meters.
    pub goal: [f64; 2],
}

/// Rotation of an absolute position into the road-aligned frame.
///
/// Note: as written this transform has determinant -1, i.e. it reflects the
/// lateral axis. All downstream indexing, risk and cost computations live in
/// the same frame, so decisions are unaffected.
pub fn rotate(x: f64, y: f64, psi: f64) -> (f64, f64) {
    let (s, c) = psi.sin_cos();
    (x * c + y * s, x * s - y * c)
}

/// Index (1-based) of the lane whose centerline is closest to `y_r`.
/// Ties break toward the smaller index; off-road positions clamp to the
/// nearest valid lane.
pub fn nearest_lane(y_r: f64, lane_offsets: &[f64]) -> usize {
    assert!(!lane_offsets.is_empty(), "nearest_lane: empty lane list");
    let mut best = 0usize;
    let mut best_d = f64::INFINITY;
    for (j, off) in lane_offsets.iter().enumerate() {
        let d = (off - y_r).abs();
        if d < best_d {
            best_d = d;
            best = j;
        }
    }
    best + 1
}

/// Nearest 1-based lane index for a lateral position already expressed in
/// lane-widths from lane 1. Ties break toward the smaller index, matching
/// `nearest_lane`.
pub fn nearest_lane_of_index(y_lanes: f64, lane_count: usize) -> usize {
    assert!(lane_count > 0);
    let mut best = 1usize;
    let mut best_d = f64::INFINITY;
    for j in 0..lane_count {
        let d = (y_lanes - j as f64).abs();
        if d < best_d {
            best_d = d;
            best = j + 1;
        }
    }
    best
}

/// Heading of a unit vector pushed through the same frame transform as the
/// positions, so that constant-velocity extrapolation stays consistent with
/// the projected coordinates.
fn project_heading(heading: f64, psi: f64) -> f64 {
    let (hx, hy) = rotate(heading.cos(), heading.sin(), psi);
    hy.atan2(hx)
}

/// Projects the world into the relative, lane-indexed frame.
///
/// The ego's longitudinal position becomes exactly 0, its lateral position
/// snaps to the nearest lane center, and all other vehicles shift by the
/// ego's rotated longitudinal position. `prev_target_lat` is the previous
/// target lane center (meters from lane 1), carried by the selector.
pub fn project_scene(world: &WorldState, prev_target_lat: Option<f64>) -> Result<ProjectedScene> {
    world.lanes.validate()?;
    let psi = world.road_angle;
    let offsets = &world.lanes.centerline_offsets;
    let lane_width = world.lanes.lane_width();
    let base = offsets[0];

    let (ego_xr, ego_yr) = rotate(world.ego.x, world.ego.y, psi);
    let ego_lane_index = nearest_lane(ego_yr, offsets);
    let ego_lat = offsets[ego_lane_index - 1] - base;
    let ego_lat_raw = ego_yr - base;
    let ego_offset_delta = prev_target_lat.map_or(0.0, |prev| ego_lat_raw - prev);

    let others = world
        .others
        .iter()
        .map(|veh| {
            let (xr, yr) = rotate(veh.x, veh.y, psi);
            ProjectedVehicle {
                id: veh.id,
                x: xr - ego_xr,
                y_lanes: (yr - base) / lane_width,
                v: veh.v,
                heading: project_heading(veh.heading, psi),
            }
        })
        .collect();

    let (gx, gy) = rotate(world.goal[0], world.goal[1], psi);
    Ok(ProjectedScene {
        ego_lat,
        ego_lane_index,
        ego_offset_delta,
        ego_lat_raw,
        ego_speed: world.ego.v,
        others,
        lane_count: offsets.len(),
        lane_width,
        goal: [gx - ego_xr, gy - base],
    })
}
