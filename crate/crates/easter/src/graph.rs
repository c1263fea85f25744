//! Speed-scaled lane lattice: nodes, successor enumeration, surrogate goals.

use serde::{Deserialize, Serialize};

use crate::frame::ProjectedScene;

/// Lowest speed used to scale the lattice; keeps dx positive when the ego
/// is stopped.
pub const SPEED_FLOOR: f64 = 1.0;

/// A lattice position: `column` longitudinal levels ahead of the start,
/// `lane` 1-based from the leftmost lane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Node {
    pub column: usize,
    pub lane: usize,
}

/// The discrete search graph. Columns are spaced `dx = max(v, floor) * dt`
/// meters apart; rows are lane centers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Lattice {
    pub n_lanes: usize,
    /// Search horizon: number of longitudinal levels ahead of the start.
    pub n_columns: usize,
    /// Horizontal step, meters.
    pub dx: f64,
    pub lane_width: f64,
    pub start: Node,
}

impl Lattice {
    /// Longitudinal position of a node, meters.
    pub fn x(&self, n: Node) -> f64 {
        n.column as f64 * self.dx
    }

    /// Lateral position of a node, meters from the leftmost lane center.
    pub fn lat(&self, n: Node) -> f64 {
        (n.lane as f64 - 1.0) * self.lane_width
    }

    pub fn position(&self, n: Node) -> [f64; 2] {
        [self.x(n), self.lat(n)]
    }

    /// Euclidean distance between two nodes.
    pub fn distance(&self, a: Node, b: Node) -> f64 {
        let dx = self.x(b) - self.x(a);
        let dy = self.lat(b) - self.lat(a);
        dx.hypot(dy)
    }

    pub fn contains(&self, n: Node) -> bool {
        n.column <= self.n_columns && n.lane >= 1 && n.lane <= self.n_lanes
    }
}

/// Builds the lattice rooted at the ego's snapped lane. The horizontal step
/// is the current speed times the planning time step, floored so a stopped
/// ego still yields a usable graph. The horizon is raised to `n_lanes - 1`
/// when necessary so every surrogate goal stays reachable.
pub fn build_lattice(scene: &ProjectedScene, ego_speed: f64, dt: f64, horizon: usize) -> Lattice {
    assert!(dt > 0.0, "build_lattice: dt must be positive");
    assert!(horizon >= 1, "build_lattice: horizon must be >= 1");
    let n_lanes = scene.lane_count;
    let n_columns = horizon.max(n_lanes.saturating_sub(1)).max(1);
    Lattice {
        n_lanes,
        n_columns,
        dx: ego_speed.max(SPEED_FLOOR) * dt,
        lane_width: scene.lane_width,
        start: Node {
            column: 0,
            lane: scene.ego_lane_index,
        },
    }
}

/// Nodes reachable from `n` in one transition: next column, same or
/// adjacent lane. Empty at the final column.
pub fn successors(lattice: &Lattice, n: Node) -> Vec<Node> {
    if n.column >= lattice.n_columns {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(3);
    for lane in [n.lane.wrapping_sub(1), n.lane, n.lane + 1] {
        if lane >= 1 && lane <= lattice.n_lanes {
            out.push(Node {
                column: n.column + 1,
                lane,
            });
        }
    }
    out
}

/// The surrogate goal set: one node at the longitudinal end of each lane.
pub fn surrogate_goals(lattice: &Lattice) -> Vec<Node> {
    (1..=lattice.n_lanes)
        .map(|lane| Node {
            column: lattice.n_columns,
            lane,
        })
        .collect()
}
