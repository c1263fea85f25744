//! Best-first search over the lane lattice with per-node transition time
//! and surrogate-goal termination.
//!
//! Because step costs are evaluated at the accumulated transition time,
//! two paths reaching the same lattice node with different lane-change
//! counts see different futures. The search therefore keys its records by
//! (column, lane, lane-changes-so-far): within one such state every path
//! has the same transition time, so keeping the lowest g per state is
//! exact and the usual A* optimality argument applies unchanged.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::cost::{heuristic, step_cost, CostBreakdown, CostWeights, SceneContext};
use crate::error::{Error, Result};
use crate::graph::{successors, surrogate_goals, Lattice, Node};

/// Best known search bookkeeping for one lattice node.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SearchRecord {
    pub node: Node,
    pub f: f64,
    pub g: f64,
    pub h: f64,
    pub t_n: f64,
    pub parent: Option<Node>,
}

/// An optimal root-to-surrogate-goal path.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Path {
    /// Start to goal, consecutive lattice successors.
    pub nodes: Vec<Node>,
    /// Incoming-edge cost decomposition for `nodes[1..]`.
    pub breakdowns: Vec<CostBreakdown>,
    /// Transition time at each node; `times[0] == 0`.
    pub times: Vec<f64>,
    /// The surrogate goal the search closed on.
    pub goal: Node,
    /// Sum of step costs along the path.
    pub g_total: f64,
    /// Search objective: `g_total` plus the heuristic tail at the goal.
    pub total_cost: f64,
}

/// Search output plus per-node records for diagnostics and dumps.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchResult {
    pub path: Path,
    pub records: Vec<SearchRecord>,
    pub expansions: usize,
}

// Heap entry; ordered so the BinaryHeap pops the lowest f first, with the
// deterministic tie-break chain f, h, keep-lane-before-change, lane, then
// change count.
#[derive(Debug, Clone, Copy)]
struct OpenEntry {
    f: f64,
    h: f64,
    change_edge: bool,
    lane: usize,
    changes: usize,
    state: usize,
}

impl PartialEq for OpenEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for OpenEntry {}
impl PartialOrd for OpenEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for OpenEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Inverted: BinaryHeap is a max-heap.
        other
            .f
            .total_cmp(&self.f)
            .then(other.h.total_cmp(&self.h))
            .then(other.change_edge.cmp(&self.change_edge))
            .then(other.lane.cmp(&self.lane))
            .then(other.changes.cmp(&self.changes))
    }
}

/// Dense indexing over (column, lane, changes) states.
struct StateSpace {
    n_lanes: usize,
    n_changes: usize, // changes dimension size = n_columns + 1
}

impl StateSpace {
    fn new(lattice: &Lattice) -> Self {
        StateSpace {
            n_lanes: lattice.n_lanes,
            n_changes: lattice.n_columns + 1,
        }
    }

    fn len(&self, lattice: &Lattice) -> usize {
        (lattice.n_columns + 1) * self.n_lanes * self.n_changes
    }

    fn index(&self, column: usize, lane: usize, changes: usize) -> usize {
        (column * self.n_lanes + (lane - 1)) * self.n_changes + changes
    }

    fn decode(&self, idx: usize) -> (usize, usize, usize) {
        let changes = idx % self.n_changes;
        let rest = idx / self.n_changes;
        let lane = rest % self.n_lanes + 1;
        let column = rest / self.n_lanes;
        (column, lane, changes)
    }
}

/// Transition time accumulated by a state: keep-lane steps cost `dx / v`,
/// lane-change steps cost `hypot(dx, lane_width) / v`.
fn state_time(lattice: &Lattice, v: f64, column: usize, changes: usize) -> f64 {
    let t_keep = lattice.dx / v;
    let t_change = lattice.dx.hypot(lattice.lane_width) / v;
    (column - changes) as f64 * t_keep + changes as f64 * t_change
}

/// Walks a parent chain back to the start and reverses it.
fn reconstruct(parents: &[Option<usize>], goal_state: usize) -> Result<Vec<usize>> {
    let mut chain = vec![goal_state];
    let mut cur = goal_state;
    while let Some(p) = parents[cur] {
        chain.push(p);
        cur = p;
        if chain.len() > parents.len() {
            return Err(Error::invariant("cyclic parent chain in search records"));
        }
    }
    chain.reverse();
    Ok(chain)
}

/// Runs the time-extended A* search and returns the optimal path together
/// with per-node records.
pub fn extended_astar_full(
    lattice: &Lattice,
    ctx: &SceneContext<'_>,
    weights: &CostWeights,
) -> Result<SearchResult> {
    let goals = surrogate_goals(lattice);
    if goals.is_empty() {
        return Err(Error::invariant("lattice has no surrogate goals"));
    }
    let space = StateSpace::new(lattice);
    let n_states = space.len(lattice);
    let v = ctx.ego_speed();

    let mut g = vec![f64::INFINITY; n_states];
    let mut parents: Vec<Option<usize>> = vec![None; n_states];
    let mut edge_breakdowns: Vec<CostBreakdown> = vec![CostBreakdown::default(); n_states];
    let mut closed = vec![false; n_states];
    let mut open = BinaryHeap::new();

    let start = lattice.start;
    let start_state = space.index(0, start.lane, 0);
    let h0 = heuristic(lattice, start, ctx.scene.goal, ctx.lambda_goal);
    g[start_state] = 0.0;
    open.push(OpenEntry {
        f: h0,
        h: h0,
        change_edge: false,
        lane: start.lane,
        changes: 0,
        state: start_state,
    });

    let mut expansions = 0usize;
    let mut goal_state: Option<usize> = None;

    while let Some(entry) = open.pop() {
        let state = entry.state;
        if closed[state] {
            continue;
        }
        let (column, lane, changes) = space.decode(state);
        // Stale lazy-inserted entry.
        if entry.f > g[state] + entry.h + 1e-12 {
            continue;
        }
        closed[state] = true;
        expansions += 1;

        let node = Node { column, lane };
        if column == lattice.n_columns {
            goal_state = Some(state);
            break;
        }

        for succ in successors(lattice, node) {
            let succ_changes = changes + usize::from(succ.lane != lane);
            let succ_state = space.index(succ.column, succ.lane, succ_changes);
            if closed[succ_state] {
                continue;
            }
            let t_child = state_time(lattice, v, succ.column, succ_changes);
            let (edge_g, breakdown) = step_cost(lattice, node, succ, t_child, ctx, weights);
            let tentative = g[state] + edge_g;
            if tentative < g[succ_state] {
                g[succ_state] = tentative;
                parents[succ_state] = Some(state);
                edge_breakdowns[succ_state] = breakdown;
                let h = breakdown.heuristic;
                open.push(OpenEntry {
                    f: tentative + h,
                    h,
                    change_edge: succ.lane != lane,
                    lane: succ.lane,
                    changes: succ_changes,
                    state: succ_state,
                });
            }
        }
    }

    let goal_state = goal_state
        .ok_or_else(|| Error::invariant("search exhausted the open list without closing a goal"))?;

    let chain = reconstruct(&parents, goal_state)?;
    let mut nodes = Vec::with_capacity(chain.len());
    let mut breakdowns = Vec::with_capacity(chain.len().saturating_sub(1));
    let mut times = Vec::with_capacity(chain.len());
    for (i, &state) in chain.iter().enumerate() {
        let (column, lane, changes) = space.decode(state);
        nodes.push(Node { column, lane });
        times.push(state_time(lattice, v, column, changes));
        if i > 0 {
            breakdowns.push(edge_breakdowns[state]);
        }
    }
    let (gc, gl, _) = space.decode(goal_state);
    let goal_node = Node {
        column: gc,
        lane: gl,
    };
    let g_total = g[goal_state];
    let h_tail = heuristic(lattice, goal_node, ctx.scene.goal, ctx.lambda_goal);

    // Per-node records: the best state seen for each lattice node.
    let mut records = Vec::new();
    for column in 0..=lattice.n_columns {
        for lane in 1..=lattice.n_lanes {
            let mut best: Option<SearchRecord> = None;
            for changes in 0..space.n_changes {
                let state = space.index(column, lane, changes);
                if !g[state].is_finite() {
                    continue;
                }
                let node = Node { column, lane };
                let h = heuristic(lattice, node, ctx.scene.goal, ctx.lambda_goal);
                let parent = parents[state].map(|p| {
                    let (pc, pl, _) = space.decode(p);
                    Node {
                        column: pc,
                        lane: pl,
                    }
                });
                let record = SearchRecord {
                    node,
                    f: g[state] + h,
                    g: g[state],
                    h,
                    t_n: state_time(lattice, v, column, changes),
                    parent,
                };
                if best.as_ref().map_or(true, |b| record.g < b.g) {
                    best = Some(record);
                }
            }
            if let Some(r) = best {
                records.push(r);
            }
        }
    }

    Ok(SearchResult {
        path: Path {
            nodes,
            breakdowns,
            times,
            goal: goal_node,
            g_total,
            total_cost: g_total + h_tail,
        },
        records,
        expansions,
    })
}

/// Runs the search and returns only the optimal path.
pub fn extended_astar(
    lattice: &Lattice,
    ctx: &SceneContext<'_>,
    weights: &CostWeights,
) -> Result<Path> {
    extended_astar_full(lattice, ctx, weights).map(|r| r.path)
}

/// One admissibility violation: a node whose heuristic exceeds the true
/// optimal cost-to-go.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AdmissibilityViolation {
    pub node: Node,
    pub changes: usize,
    pub heuristic: f64,
    pub cost_to_go: f64,
}

/// Result of auditing the heuristic against a backward dynamic program
/// over the lattice DAG.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub checked_states: usize,
    pub lambda_goal: f64,
    pub violations: Vec<AdmissibilityViolation>,
}

impl AdmissibilityReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks `h(n) <= J(n)` for every reachable state, where `J` is the exact
/// optimal cost-to-go computed by backward DP (terminal states carry their
/// heuristic tail, matching the search objective).
pub fn verify_admissibility(
    lattice: &Lattice,
    ctx: &SceneContext<'_>,
    weights: &CostWeights,
) -> AdmissibilityReport {
    let space = StateSpace::new(lattice);
    let n_states = space.len(lattice);
    let v = ctx.ego_speed();

    // Forward reachability from the start state.
    let mut reachable = vec![false; n_states];
    reachable[space.index(0, lattice.start.lane, 0)] = true;
    for column in 0..lattice.n_columns {
        for lane in 1..=lattice.n_lanes {
            for changes in 0..=column {
                if !reachable[space.index(column, lane, changes)] {
                    continue;
                }
                for succ in successors(lattice, Node { column, lane }) {
                    let sc = changes + usize::from(succ.lane != lane);
                    reachable[space.index(succ.column, succ.lane, sc)] = true;
                }
            }
        }
    }

    // Backward DP over the DAG.
    let mut cost_to_go = vec![f64::INFINITY; n_states];
    for lane in 1..=lattice.n_lanes {
        for changes in 0..space.n_changes {
            let node = Node {
                column: lattice.n_columns,
                lane,
            };
            cost_to_go[space.index(lattice.n_columns, lane, changes)] =
                heuristic(lattice, node, ctx.scene.goal, ctx.lambda_goal);
        }
    }
    for column in (0..lattice.n_columns).rev() {
        for lane in 1..=lattice.n_lanes {
            let node = Node { column, lane };
            for changes in 0..=column {
                let state = space.index(column, lane, changes);
                let mut best = f64::INFINITY;
                for succ in successors(lattice, node) {
                    let sc = changes + usize::from(succ.lane != lane);
                    let t_child = state_time(lattice, v, succ.column, sc);
                    let (edge_g, _) = step_cost(lattice, node, succ, t_child, ctx, weights);
                    let total = edge_g + cost_to_go[space.index(succ.column, succ.lane, sc)];
                    if total < best {
                        best = total;
                    }
                }
                cost_to_go[state] = best;
            }
        }
    }

    let mut checked = 0usize;
    let mut violations = Vec::new();
    for idx in 0..n_states {
        if !reachable[idx] {
            continue;
        }
        let (column, lane, changes) = space.decode(idx);
        let node = Node { column, lane };
        let h = heuristic(lattice, node, ctx.scene.goal, ctx.lambda_goal);
        checked += 1;
        if h > cost_to_go[idx] + 1e-9 {
            violations.push(AdmissibilityViolation {
                node,
                changes,
                heuristic: h,
                cost_to_go: cost_to_go[idx],
            });
        }
    }

    AdmissibilityReport {
        checked_states: checked,
        lambda_goal: ctx.lambda_goal,
        violations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::travel_time;
    use crate::cost::single_observation_tracks;
    use crate::frame::ProjectedScene;
    use crate::graph::build_lattice;
    use crate::prediction::ConstantVelocity;
    use approx::assert_relative_eq;

    fn empty_scene() -> ProjectedScene {
        ProjectedScene {
            ego_lat: 3.5,
            ego_lane_index: 2,
            ego_offset_delta: 0.0,
            ego_lat_raw: 3.5,
            ego_speed: 15.0,
            others: vec![],
            lane_count: 3,
            lane_width: 3.5,
            goal: [100_000.0, 3.5],
        }
    }

    #[test]
    fn empty_road_keeps_lane() {
        let scene = empty_scene();
        let weights = CostWeights::default();
        let (histories, beliefs) = single_observation_tracks(&scene, 0.0);
        let predictor = ConstantVelocity;
        let ctx = SceneContext::new(&scene, &predictor, &histories, &beliefs, None, &weights);
        let lattice = build_lattice(&scene, 15.0, 1.0, 10);
        let path = extended_astar(&lattice, &ctx, &weights).unwrap();
        assert_eq!(path.nodes.len(), 11);
        assert!(path.nodes.iter().all(|n| n.lane == 2));
        // Symmetric lanes: cost is the keep-lane chain of control + time +
        // goal terms.
        let per_edge: f64 = path.breakdowns.iter().map(|b| b.g()).sum();
        assert_relative_eq!(path.g_total, per_edge, epsilon = 1e-9);
    }

    #[test]
    fn times_are_prefix_sums_of_travel_time() {
        let scene = empty_scene();
        let weights = CostWeights::default();
        let (histories, beliefs) = single_observation_tracks(&scene, 0.0);
        let predictor = ConstantVelocity;
        let ctx = SceneContext::new(&scene, &predictor, &histories, &beliefs, None, &weights);
        let lattice = build_lattice(&scene, 15.0, 1.0, 10);
        let path = extended_astar(&lattice, &ctx, &weights).unwrap();
        let mut acc = 0.0;
        for i in 1..path.nodes.len() {
            acc += travel_time(&lattice, path.nodes[i - 1], path.nodes[i], 15.0);
            assert_relative_eq!(path.times[i], acc, epsilon = 1e-9);
            assert!(path.times[i] > path.times[i - 1]);
        }
    }

    #[test]
    fn expansions_bounded_by_state_count() {
        let scene = empty_scene();
        let weights = CostWeights::default();
        let (histories, beliefs) = single_observation_tracks(&scene, 0.0);
        let predictor = ConstantVelocity;
        let ctx = SceneContext::new(&scene, &predictor, &histories, &beliefs, None, &weights);
        let lattice = build_lattice(&scene, 15.0, 1.0, 10);
        let result = extended_astar_full(&lattice, &ctx, &weights).unwrap();
        assert!(result.expansions <= (lattice.n_columns + 1) * lattice.n_lanes * (lattice.n_columns + 1));
    }

    #[test]
    fn determinism_identical_inputs() {
        let scene = empty_scene();
        let weights = CostWeights::default();
        let (histories, beliefs) = single_observation_tracks(&scene, 0.0);
        let predictor = ConstantVelocity;
        let ctx = SceneContext::new(&scene, &predictor, &histories, &beliefs, None, &weights);
        let lattice = build_lattice(&scene, 15.0, 1.0, 10);
        let a = extended_astar(&lattice, &ctx, &weights).unwrap();
        let b = extended_astar(&lattice, &ctx, &weights).unwrap();
        assert_eq!(a.nodes, b.nodes);
        assert_eq!(a.total_cost.to_bits(), b.total_cost.to_bits());
    }

    #[test]
    fn reconstruct_walks_parent_chain() {
        let parents = vec![None, Some(0), Some(1)];
        assert_eq!(reconstruct(&parents, 2).unwrap(), vec![0, 1, 2]);
        assert_eq!(reconstruct(&parents, 0).unwrap(), vec![0]);
    }

    #[test]
    fn admissibility_clean_with_defaults() {
        let scene = empty_scene();
        let weights = CostWeights::default();
        let (histories, beliefs) = single_observation_tracks(&scene, 0.0);
        let predictor = ConstantVelocity;
        let ctx = SceneContext::new(&scene, &predictor, &histories, &beliefs, None, &weights);
        let lattice = build_lattice(&scene, 15.0, 1.0, 10);
        let report = verify_admissibility(&lattice, &ctx, &weights);
        assert!(report.is_clean(), "violations: {:?}", report.violations);
    }

    #[test]
    fn admissibility_violated_by_inflated_goal_weight() {
        let mut scene = empty_scene();
        // Goal exactly at the terminal column with a huge goal weight:
        // terminal cost-to-go collapses to ~0 while pre-terminal
        // heuristics stay large.
        scene.goal = [150.0, 3.5];
        let weights = CostWeights {
            lambda_goal_scale: 10_000.0,
            ..CostWeights::default()
        };
        let (histories, beliefs) = single_observation_tracks(&scene, 0.0);
        let predictor = ConstantVelocity;
        let ctx = SceneContext::new(&scene, &predictor, &histories, &beliefs, None, &weights);
        let lattice = build_lattice(&scene, 15.0, 1.0, 10);
        let report = verify_admissibility(&lattice, &ctx, &weights);
        assert!(!report.is_clean());
    }

    #[test]
    fn admissibility_trivial_with_zero_goal_weight() {
        let scene = empty_scene();
        let weights = CostWeights {
            lambda_goal_scale: 0.0,
            ..CostWeights::default()
        };
        let (histories, beliefs) = single_observation_tracks(&scene, 0.0);
        let predictor = ConstantVelocity;
        let ctx = SceneContext::new(&scene, &predictor, &histories, &beliefs, None, &weights);
        let lattice = build_lattice(&scene, 15.0, 1.0, 10);
        let report = verify_admissibility(&lattice, &ctx, &weights);
        assert!(report.is_clean());
        assert_relative_eq!(report.lambda_goal, 0.0);
    }
}
