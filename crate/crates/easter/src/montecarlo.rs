//! Monte-Carlo policy comparison: many paired-seed runs per policy with
//! aggregate statistics. The batch is data-parallel over seeds when the
//! `parallel` feature is on; a sequential driver is always available.

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::metrics::{mean, std_dev, RunSummary, SCHEMA_VERSION};
use crate::scenario::ScenarioConfig;
use crate::sim::{run, PolicyKind};

/// Aggregate statistics for one policy over a batch.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicyAggregate {
    pub policy: String,
    pub runs: usize,
    pub completed: usize,
    pub travel_time_mean: f64,
    pub travel_time_std: f64,
    pub mean_headway_mean: f64,
    pub min_gap_mean: f64,
    pub lane_changes_mean: f64,
    pub plan_ms_mean: f64,
    pub plan_ms_p99_max: f64,
}

/// Result of a full batch: per-run summaries plus per-policy aggregates.
/// Runs are paired: run i of every policy uses seed `base_seed + i`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatchResult {
    pub schema_version: u32,
    pub base_seed: u64,
    pub runs_per_policy: usize,
    pub aggregates: Vec<PolicyAggregate>,
    pub summaries: Vec<RunSummary>,
}

impl BatchResult {
    pub fn aggregate_for(&self, policy: PolicyKind) -> Option<&PolicyAggregate> {
        self.aggregates.iter().find(|a| a.policy == policy.as_str())
    }

    /// Summaries of one policy in seed order.
    pub fn summaries_for(&self, policy: PolicyKind) -> Vec<&RunSummary> {
        let mut rows: Vec<&RunSummary> = self
            .summaries
            .iter()
            .filter(|s| s.policy == policy.as_str())
            .collect();
        rows.sort_by_key(|s| s.seed);
        rows
    }
}

fn one_run(cfg: &ScenarioConfig, policy: PolicyKind, seed: u64) -> Result<RunSummary> {
    let mut scenario = cfg.clone();
    scenario.seed = seed;
    let mut driver = policy.make(&scenario);
    Ok(run(&scenario, driver.as_mut())?.summary)
}

fn aggregate(policy: PolicyKind, summaries: &[RunSummary]) -> PolicyAggregate {
    let of = |f: fn(&RunSummary) -> f64| -> Vec<f64> { summaries.iter().map(f).collect() };
    let travel = of(|s| s.travel_time);
    PolicyAggregate {
        policy: policy.as_str().to_string(),
        runs: summaries.len(),
        completed: summaries.iter().filter(|s| s.completed).count(),
        travel_time_mean: mean(&travel),
        travel_time_std: std_dev(&travel),
        mean_headway_mean: mean(&of(|s| s.mean_headway)),
        min_gap_mean: mean(&of(|s| s.min_gap)),
        lane_changes_mean: mean(&of(|s| s.lane_changes as f64)),
        plan_ms_mean: mean(&of(|s| s.plan_ms_mean)),
        plan_ms_p99_max: of(|s| s.plan_ms_p99).into_iter().fold(0.0, f64::max),
    }
}

fn collect(
    policies: &[PolicyKind],
    base_seed: u64,
    runs: usize,
    summaries: Vec<RunSummary>,
) -> BatchResult {
    let aggregates = policies
        .iter()
        .map(|&p| {
            let rows: Vec<RunSummary> = summaries
                .iter()
                .filter(|s| s.policy == p.as_str())
                .cloned()
                .collect();
            aggregate(p, &rows)
        })
        .collect();
    BatchResult {
        schema_version: SCHEMA_VERSION,
        base_seed,
        runs_per_policy: runs,
        aggregates,
        summaries,
    }
}

/// Sequential batch driver. Identical output to `run_batch` for the same
/// inputs; only the schedule differs.
pub fn run_batch_sequential(
    cfg: &ScenarioConfig,
    policies: &[PolicyKind],
    base_seed: u64,
    runs: usize,
) -> Result<BatchResult> {
    let mut summaries = Vec::with_capacity(policies.len() * runs);
    for &policy in policies {
        for i in 0..runs {
            summaries.push(one_run(cfg, policy, base_seed + i as u64)?);
        }
    }
    Ok(collect(policies, base_seed, runs, summaries))
}

/// Batch driver: data-parallel over (policy, seed) jobs when the
/// `parallel` feature is enabled, falling back to the sequential driver
/// otherwise.
pub fn run_batch(
    cfg: &ScenarioConfig,
    policies: &[PolicyKind],
    base_seed: u64,
    runs: usize,
) -> Result<BatchResult> {
    #[cfg(feature = "parallel")]
    {
        let jobs: Vec<(PolicyKind, u64)> = policies
            .iter()
            .flat_map(|&p| (0..runs).map(move |i| (p, base_seed + i as u64)))
            .collect();
        let summaries = jobs
            .par_iter()
            .map(|&(policy, seed)| one_run(cfg, policy, seed))
            .collect::<Result<Vec<_>>>()?;
        Ok(collect(policies, base_seed, runs, summaries))
    }
    #[cfg(not(feature = "parallel"))]
    {
        run_batch_sequential(cfg, policies, base_seed, runs)
    }
}
