//! Command-line front end: single runs, Monte-Carlo batches, search dumps
//! and scenario validation.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use easter::montecarlo::run_batch;
use easter::scenario::ScenarioConfig;
use easter::sim::{run, search_snapshot, PolicyKind};
use easter::Error;

#[derive(Parser)]
#[command(name = "easter", about = "Search-based discretionary lane selection", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario under one policy and write metrics.
    Run {
        /// Scenario JSON file; omitted means the built-in default scenario.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Lane policy: easter, mobil or nochange.
        #[arg(long, default_value = "easter")]
        policy: String,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output stem; writes <out>.csv and <out>.json.
        #[arg(long, default_value = "run")]
        out: PathBuf,
    },
    /// Paired-seed batch comparison across all policies.
    Montecarlo {
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Base seed; run i uses seed base + i for every policy.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Runs per policy.
        #[arg(long, default_value_t = 100)]
        runs: usize,
        /// Worker threads (0 = all cores). Ignored without the
        /// `parallel` feature.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        /// Output JSON path.
        #[arg(long, default_value = "montecarlo.json")]
        out: PathBuf,
    },
    /// Dump one search instance (lattice, expansions, path, predictions).
    SearchDump {
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output JSON path.
        #[arg(long, default_value = "search.json")]
        out: PathBuf,
    },
    /// Validate a scenario file and print the resolved configuration.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
}

fn load_scenario(path: &Option<PathBuf>, seed: Option<u64>) -> easter::error::Result<ScenarioConfig> {
    let mut cfg = match path {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_weight_warnings(cfg: &ScenarioConfig) {
    for warning in cfg.weights.warnings() {
        eprintln!("warning: {warning}");
    }
}

fn write_json<T: serde::Serialize>(value: &T, path: &PathBuf) -> easter::error::Result<()> {
    let file = std::fs::File::create(path).map_err(|source| Error::Io {
        path: path.clone(),
        source,
    })?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(file), value)?;
    Ok(())
}

fn main_inner() -> easter::error::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            scenario,
            policy,
            seed,
            out,
        } => {
            let cfg = load_scenario(&scenario, seed)?;
            print_weight_warnings(&cfg);
            let kind: PolicyKind = policy.parse()?;
            let mut driver = kind.make(&cfg);
            let log = run(&cfg, driver.as_mut())?;
            let csv = out.with_extension("csv");
            let json = out.with_extension("json");
            log.write_csv(&csv)?;
            log.write_summary(&json)?;
            println!(
                "{}: {} ticks, travel time {:.2} s, {} lane changes -> {}, {}",
                kind,
                log.rows.len(),
                log.summary.travel_time,
                log.summary.lane_changes,
                csv.display(),
                json.display()
            );
        }
        Command::Montecarlo {
            scenario,
            seed,
            runs,
            jobs,
            out,
        } => {
            let cfg = load_scenario(&scenario, None)?;
            print_weight_warnings(&cfg);
            if runs == 0 {
                return Err(Error::config("--runs must be >= 1"));
            }
            #[cfg(feature = "parallel")]
            if jobs > 0 {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(jobs)
                    .build_global()
                    .map_err(|e| Error::config(format!("thread pool: {e}")))?;
            }
            #[cfg(not(feature = "parallel"))]
            let _ = jobs;
            let batch = run_batch(&cfg, &PolicyKind::ALL, seed, runs)?;
            write_json(&batch, &out)?;
            for agg in &batch.aggregates {
                println!(
                    "{:9} travel {:7.2} ± {:5.2} s  headway {:6.2} m  changes {:4.1}  plan p99 {:6.3} ms",
                    agg.policy,
                    agg.travel_time_mean,
                    agg.travel_time_std,
                    agg.mean_headway_mean,
                    agg.lane_changes_mean,
                    agg.plan_ms_p99_max
                );
            }
            println!("wrote {}", out.display());
        }
        Command::SearchDump { scenario, seed, out } => {
            let cfg = load_scenario(&scenario, seed)?;
            print_weight_warnings(&cfg);
            let snapshot = search_snapshot(&cfg)?;
            write_json(&snapshot, &out)?;
            println!(
                "search: {} expansions, path cost {:.3}, goal lane {} -> {}",
                snapshot.expansions,
                snapshot.path.total_cost,
                snapshot.path.goal.lane,
                out.display()
            );
        }
        Command::Validate { scenario } => {
            let cfg = ScenarioConfig::load(&scenario)?;
            print_weight_warnings(&cfg);
            println!("{}", serde_json::to_string_pretty(&cfg)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match main_inner() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Invariant(_) => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}
