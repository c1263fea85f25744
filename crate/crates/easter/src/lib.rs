//! Discretionary lane selection for highway driving.
//!
//! The engine projects the world into a rotated, ego-relative frame,
//! builds a speed-scaled lane lattice, and runs a time-extended A*
//! search with a risk/time/effort cost model to pick a target lane.
//! A kinematic simulator, MOBIL and no-change baselines, and a
//! Monte-Carlo harness are included for comparison studies.

pub mod baselines;
pub mod cost;
pub mod error;
pub mod frame;
pub mod graph;
pub mod metrics;
pub mod montecarlo;
pub mod prediction;
pub mod scenario;
pub mod search;
pub mod selector;
pub mod sim;

pub use error::Error;
