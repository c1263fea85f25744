//! Scenario configuration: JSON schema, validation, loading.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::MobilParams;
use crate::cost::CostWeights;
use crate::error::{Error, Result};
use crate::sim::IdmParams;

/// Traffic specification for one lane.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LaneTraffic {
    /// Mean vehicle speed, m/s.
    pub mean_speed: f64,
    /// Vehicles per 100 m; 0 leaves the lane empty.
    pub density: f64,
    /// Mean bumper-to-bumper gap between consecutive vehicles, meters.
    pub mean_headway: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EgoSpawn {
    /// 1-based lane index from the leftmost lane.
    pub lane: usize,
    /// Initial speed, m/s.
    pub speed: f64,
    /// Free-flow desired speed, m/s.
    pub desired_speed: f64,
}

/// A hand-placed vehicle, overriding random spawning when present.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExplicitVehicle {
    pub lane: usize,
    /// Longitudinal position relative to the ego spawn, meters.
    pub x: f64,
    pub v: f64,
    /// Optional acceleration samples used to warm up the vehicle's
    /// volatility belief before the first search.
    #[serde(default)]
    pub accel_samples: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub n_lanes: usize,
    pub lane_width: f64,
    pub route_length: f64,
    /// Road angle psi, radians.
    pub road_angle: f64,
    /// Distance from the ego spawn to the highway exit (goal), meters.
    pub exit_distance: f64,
    pub lanes: Vec<LaneTraffic>,
    pub ego: EgoSpawn,
    pub seed: u64,
    /// Simulation time step, seconds.
    pub dt: f64,
    /// Search horizon, lattice columns.
    pub horizon: usize,
    /// Planning time step scaling the lattice columns, seconds.
    pub plan_dt: f64,
    pub vehicle_length: f64,
    /// Ego lateral speed while changing lanes, m/s.
    pub lateral_speed: f64,
    /// Simulation timeout, seconds.
    pub timeout: f64,
    pub idm: IdmParams,
    pub mobil: MobilParams,
    pub weights: CostWeights,
    /// Explicit vehicle placements; when non-empty, random spawning is
    /// skipped entirely.
    pub vehicles: Vec<ExplicitVehicle>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            n_lanes: 3,
            lane_width: 3.5,
            route_length: 230.0,
            road_angle: 0.0,
            exit_distance: 100_000.0,
            lanes: vec![
                LaneTraffic {
                    mean_speed: 8.0,
                    density: 3.0,
                    mean_headway: 30.0,
                },
                LaneTraffic {
                    mean_speed: 5.0,
                    density: 3.0,
                    mean_headway: 25.0,
                },
                LaneTraffic {
                    mean_speed: 1.0,
                    density: 4.0,
                    mean_headway: 20.0,
                },
            ],
            ego: EgoSpawn {
                lane: 2,
                speed: 5.0,
                desired_speed: 15.0,
            },
            seed: 7,
            dt: 0.1,
            horizon: 10,
            plan_dt: 1.0,
            vehicle_length: 5.0,
            lateral_speed: 3.5 / 3.0,
            timeout: 300.0,
            idm: IdmParams::default(),
            mobil: MobilParams::default(),
            weights: CostWeights::default(),
            vehicles: Vec::new(),
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_lanes == 0 {
            return Err(Error::config("n_lanes must be >= 1"));
        }
        if self.lanes.len() != self.n_lanes {
            return Err(Error::config(format!(
                "lanes has {} entries but n_lanes is {}",
                self.lanes.len(),
                self.n_lanes
            )));
        }
        if self.route_length <= 0.0 {
            return Err(Error::config("route_length must be positive"));
        }
        if self.lane_width <= 0.0 || self.dt <= 0.0 || self.plan_dt <= 0.0 || self.timeout <= 0.0 {
            return Err(Error::config(
                "lane_width, dt, plan_dt and timeout must be positive",
            ));
        }
        if self.horizon == 0 {
            return Err(Error::config("horizon must be >= 1"));
        }
        if self.ego.lane == 0 || self.ego.lane > self.n_lanes {
            return Err(Error::config(format!(
                "ego.lane {} outside 1..={}",
                self.ego.lane, self.n_lanes
            )));
        }
        if self.ego.speed < 0.0 || self.ego.desired_speed <= 0.0 {
            return Err(Error::config("ego speeds must be non-negative"));
        }
        if self.lateral_speed <= 0.0 || self.vehicle_length <= 0.0 {
            return Err(Error::config(
                "lateral_speed and vehicle_length must be positive",
            ));
        }
        for (j, lane) in self.lanes.iter().enumerate() {
            if lane.mean_speed < 0.0 || lane.density < 0.0 {
                return Err(Error::config(format!(
                    "lane {}: mean_speed and density must be >= 0",
                    j + 1
                )));
            }
            if lane.density > 0.0 {
                if lane.mean_headway <= self.idm.s0 {
                    return Err(Error::config(format!(
                        "lane {}: mean_headway {} must exceed the IDM minimum gap {}",
                        j + 1,
                        lane.mean_headway,
                        self.idm.s0
                    )));
                }
                // Density and headway describe the same spacing; they must
                // agree to within 20% once vehicle length is accounted for.
                let implied_spacing = 100.0 / lane.density;
                let configured_spacing = lane.mean_headway + self.vehicle_length;
                if (configured_spacing - implied_spacing).abs() > 0.2 * implied_spacing {
                    return Err(Error::config(format!(
                        "lane {}: density {} veh/100m implies spacing {:.1} m but mean_headway + vehicle_length is {:.1} m (>20% apart)",
                        j + 1,
                        lane.density,
                        implied_spacing,
                        configured_spacing
                    )));
                }
            }
        }
        for (i, veh) in self.vehicles.iter().enumerate() {
            if veh.lane == 0 || veh.lane > self.n_lanes {
                return Err(Error::config(format!(
                    "vehicles[{i}]: lane {} outside 1..={}",
                    veh.lane, self.n_lanes
                )));
            }
            if veh.v < 0.0 {
                return Err(Error::config(format!("vehicles[{i}]: negative speed")));
            }
        }
        self.idm.validate()?;
        self.mobil.validate()?;
        self.weights.validate()?;
        Ok(())
    }

    /// Loads and validates a scenario file, with line-level diagnostics on
    /// parse errors.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let cfg: ScenarioConfig = serde_json::from_str(&text).map_err(|e| {
            Error::config(format!(
                "{}: line {}, column {}: {}",
                path.display(),
                e.line(),
                e.column(),
                e
            ))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }
}
