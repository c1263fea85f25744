//! Pluggable prediction of other vehicles' future positions, plus the
//! per-vehicle Bayesian acceleration belief behind the entropy risk term.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

/// One observation of a vehicle in the projected frame.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Observation {
    pub t: f64,
    /// Longitudinal position, meters.
    pub x: f64,
    /// Lateral position, meters from the leftmost lane center.
    pub lat: f64,
    pub v: f64,
    pub heading: f64,
    pub accel: f64,
}

/// Ring of the last `capacity` observations of one vehicle, oldest first.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryHistory {
    ring: VecDeque<Observation>,
    capacity: usize,
}

impl TrajectoryHistory {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1);
        TrajectoryHistory {
            ring: VecDeque::with_capacity(capacity),
            capacity,
        }
    }

    pub fn with_observation(obs: Observation) -> Self {
        let mut h = TrajectoryHistory::new(16);
        h.push(obs);
        h
    }

    /// Appends an observation. Timestamps must strictly increase.
    pub fn push(&mut self, obs: Observation) {
        if let Some(last) = self.ring.back() {
            assert!(obs.t > last.t, "history timestamps must strictly increase");
        }
        if self.ring.len() == self.capacity {
            self.ring.pop_front();
        }
        self.ring.push_back(obs);
    }

    pub fn latest(&self) -> Option<&Observation> {
        self.ring.back()
    }

    pub fn len(&self) -> usize {
        self.ring.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ring.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Observation> {
        self.ring.iter()
    }
}

/// A prediction module: maps an observation history and a look-ahead time
/// to a position in the projected frame. `predict(h, 0)` must return the
/// last observed position exactly.
pub trait PredictionModel: Sync {
    fn predict(&self, history: &TrajectoryHistory, t_n: f64) -> [f64; 2];
}

/// Straight-line extrapolation of the last observation.
#[derive(Debug, Clone, Copy, Default)]
pub struct ConstantVelocity;

impl PredictionModel for ConstantVelocity {
    fn predict(&self, history: &TrajectoryHistory, t_n: f64) -> [f64; 2] {
        let obs = history
            .latest()
            .expect("predict: history has no observations");
        predict_constant_velocity(obs, t_n)
    }
}

/// Constant-velocity extrapolation of one observation, `t_n` seconds ahead.
pub fn predict_constant_velocity(obs: &Observation, t_n: f64) -> [f64; 2] {
    assert!(t_n >= 0.0, "predict: negative look-ahead time");
    [
        obs.x + obs.v * obs.heading.cos() * t_n,
        obs.lat + obs.v * obs.heading.sin() * t_n,
    ]
}

/// Default acceleration bins, m/s^2: hard brake, brake, light brake,
/// coast, light accelerate, accelerate, hard accelerate.
pub const DEFAULT_ACCEL_BIN_EDGES: [f64; 6] = [-3.0, -1.5, -0.5, 0.5, 1.5, 3.0];

/// Dirichlet-multinomial belief over a vehicle's acceleration, binned.
/// `inner_edges` holds the K-1 finite edges of K bins; the end bins are
/// open. Counts start at the symmetric prior so entropy is defined before
/// any observation arrives.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AccelerationBelief {
    inner_edges: Vec<f64>,
    counts: Vec<f64>,
}

impl Default for AccelerationBelief {
    fn default() -> Self {
        AccelerationBelief::new(&DEFAULT_ACCEL_BIN_EDGES, 1.0)
    }
}

impl AccelerationBelief {
    pub fn new(inner_edges: &[f64], prior_count: f64) -> Self {
        assert!(prior_count > 0.0);
        assert!(inner_edges.windows(2).all(|w| w[0] < w[1]));
        AccelerationBelief {
            inner_edges: inner_edges.to_vec(),
            counts: vec![prior_count; inner_edges.len() + 1],
        }
    }

    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    fn bin_of(&self, accel: f64) -> usize {
        self.inner_edges.partition_point(|&e| e <= accel)
    }

    /// Conjugate update: increments the pseudo-count of the bin containing
    /// the observation. Out-of-range accelerations fall in the open end bins.
    pub fn update(&mut self, observed_accel: f64) {
        assert!(observed_accel.is_finite());
        let k = self.bin_of(observed_accel);
        self.counts[k] += 1.0;
    }

    /// Shannon entropy of the posterior mean distribution, nats.
    pub fn entropy(&self) -> f64 {
        let total: f64 = self.counts.iter().sum();
        self.counts
            .iter()
            .filter(|&&c| c > 0.0)
            .map(|&c| {
                let p = c / total;
                -p * p.ln()
            })
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    fn obs(x: f64, lat: f64, v: f64, heading: f64) -> Observation {
        Observation {
            t: 0.0,
            x,
            lat,
            v,
            heading,
            accel: 0.0,
        }
    }

    #[test]
    fn constant_velocity_straight() {
        let p = predict_constant_velocity(&obs(0.0, 0.0, 5.0, 0.0), 2.0);
        assert_relative_eq!(p[0], 10.0);
        assert_relative_eq!(p[1], 0.0);
    }

    #[test]
    fn zero_lookahead_is_identity() {
        let o = obs(3.0, 1.2, 7.0, 0.4);
        let p = predict_constant_velocity(&o, 0.0);
        assert_relative_eq!(p[0], 3.0);
        assert_relative_eq!(p[1], 1.2);
    }

    #[test]
    fn pure_lateral_drift() {
        let p = predict_constant_velocity(&obs(0.0, 0.0, 2.0, FRAC_PI_2), 3.0);
        assert_relative_eq!(p[0], 0.0, epsilon = 1e-12);
        assert_relative_eq!(p[1], 6.0, epsilon = 1e-12);
    }

    #[test]
    #[should_panic]
    fn negative_lookahead_rejected() {
        predict_constant_velocity(&obs(0.0, 0.0, 2.0, 0.0), -0.1);
    }

    #[test]
    fn displacement_equals_speed_times_time() {
        let o = obs(1.0, 2.0, 4.0, 0.9);
        let p = predict_constant_velocity(&o, 2.5);
        let disp = (p[0] - o.x).hypot(p[1] - o.lat);
        assert_relative_eq!(disp, 10.0, epsilon = 1e-12);
    }

    #[test]
    fn belief_update_increments_one_bin() {
        let mut b = AccelerationBelief::new(&[-1.0, 1.0], 1.0);
        b.update(0.0);
        assert_eq!(b.counts(), &[1.0, 2.0, 1.0]);
    }

    #[test]
    fn open_end_bins_catch_outliers() {
        let mut b = AccelerationBelief::default();
        b.update(-100.0);
        b.update(100.0);
        assert_relative_eq!(b.counts()[0], 2.0);
        assert_relative_eq!(b.counts()[6], 2.0);
    }

    #[test]
    fn repeated_observation_drives_entropy_down() {
        let mut b = AccelerationBelief::default();
        let mut prev = b.entropy();
        for _ in 0..200 {
            b.update(0.0);
            let h = b.entropy();
            assert!(h < prev);
            prev = h;
        }
        assert!(prev < 0.2);
    }

    #[test]
    fn one_observation_per_bin_stays_uniform() {
        let mut b = AccelerationBelief::default();
        for a in [-4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0] {
            b.update(a);
        }
        let h = b.entropy();
        assert_relative_eq!(h, 7.0_f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn uniform_entropy_values() {
        let b = AccelerationBelief::default();
        assert_relative_eq!(b.entropy(), 7.0_f64.ln(), epsilon = 1e-12);
        let two = AccelerationBelief::new(&[0.0], 2.0);
        assert_relative_eq!(two.entropy(), 2.0_f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn near_deterministic_entropy_near_zero() {
        let mut b = AccelerationBelief::new(&[-1.0, 1.0], 1e-6);
        for _ in 0..1000 {
            b.update(0.0);
        }
        assert!(b.entropy() < 1e-3);
    }

    #[test]
    fn history_ring_caps_capacity() {
        let mut h = TrajectoryHistory::new(3);
        for i in 0..5 {
            h.push(Observation {
                t: i as f64,
                ..obs(i as f64, 0.0, 1.0, 0.0)
            });
        }
        assert_eq!(h.len(), 3);
        assert_relative_eq!(h.latest().unwrap().t, 4.0);
        assert_relative_eq!(h.iter().next().unwrap().t, 2.0);
    }

    #[test]
    #[should_panic]
    fn history_rejects_non_increasing_time() {
        let mut h = TrajectoryHistory::new(3);
        h.push(obs(0.0, 0.0, 1.0, 0.0));
        h.push(obs(1.0, 0.0, 1.0, 0.0));
    }
}
