//! Baseline lane policies: MOBIL and a lane-keeping no-op.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{project_scene, ProjectedScene, WorldState};
use crate::selector::{LanePolicy, PolicyDecision};
use crate::sim::{idm_accel, IdmParams};

/// MOBIL lane-change model parameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct MobilParams {
    /// Politeness factor p.
    pub politeness: f64,
    /// Changing threshold delta a_th, m/s^2.
    pub accel_threshold: f64,
    /// Maximum safe deceleration imposed on the new follower, m/s^2.
    pub safe_decel: f64,
}

impl Default for MobilParams {
    fn default() -> Self {
        MobilParams {
            politeness: 0.5,
            accel_threshold: 0.1,
            safe_decel: 4.0,
        }
    }
}

impl MobilParams {
    pub fn validate(&self) -> Result<()> {
        if self.politeness < 0.0 || self.accel_threshold < 0.0 || self.safe_decel <= 0.0 {
            return Err(Error::config(
                "mobil politeness/accel_threshold must be >= 0 and safe_decel > 0",
            ));
        }
        Ok(())
    }
}

/// `(v, bumper gap)` of the nearest vehicle ahead of / behind `x` in `lane`.
/// Lane membership is by nearest-center snap of the vehicle's lateral
/// position, matching the simulator's view.
fn neighbors(
    scene: &ProjectedScene,
    lane: usize,
    x: f64,
    vehicle_length: f64,
) -> (Option<(f64, f64)>, Option<(f64, f64)>) {
    let mut front: Option<(f64, f64)> = None;
    let mut back: Option<(f64, f64)> = None;
    for veh in &scene.others {
        if crate::frame::nearest_lane_of_index(veh.y_lanes, scene.lane_count) != lane {
            continue;
        }
        if veh.x > x {
            let gap = veh.x - x - vehicle_length;
            if front.is_none_or(|(_, g)| gap < g) {
                front = Some((veh.v, gap));
            }
        } else if veh.x < x {
            let gap = x - veh.x - vehicle_length;
            if back.is_none_or(|(_, g)| gap < g) {
                back = Some((veh.v, gap));
            }
        }
    }
    (front, back)
}

/// One MOBIL evaluation: returns the lane to target from this snapshot
/// (the current lane when no candidate passes safety and incentive).
pub fn mobil_decide(
    scene: &ProjectedScene,
    idm: &IdmParams,
    mobil: &MobilParams,
    vehicle_length: f64,
) -> usize {
    let lane = scene.ego_lane_index;
    let v = scene.ego_speed;
    let x = 0.0; // neighbors are measured relative to the ego

    let (cur_front, cur_back) = neighbors(scene, lane, x, vehicle_length);
    let a_old = idm_accel(v, cur_front, idm);

    let mut best: Option<(f64, usize)> = None;
    for cand in [lane.wrapping_sub(1), lane + 1] {
        if cand < 1 || cand > scene.lane_count {
            continue;
        }
        let (new_front, new_back) = neighbors(scene, cand, x, vehicle_length);
        // The ego must physically fit between its new neighbors.
        if new_front.is_some_and(|(_, g)| g <= 0.0) || new_back.is_some_and(|(_, g)| g <= 0.0) {
            continue;
        }
        // Safety: the new follower must not brake harder than b_safe.
        let follower_delta = match new_back {
            None => 0.0,
            Some((fv, fgap)) => {
                let after = idm_accel(fv, Some((v, fgap)), idm);
                if after < -mobil.safe_decel {
                    continue;
                }
                // Its current leader is whatever the ego sees in front of
                // that lane (the follower is behind both).
                let before = idm_accel(
                    fv,
                    new_front.map(|(lv, lgap)| (lv, lgap + fgap + vehicle_length)),
                    idm,
                );
                after - before
            }
        };
        let a_new = idm_accel(v, new_front, idm);
        let old_follower_delta = match cur_back {
            None => 0.0,
            Some((fv, fgap)) => {
                let before = idm_accel(fv, Some((v, fgap)), idm);
                let after = idm_accel(
                    fv,
                    cur_front.map(|(lv, lgap)| (lv, lgap + fgap + vehicle_length)),
                    idm,
                );
                after - before
            }
        };
        let incentive = a_new - a_old + mobil.politeness * (follower_delta + old_follower_delta);
        if incentive <= mobil.accel_threshold {
            continue;
        }
        // Strictly larger incentive wins; on a tie the left lane (already
        // visited first) is kept.
        if best.is_none_or(|(inc, _)| incentive > inc) {
            best = Some((incentive, cand));
        }
    }
    best.map_or(lane, |(_, cand)| cand)
}

/// MOBIL as a simulator policy. A committed change is held until the ego
/// reaches the target lane center, so the maneuver cannot be abandoned
/// halfway between lanes.
pub struct MobilPolicy {
    idm: IdmParams,
    mobil: MobilParams,
    vehicle_length: f64,
    target: Option<usize>,
}

impl MobilPolicy {
    pub fn new(idm: IdmParams, mobil: MobilParams, vehicle_length: f64) -> Self {
        MobilPolicy {
            idm,
            mobil,
            vehicle_length,
            target: None,
        }
    }
}

impl LanePolicy for MobilPolicy {
    fn name(&self) -> &'static str {
        "mobil"
    }

    fn decide(&mut self, world: &WorldState) -> Result<PolicyDecision> {
        let started = Instant::now();
        let scene = project_scene(world, None)?;
        let lat_lanes = scene.ego_lat / scene.lane_width + 1.0;
        if let Some(target) = self.target {
            if (lat_lanes - target as f64).abs() > 0.05 {
                return Ok(PolicyDecision {
                    target_lane: target,
                    plan_seconds: started.elapsed().as_secs_f64(),
                });
            }
            self.target = None;
        }
        let target = mobil_decide(&scene, &self.idm, &self.mobil, self.vehicle_length);
        if target != scene.ego_lane_index {
            self.target = Some(target);
        }
        Ok(PolicyDecision {
            target_lane: target,
            plan_seconds: started.elapsed().as_secs_f64(),
        })
    }
}

/// Keeps the spawn lane forever.
pub struct NoChangePolicy;

impl LanePolicy for NoChangePolicy {
    fn name(&self) -> &'static str {
        "nochange"
    }

    fn decide(&mut self, world: &WorldState) -> Result<PolicyDecision> {
        let started = Instant::now();
        let scene = project_scene(world, None)?;
        Ok(PolicyDecision {
            target_lane: scene.ego_lane_index,
            plan_seconds: started.elapsed().as_secs_f64(),
        })
    }
}
