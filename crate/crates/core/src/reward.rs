//! Immediate and cooperative rewards.
//!
//! Every component is a cost (non-positive). The cooperative reward of an
//! agent adds the other agents' rewards scaled by its cooperation factor.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::environment::RoadModel;
use crate::trajectory::{Trajectory, VehicleState};
use crate::validation::ValidationResult;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RewardError {
    #[error("lateral position {0} is outside the road")]
    OffRoadState(f64),
    #[error("agent index {index} out of range for {len} agents")]
    IndexOutOfRange { index: usize, len: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights {
    pub w_v: f64,
    pub w_lane: f64,
    pub w_center: f64,
    pub w_ax: f64,
    pub w_ay: f64,
    pub w_lanechange: f64,
    /// Penalties, stored as the (negative) reward they contribute.
    pub r_invalid_state: f64,
    pub r_invalid_action: f64,
    pub r_collision: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            w_v: 1.0,
            w_lane: 5.0,
            w_center: 0.5,
            w_ax: 0.2,
            w_ay: 0.2,
            w_lanechange: 1.0,
            r_invalid_state: -500.0,
            r_invalid_action: -200.0,
            r_collision: -1000.0,
        }
    }
}

impl RewardWeights {
    pub fn check(&self) -> Result<(), String> {
        let weights = [
            ("w_v", self.w_v),
            ("w_lane", self.w_lane),
            ("w_center", self.w_center),
            ("w_ax", self.w_ax),
            ("w_ay", self.w_ay),
            ("w_lanechange", self.w_lanechange),
        ];
        for (name, w) in weights {
            if !(w >= 0.0) {
                return Err(format!("weight {name} must be non-negative (got {w})"));
            }
        }
        let penalties = [
            ("r_invalid_state", self.r_invalid_state),
            ("r_invalid_action", self.r_invalid_action),
            ("r_collision", self.r_collision),
        ];
        for (name, r) in penalties {
            if !(r <= 0.0) {
                return Err(format!("penalty {name} must be non-positive (got {r})"));
            }
        }
        Ok(())
    }
}

/// Desired longitudinal speed and lane of an agent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesiredState {
    pub v_des: f64,
    pub k_des: usize,
}

/// Reward components of one agent for one step.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub state: f64,
    pub action: f64,
    pub validation: f64,
}

impl RewardBreakdown {
    pub fn total(&self) -> f64 {
        immediate_reward(self.state, self.action, self.validation)
    }
}

/// Penalizes deviation from the desired speed, lane, and lane centre line.
pub fn state_reward(
    s: &VehicleState,
    d: &DesiredState,
    road: &RoadModel,
    w: &RewardWeights,
) -> Result<f64, RewardError> {
    let lane = road.lane_index(s.y).map_err(|_| RewardError::OffRoadState(s.y))?;
    Ok(state_reward_in_lane(s, lane, d, road, w))
}

/// Same as [`state_reward`] but with the lane clamped onto the road, for
/// states that already carry an invalid-state penalty.
pub fn state_reward_clamped(s: &VehicleState, d: &DesiredState, road: &RoadModel, w: &RewardWeights) -> f64 {
    state_reward_in_lane(s, road.lane_index_clamped(s.y), d, road, w)
}

fn state_reward_in_lane(s: &VehicleState, lane: usize, d: &DesiredState, road: &RoadModel, w: &RewardWeights) -> f64 {
    let lane_dev = lane.abs_diff(d.k_des) as f64;
    let center_dev = (s.y - road.lane_center(lane)).abs();
    -(w.w_v * (s.vx - d.v_des).abs() + w.w_lane * lane_dev + w.w_center * center_dev)
}

/// Acceleration effort plus an optional lane-change cost.
pub fn action_cost(traj: &Trajectory, lane_changed: bool, w: &RewardWeights) -> f64 {
    let q = &traj.quintics;
    let ax = q.x.squared_acceleration_integral(q.duration);
    let ay = q.y.squared_acceleration_integral(q.duration);
    let change = if lane_changed { w.w_lanechange } else { 0.0 };
    -(w.w_ax * ax + w.w_ay * ay + change)
}

pub fn validation_reward(vr: &ValidationResult, w: &RewardWeights) -> f64 {
    let mut r = 0.0;
    if !vr.valid_state {
        r += w.r_invalid_state;
    }
    if !vr.valid_action {
        r += w.r_invalid_action;
    }
    if vr.collision {
        r += w.r_collision;
    }
    r
}

pub fn immediate_reward(state_r: f64, action_r: f64, validation_r: f64) -> f64 {
    state_r + action_r + validation_r
}

/// `rewards[i] + λ · Σ_{j≠i} rewards[j]`.
pub fn cooperative_reward(rewards: &[f64], i: usize, lambda: f64) -> Result<f64, RewardError> {
    let own = *rewards.get(i).ok_or(RewardError::IndexOutOfRange {
        index: i,
        len: rewards.len(),
    })?;
    let others: f64 = rewards
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, r)| r)
        .sum();
    Ok(own + lambda * others)
}
