//! Road geometry, lane arithmetic, and the deterministic joint step.
//!
//! Each agent plans in its own frame, in which it always drives towards
//! positive `x`. Agents driving against the world direction use a frame
//! rotated by half a turn, so their notion of left and right matches that of
//! the driver. Collisions are evaluated after mapping every pose into the
//! world frame.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trajectory::{Trajectory, VehicleState};
use crate::validation::{
    first_off_road, first_overlap, first_overlap_static, same_time_grid, validate_drivability, Footprint, Pose,
    ValidationResult, VehicleParams,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("lateral position {y} lies outside the road [0, {width}]")]
    OffRoad { y: f64, width: f64 },
    #[error("trajectories are sampled on different time grids")]
    MismatchedSampling,
    #[error("expected {expected} trajectories, got {got}")]
    AgentCountMismatch { expected: usize, got: usize },
}

/// Straight multi-lane road. Lane 0 is centred at `y = lane_width / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoadModel {
    pub lane_count: usize,
    pub lane_width: f64,
    pub length: f64,
}

impl RoadModel {
    pub fn width(&self) -> f64 {
        self.lane_count as f64 * self.lane_width
    }

    /// Lane containing `y`; lanes are half-open `[k·w, (k+1)·w)` except the last.
    pub fn lane_index(&self, y: f64) -> Result<usize, EnvError> {
        if !(y >= 0.0 && y <= self.width()) {
            return Err(EnvError::OffRoad { y, width: self.width() });
        }
        Ok(self.lane_index_clamped(y))
    }

    pub fn lane_index_clamped(&self, y: f64) -> usize {
        let k = (y / self.lane_width).floor();
        if k <= 0.0 {
            0
        } else {
            (k as usize).min(self.lane_count - 1)
        }
    }

    pub fn lane_center(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * self.lane_width
    }

    pub fn check(&self) -> Result<(), String> {
        if self.lane_count < 1 {
            return Err("road.lane_count must be at least 1".into());
        }
        if !(self.lane_width > 0.0) {
            return Err(format!("road.lane_width must be positive (got {})", self.lane_width));
        }
        if !(self.length > 0.0) {
            return Err(format!("road.length must be positive (got {})", self.length));
        }
        Ok(())
    }
}

/// Travel direction of an agent relative to the world `x` axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    #[default]
    Forward,
    Reverse,
}

impl Direction {
    /// Maps a pose from the agent frame into the world frame.
    pub fn to_world(self, road: &RoadModel, x: f64, y: f64, heading: f64) -> Pose {
        match self {
            Direction::Forward => Pose::new(x, y, heading),
            Direction::Reverse => Pose::new(road.length - x, road.width() - y, heading + PI),
        }
    }

    /// Maps a world pose into the agent frame. The mapping is an involution.
    pub fn from_world(self, road: &RoadModel, pose: Pose) -> Pose {
        match self {
            Direction::Forward => pose,
            Direction::Reverse => Pose::new(road.length - pose.x, road.width() - pose.y, pose.heading - PI),
        }
    }
}

/// A parked vehicle or other static rectangle, in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub x: f64,
    pub y: f64,
    pub length: f64,
    pub width: f64,
    #[serde(default)]
    pub heading: f64,
}

impl Obstacle {
    pub fn pose(&self) -> Pose {
        Pose::new(self.x, self.y, self.heading)
    }

    pub fn footprint(&self) -> Footprint {
        Footprint::new(self.length, self.width)
    }
}

/// Geometric body of an agent as seen by the joint step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentBody {
    pub params: VehicleParams,
    pub direction: Direction,
}

/// Everything the joint step needs besides the trajectories themselves.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub road: RoadModel,
    pub obstacles: Vec<Obstacle>,
    pub bodies: Vec<AgentBody>,
}

/// A collision found during a step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Contact {
    Agents { a: usize, b: usize, t: f64 },
    Obstacle { agent: usize, obstacle: usize, t: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    /// Terminal state of each agent's trajectory, in the agent's frame.
    pub next: Vec<VehicleState>,
    pub validation: Vec<ValidationResult>,
    pub contacts: Vec<Contact>,
}

impl Scene {
    /// World-frame poses of an agent along its trajectory.
    pub fn world_poses(&self, agent: usize, traj: &Trajectory) -> Vec<Pose> {
        let dir = self.bodies[agent].direction;
        traj.points
            .iter()
            .map(|p| dir.to_world(&self.road, p.state.x, p.state.y, p.state.heading))
            .collect()
    }
}

/// Checks one agent's trajectory against everything that does not move:
/// drivability, road boundaries and static obstacles.
pub fn validate_static(scene: &Scene, agent: usize, traj: &Trajectory) -> ValidationResult {
    validate_static_poses(scene, agent, traj, &scene.world_poses(agent, traj))
}

/// [`validate_static`] with the world poses of `traj` already computed.
pub fn validate_static_poses(scene: &Scene, agent: usize, traj: &Trajectory, poses: &[Pose]) -> ValidationResult {
    let body = &scene.bodies[agent];
    let mut r = validate_drivability(traj, &body.params);
    if let Some(t) = first_off_road(traj, &scene.road, &body.params) {
        r.flag_invalid_state(t);
    }
    let fp = body.params.footprint();
    for obstacle in &scene.obstacles {
        if let Some(k) = first_overlap_static(poses, &fp, &obstacle.pose(), &obstacle.footprint()) {
            r.flag_collision(traj.points[k].t);
        }
    }
    r
}

/// Advances the joint state along the given trajectories and validates them.
pub fn step(scene: &Scene, trajectories: &[Trajectory]) -> Result<StepOutcome, EnvError> {
    let n = scene.bodies.len();
    if trajectories.len() != n {
        return Err(EnvError::AgentCountMismatch {
            expected: n,
            got: trajectories.len(),
        });
    }
    if trajectories.windows(2).any(|w| !same_time_grid(&w[0], &w[1])) {
        return Err(EnvError::MismatchedSampling);
    }

    let mut validation: Vec<ValidationResult> = trajectories
        .iter()
        .zip(&scene.bodies)
        .map(|(traj, body)| {
            let mut r = validate_drivability(traj, &body.params);
            if let Some(t) = first_off_road(traj, &scene.road, &body.params) {
                r.flag_invalid_state(t);
            }
            r
        })
        .collect();

    let poses: Vec<Vec<Pose>> = trajectories
        .iter()
        .enumerate()
        .map(|(i, traj)| scene.world_poses(i, traj))
        .collect();
    let footprints: Vec<Footprint> = scene.bodies.iter().map(|b| b.params.footprint()).collect();
    let times = &trajectories.first().map(|t| t.points.as_slice()).unwrap_or(&[]);

    let mut contacts = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if let Some(k) = first_overlap(&poses[a], &footprints[a], &poses[b], &footprints[b]) {
                let t = times[k].t;
                validation[a].flag_collision(t);
                validation[b].flag_collision(t);
                contacts.push(Contact::Agents { a, b, t });
            }
        }
        for (o, obstacle) in scene.obstacles.iter().enumerate() {
            if let Some(k) = first_overlap_static(&poses[a], &footprints[a], &obstacle.pose(), &obstacle.footprint()) {
                let t = times[k].t;
                validation[a].flag_collision(t);
                contacts.push(Contact::Obstacle { agent: a, obstacle: o, t });
            }
        }
    }

    Ok(StepOutcome {
        next: trajectories.iter().map(Trajectory::terminal_state).collect(),
        validation,
        contacts,
    })
}
