//! Drivability, road-boundary and collision checks for sampled trajectories.
//!
//! Collision checks use the separating axis test on oriented rectangles at
//! every common sample time; no continuous sweep is performed between samples.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::environment::RoadModel;
use crate::trajectory::Trajectory;

const BOUND_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ValidationError {
    #[error("trajectories are sampled on different time grids")]
    MismatchedSampling,
}

/// Vehicle dimensions and drivability limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleParams {
    pub length: f64,
    pub width: f64,
    pub wheelbase: f64,
    /// Front-axle steering limit (rad).
    pub max_steering_angle: f64,
    pub min_turn_radius: f64,
    pub ax_min: f64,
    pub ax_max: f64,
    /// Bound on the lateral (road-frame) acceleration.
    pub a_lat_max: f64,
    /// Largest admissible curvature change per second ((1/m)/s).
    #[serde(default = "default_curvature_rate")]
    pub curvature_rate_max: f64,
}

fn default_curvature_rate() -> f64 {
    0.5
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            length: 4.5,
            width: 1.8,
            wheelbase: 2.7,
            max_steering_angle: 0.5,
            min_turn_radius: 5.5,
            ax_min: -6.0,
            ax_max: 3.0,
            a_lat_max: 6.0,
            curvature_rate_max: default_curvature_rate(),
        }
    }
}

impl VehicleParams {
    /// Checks the sign and positivity constraints, naming the first violated one.
    pub fn check(&self) -> Result<(), String> {
        let positive = [
            ("length", self.length),
            ("width", self.width),
            ("wheelbase", self.wheelbase),
            ("max_steering_angle", self.max_steering_angle),
            ("min_turn_radius", self.min_turn_radius),
            ("a_lat_max", self.a_lat_max),
            ("curvature_rate_max", self.curvature_rate_max),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(format!("{name} must be positive (got {v})"));
            }
        }
        if !(self.ax_min < 0.0 && self.ax_max > 0.0) {
            return Err(format!(
                "ax_min < 0 < ax_max violated (ax_min={}, ax_max={})",
                self.ax_min, self.ax_max
            ));
        }
        Ok(())
    }

    pub fn footprint(&self) -> Footprint {
        Footprint::new(self.length, self.width)
    }
}

/// Flags driving the validation part of the reward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationResult {
    /// Vehicle stays on the drivable area.
    pub valid_state: bool,
    /// Kinematic and dynamic limits hold.
    pub valid_action: bool,
    pub collision: bool,
    /// Earliest sample time at which any flag was violated.
    pub first_violation_time: Option<f64>,
}

impl Default for ValidationResult {
    fn default() -> Self {
        Self::VALID
    }
}

impl ValidationResult {
    pub const VALID: ValidationResult = ValidationResult {
        valid_state: true,
        valid_action: true,
        collision: false,
        first_violation_time: None,
    };

    pub fn is_valid(&self) -> bool {
        self.valid_state && self.valid_action && !self.collision
    }

    fn note_violation(&mut self, t: f64) {
        self.first_violation_time = Some(match self.first_violation_time {
            Some(prev) => prev.min(t),
            None => t,
        });
    }

    pub fn flag_invalid_state(&mut self, t: f64) {
        self.valid_state = false;
        self.note_violation(t);
    }

    pub fn flag_invalid_action(&mut self, t: f64) {
        self.valid_action = false;
        self.note_violation(t);
    }

    pub fn flag_collision(&mut self, t: f64) {
        self.collision = true;
        self.note_violation(t);
    }

    /// Combines two partial results.
    pub fn merge(mut self, other: &ValidationResult) -> ValidationResult {
        self.valid_state &= other.valid_state;
        self.valid_action &= other.valid_action;
        self.collision |= other.collision;
        if let Some(t) = other.first_violation_time {
            self.note_violation(t);
        }
        self
    }
}

/// Kinematic and dynamic drivability of a trajectory.
pub fn validate_drivability(traj: &Trajectory, p: &VehicleParams) -> ValidationResult {
    let max_curvature = 1.0 / p.min_turn_radius;
    let violates = |k: usize| -> bool {
        let pt = &traj.points[k];
        let kappa = pt.curvature;
        if kappa.abs() > max_curvature + BOUND_TOL {
            return true;
        }
        if (p.wheelbase * kappa).atan().abs() > p.max_steering_angle + BOUND_TOL {
            return true;
        }
        let ax = pt.state.ax;
        if ax < p.ax_min - BOUND_TOL || ax > p.ax_max + BOUND_TOL {
            return true;
        }
        if pt.state.ay.abs() > p.a_lat_max + BOUND_TOL {
            return true;
        }
        if k > 0 {
            let prev = &traj.points[k - 1];
            let rate_bound = p.curvature_rate_max * (pt.t - prev.t);
            if (kappa - prev.curvature).abs() > rate_bound + BOUND_TOL {
                return true;
            }
        }
        false
    };

    let mut result = ValidationResult::VALID;
    if let Some(k) = (0..traj.points.len()).find(|&k| violates(k)) {
        result.flag_invalid_action(traj.points[k].t);
    }
    result
}

/// Planar pose of a rectangle centre.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self { x, y, heading }
    }
}

/// Rectangle half extents with a precomputed bounding radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Footprint {
    pub half_length: f64,
    pub half_width: f64,
    radius: f64,
}

impl Footprint {
    pub fn new(length: f64, width: f64) -> Self {
        let half_length = 0.5 * length;
        let half_width = 0.5 * width;
        Self {
            half_length,
            half_width,
            radius: half_length.hypot(half_width),
        }
    }

    pub fn corners(&self, pose: &Pose) -> [(f64, f64); 4] {
        let (s, c) = pose.heading.sin_cos();
        let (l, w) = (self.half_length, self.half_width);
        [(l, w), (l, -w), (-l, -w), (-l, w)].map(|(u, v)| (pose.x + u * c - v * s, pose.y + u * s + v * c))
    }
}

/// Separating axis test for two oriented rectangles. Touching counts as overlap.
pub fn rectangles_overlap(pa: &Pose, fa: &Footprint, pb: &Pose, fb: &Footprint) -> bool {
    let dx = pb.x - pa.x;
    let dy = pb.y - pa.y;
    let reach = fa.radius + fb.radius;
    if dx * dx + dy * dy > reach * reach {
        return false;
    }
    let (sa, ca) = pa.heading.sin_cos();
    let (sb, cb) = pb.heading.sin_cos();
    let axes = [(ca, sa), (-sa, ca), (cb, sb), (-sb, cb)];
    axes.iter().all(|&(nx, ny)| {
        let ra = fa.half_length * (ca * nx + sa * ny).abs() + fa.half_width * (-sa * nx + ca * ny).abs();
        let rb = fb.half_length * (cb * nx + sb * ny).abs() + fb.half_width * (-sb * nx + cb * ny).abs();
        (dx * nx + dy * ny).abs() <= ra + rb
    })
}

/// Index of the first pose pair that overlaps, if any. Pose slices must share a time grid.
pub fn first_overlap(a: &[Pose], fa: &Footprint, b: &[Pose], fb: &Footprint) -> Option<usize> {
    a.iter()
        .zip(b)
        .position(|(pa, pb)| rectangles_overlap(pa, fa, pb, fb))
}

/// Index of the first pose overlapping a static rectangle.
pub fn first_overlap_static(a: &[Pose], fa: &Footprint, obstacle: &Pose, fo: &Footprint) -> Option<usize> {
    a.iter().position(|pa| rectangles_overlap(pa, fa, obstacle, fo))
}

fn poses(traj: &Trajectory) -> Vec<Pose> {
    traj.points
        .iter()
        .map(|p| Pose::new(p.state.x, p.state.y, p.state.heading))
        .collect()
}

pub fn same_time_grid(a: &Trajectory, b: &Trajectory) -> bool {
    a.points.len() == b.points.len()
        && a
            .points
            .iter()
            .zip(&b.points)
            .all(|(p, q)| (p.t - q.t).abs() <= 1e-9)
}

/// True iff the two vehicles' footprints overlap at a common sample time.
/// Both trajectories must be expressed in the same frame.
pub fn check_collision(
    traj_a: &Trajectory,
    traj_b: &Trajectory,
    pa: &VehicleParams,
    pb: &VehicleParams,
) -> Result<bool, ValidationError> {
    if !same_time_grid(traj_a, traj_b) {
        return Err(ValidationError::MismatchedSampling);
    }
    Ok(first_overlap(&poses(traj_a), &pa.footprint(), &poses(traj_b), &pb.footprint()).is_some())
}

/// True iff the footprint stays inside the lateral road corridor at every sample.
/// The boundary itself belongs to the corridor.
pub fn check_on_road(traj: &Trajectory, road: &RoadModel, p: &VehicleParams) -> bool {
    first_off_road(traj, road, p).is_none()
}

/// Time of the first sample whose footprint leaves the corridor.
pub fn first_off_road(traj: &Trajectory, road: &RoadModel, p: &VehicleParams) -> Option<f64> {
    let fp = p.footprint();
    let top = road.width();
    traj.points.iter().find_map(|pt| {
        let pose = Pose::new(pt.state.x, pt.state.y, pt.state.heading);
        let (s, c) = pose.heading.sin_cos();
        let reach = fp.half_length * s.abs() + fp.half_width * c.abs();
        let inside = pose.y - reach >= -BOUND_TOL && pose.y + reach <= top + BOUND_TOL;
        (!inside).then_some(pt.t)
    })
}
