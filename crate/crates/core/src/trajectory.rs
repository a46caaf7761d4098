//! Jerk-minimal trajectories generated from continuous `(dv, dy)` actions.
//!
//! An action fixes three free terminal conditions of a pair of quintic
//! polynomials (one per axis). The remaining terminal conditions are
//! `ẍ(t1) = 0`, `ẏ(t1) = 0`, `ÿ(t1) = 0`, and the longitudinal end position
//! is the one covered at the mean of the initial and terminal speed.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Below this speed heading and curvature are treated as degenerate.
pub const EPS_SPEED: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrajectoryError {
    #[error("duration must be positive, got {0}")]
    NonPositiveDuration(f64),
    #[error("sample step must be positive and not exceed the duration, got dt={dt} for T={duration}")]
    InvalidSampleStep { dt: f64, duration: f64 },
    #[error("terminal longitudinal speed {0} is negative")]
    NegativeTerminalSpeed(f64),
}

/// Kinematic state of one vehicle in its own road-aligned frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct VehicleState {
    /// Longitudinal position (m).
    pub x: f64,
    /// Lateral position (m).
    pub y: f64,
    /// Longitudinal velocity (m/s), never negative.
    pub vx: f64,
    /// Lateral velocity (m/s).
    pub vy: f64,
    /// Longitudinal acceleration (m/s²).
    pub ax: f64,
    /// Lateral acceleration (m/s²).
    pub ay: f64,
    /// Orientation (rad).
    pub heading: f64,
}

impl VehicleState {
    /// Straight driving at constant speed.
    pub fn cruising(x: f64, y: f64, vx: f64) -> Self {
        Self {
            x,
            y,
            vx,
            ..Self::default()
        }
    }

    pub fn speed(&self) -> f64 {
        self.vx.hypot(self.vy)
    }
}

/// A continuous action: change of longitudinal velocity and of lateral position.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Action {
    pub dv: f64,
    pub dy: f64,
}

impl Action {
    pub const ZERO: Action = Action { dv: 0.0, dy: 0.0 };

    pub fn new(dv: f64, dy: f64) -> Self {
        Self { dv, dy }
    }
}

/// Axis-aligned box of admissible actions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionBox {
    pub dv_min: f64,
    pub dv_max: f64,
    pub dy_min: f64,
    pub dy_max: f64,
}

impl Default for ActionBox {
    fn default() -> Self {
        Self {
            dv_min: -5.0,
            dv_max: 5.0,
            dy_min: -4.0,
            dy_max: 4.0,
        }
    }
}

impl ActionBox {
    pub fn contains(&self, a: &Action) -> bool {
        a.dv >= self.dv_min && a.dv <= self.dv_max && a.dy >= self.dy_min && a.dy <= self.dy_max
    }

    /// Narrows the box so that no action drives the terminal speed below zero.
    pub fn for_speed(&self, vx: f64) -> ActionBox {
        let dv_min = self.dv_min.max(-vx.max(0.0)).min(self.dv_max);
        ActionBox { dv_min, ..*self }
    }

    pub fn clamp(&self, a: Action) -> Action {
        Action {
            dv: a.dv.clamp(self.dv_min, self.dv_max),
            dy: a.dy.clamp(self.dy_min, self.dy_max),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Action {
        Action {
            dv: uniform(rng, self.dv_min, self.dv_max),
            dy: uniform(rng, self.dy_min, self.dy_max),
        }
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.gen_range(lo..=hi)
    } else {
        lo
    }
}

/// Degree-5 polynomial `c0 + c1 t + … + c5 t⁵`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Quintic {
    pub c: [f64; 6],
}

impl Quintic {
    pub fn position(&self, t: f64) -> f64 {
        let c = &self.c;
        c[0] + t * (c[1] + t * (c[2] + t * (c[3] + t * (c[4] + t * c[5]))))
    }

    pub fn velocity(&self, t: f64) -> f64 {
        let c = &self.c;
        c[1] + t * (2.0 * c[2] + t * (3.0 * c[3] + t * (4.0 * c[4] + t * 5.0 * c[5])))
    }

    pub fn acceleration(&self, t: f64) -> f64 {
        let c = &self.c;
        2.0 * c[2] + t * (6.0 * c[3] + t * (12.0 * c[4] + t * 20.0 * c[5]))
    }

    pub fn jerk(&self, t: f64) -> f64 {
        let c = &self.c;
        6.0 * c[3] + t * (24.0 * c[4] + t * 60.0 * c[5])
    }

    /// Closed-form `∫₀ᵀ (p''(t))² dt`.
    pub fn squared_acceleration_integral(&self, duration: f64) -> f64 {
        let c = &self.c;
        let a = [2.0 * c[2], 6.0 * c[3], 12.0 * c[4], 20.0 * c[5]];
        let mut total = 0.0;
        for (i, ai) in a.iter().enumerate() {
            for (j, aj) in a.iter().enumerate() {
                let p = (i + j + 1) as i32;
                total += ai * aj * duration.powi(p) / p as f64;
            }
        }
        total
    }
}

/// Solves the quintic through the given boundary states at `t = 0` and `t = duration`.
pub fn solve_quintic(
    p0: f64,
    v0: f64,
    a0: f64,
    p1: f64,
    v1: f64,
    a1: f64,
    duration: f64,
) -> Result<Quintic, TrajectoryError> {
    if !(duration > 0.0) {
        return Err(TrajectoryError::NonPositiveDuration(duration));
    }
    let t = duration;
    // Residual boundary offsets after the known low-order terms.
    let h = p1 - p0 - v0 * t - 0.5 * a0 * t * t;
    let dv = v1 - v0 - a0 * t;
    let da = a1 - a0;
    let t2 = t * t;
    let t3 = t2 * t;
    let c3 = (10.0 * h - 4.0 * dv * t + 0.5 * da * t2) / t3;
    let c4 = (-15.0 * h + 7.0 * dv * t - da * t2) / (t3 * t);
    let c5 = (6.0 * h - 3.0 * dv * t + 0.5 * da * t2) / (t3 * t2);
    Ok(Quintic {
        c: [p0, v0, 0.5 * a0, c3, c4, c5],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuinticPair {
    pub x: Quintic,
    pub y: Quintic,
    pub duration: f64,
}

impl QuinticPair {
    pub fn state_at(&self, t: f64) -> VehicleState {
        VehicleState {
            x: self.x.position(t),
            y: self.y.position(t),
            vx: self.x.velocity(t),
            vy: self.y.velocity(t),
            ax: self.x.acceleration(t),
            ay: self.y.acceleration(t),
            heading: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    /// Offset from the trajectory start (s).
    pub t: f64,
    pub state: VehicleState,
    /// Signed path curvature (1/m); zero below [`EPS_SPEED`].
    pub curvature: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
    pub source_action: Action,
    pub quintics: QuinticPair,
}

impl Trajectory {
    pub fn duration(&self) -> f64 {
        self.quintics.duration
    }

    pub fn first(&self) -> &TrajectoryPoint {
        &self.points[0]
    }

    pub fn last(&self) -> &TrajectoryPoint {
        self.points.last().expect("trajectory has at least two points")
    }

    /// The state reached at the end of the action.
    pub fn terminal_state(&self) -> VehicleState {
        self.last().state
    }
}

/// Path curvature from first and second derivatives.
pub fn curvature_at(vx: f64, vy: f64, ax: f64, ay: f64) -> f64 {
    let speed_sq = vx * vx + vy * vy;
    if speed_sq <= EPS_SPEED * EPS_SPEED {
        return 0.0;
    }
    (vx * ay - vy * ax) / (speed_sq * speed_sq.sqrt())
}

/// Sample times `0, dt, 2dt, …` followed by `duration` itself.
pub fn sample_times(duration: f64, dt: f64) -> Result<Vec<f64>, TrajectoryError> {
    if !(duration > 0.0) {
        return Err(TrajectoryError::NonPositiveDuration(duration));
    }
    if !(dt > 0.0) || dt > duration {
        return Err(TrajectoryError::InvalidSampleStep { dt, duration });
    }
    let tol = 1e-9 * duration;
    let mut times = Vec::with_capacity((duration / dt) as usize + 2);
    let mut k = 0usize;
    loop {
        let t = k as f64 * dt;
        if t >= duration - tol {
            break;
        }
        times.push(t);
        k += 1;
    }
    times.push(duration);
    Ok(times)
}

/// Turns an action into a sampled quintic trajectory starting at `s`.
pub fn action_to_trajectory(
    s: &VehicleState,
    a: Action,
    duration: f64,
    dt: f64,
) -> Result<Trajectory, TrajectoryError> {
    let times = sample_times(duration, dt)?;
    let v1 = s.vx + a.dv;
    if v1 < 0.0 {
        return Err(TrajectoryError::NegativeTerminalSpeed(v1));
    }
    let x1 = s.x + 0.5 * (s.vx + v1) * duration;
    let qx = solve_quintic(s.x, s.vx, s.ax, x1, v1, 0.0, duration)?;
    let qy = solve_quintic(s.y, s.vy, s.ay, s.y + a.dy, 0.0, 0.0, duration)?;
    let quintics = QuinticPair {
        x: qx,
        y: qy,
        duration,
    };

    let mut heading = s.heading;
    let last = times.len() - 1;
    let points = times
        .into_iter()
        .enumerate()
        .map(|(k, t)| {
            let mut state = if k == last {
                VehicleState::cruising(x1, s.y + a.dy, v1)
            } else {
                quintics.state_at(t)
            };
            if state.speed() > EPS_SPEED {
                heading = state.vy.atan2(state.vx);
            }
            state.heading = heading;
            let curvature = curvature_at(state.vx, state.vy, state.ax, state.ay);
            TrajectoryPoint {
                t,
                state,
                curvature,
            }
        })
        .collect();

    Ok(Trajectory {
        points,
        source_action: a,
        quintics,
    })
}
