//! Shared geometric types, frame transforms, and angle arithmetic.
//!
//! Conventions, fixed once here: angles are radians in `(-pi, pi]`, the
//! robot's +x axis points along its heading, and counter-clockwise is
//! positive. Subgoal directions follow the same `(-pi, pi]` convention,
//! with straight ahead at zero.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

/// A 2D point, `[x, y]` in meters.
pub type Point2 = [f64; 2];

/// Normalizes an angle into `(-pi, pi]`.
///
/// The boundary is open at `-pi`: `normalize_angle(-PI)` is `PI`.
///
/// # Panics
/// Panics on non-finite input.
pub fn normalize_angle(a: f64) -> f64 {
    assert!(a.is_finite(), "normalize_angle: non-finite angle {a}");
    let mut r = a.rem_euclid(TAU);
    if r > PI {
        r -= TAU;
    }
    // rem_euclid maps -PI to PI already; r == -PI cannot occur.
    debug_assert!(r > -PI && r <= PI);
    r
}

/// Robot pose in the world frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    /// Heading, normalized to `(-pi, pi]`.
    pub heading: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self {
            x,
            y,
            heading: normalize_angle(heading),
        }
    }

    pub fn position(&self) -> Point2 {
        [self.x, self.y]
    }

    /// Expresses a world-frame point in the robot frame (origin at the robot
    /// position, +x along the heading).
    pub fn to_robot_frame(&self, world_point: Point2) -> Point2 {
        let dx = world_point[0] - self.x;
        let dy = world_point[1] - self.y;
        let (s, c) = self.heading.sin_cos();
        [c * dx + s * dy, -s * dx + c * dy]
    }

    /// Inverse of [`to_robot_frame`](Self::to_robot_frame).
    pub fn to_world_frame(&self, robot_point: Point2) -> Point2 {
        let (s, c) = self.heading.sin_cos();
        [
            self.x + c * robot_point[0] - s * robot_point[1],
            self.y + s * robot_point[0] + c * robot_point[1],
        ]
    }
}

/// Differential-drive control: linear velocity `v` in `[0, 0.5]` m/s and
/// angular velocity `w` in `[-pi/2, pi/2]` rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocityCommand {
    pub v: f64,
    pub w: f64,
}

impl VelocityCommand {
    pub const V_MAX: f64 = 0.5;
    pub const W_MAX: f64 = PI / 2.0;

    pub const STOP: VelocityCommand = VelocityCommand { v: 0.0, w: 0.0 };

    /// Clamps into the command bounds.
    pub fn clamped(v: f64, w: f64) -> Self {
        Self {
            v: v.clamp(0.0, Self::V_MAX),
            w: w.clamp(-Self::W_MAX, Self::W_MAX),
        }
    }

    pub fn in_bounds(&self) -> bool {
        (0.0..=Self::V_MAX).contains(&self.v) && self.w.abs() <= Self::W_MAX
    }
}

/// The subgoal agent's polar action: distance `l` in `[0, 0.6]` m and
/// direction `theta` in `(-pi, pi]`, both robot-centric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Subgoal {
    pub l: f64,
    pub theta: f64,
}

impl Subgoal {
    pub const L_MAX: f64 = 0.6;

    pub fn new(l: f64, theta: f64) -> Self {
        debug_assert!((0.0..=Self::L_MAX).contains(&l), "subgoal l out of range: {l}");
        Self {
            l,
            theta: normalize_angle(theta),
        }
    }

    /// Converts to robot-centric Cartesian coordinates `(p_x, p_y)`.
    pub fn to_cartesian(&self) -> Point2 {
        [self.l * self.theta.cos(), self.l * self.theta.sin()]
    }
}

/// Timing of the two hierarchy levels: the subgoal agent ticks every
/// `dt_subgoal` seconds and the motion agent runs `motion_steps_per_subgoal`
/// times in between at `dt_motion`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentClock {
    pub dt_subgoal: f64,
    pub dt_motion: f64,
    pub motion_steps_per_subgoal: usize,
}

impl Default for AgentClock {
    fn default() -> Self {
        Self {
            dt_subgoal: 0.2,
            dt_motion: 0.05,
            motion_steps_per_subgoal: 4,
        }
    }
}

impl AgentClock {
    /// Checks `dt_subgoal = motion_steps_per_subgoal * dt_motion`.
    pub fn is_consistent(&self) -> bool {
        (self.dt_subgoal - self.motion_steps_per_subgoal as f64 * self.dt_motion).abs() < 1e-12
    }
}

/// Euclidean distance between two points.
pub fn dist(a: Point2, b: Point2) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}
