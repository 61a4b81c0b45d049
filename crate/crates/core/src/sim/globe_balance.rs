//! Planar robot balancing on top of a rolling ball.
//!
//! Cart-pole form: the ball plays the cart, the robot is a rod of half-length
//! `HALF_LENGTH` pinned at the ball's top. The episode terminates when the
//! robot tilts past `FALL_ANGLE`.

use rand::Rng as _;

use super::env::Dynamics;
use super::params::{GridKind, PhysicsAssignment, PhysicsParameterSpec, ValidRange};
use crate::seed::Rng;

pub const GRAVITY: f64 = 9.81;
pub const ROBOT_MASS: f64 = 0.5;
pub const MIN_MASS: f64 = 0.05;
pub const HALF_LENGTH: f64 = 0.5;
pub const MAX_FORCE: f64 = 10.0;
pub const FALL_ANGLE: f64 = 0.4;
pub const ARENA: f64 = 2.4;
pub const INIT_TILT: f64 = 0.05;

pub const OBS_DIM: usize = 5;

/// `foot_ball_dist` is the horizontal offset of the robot's top from the
/// ball contact point; `pz_target` is the upright height and is constant.
pub const FEATURES: &[&str] = &[
    "pz",
    "pz_target",
    "foot_ball_dist",
    "theta",
    "theta_rate",
    "ball_x",
    "ball_vx",
    "act",
    "act_abs",
    "act_diff_l1",
    "torque",
    "torque_sq_sum",
];

pub fn param_specs() -> Vec<PhysicsParameterSpec> {
    use GridKind::*;
    vec![
        PhysicsParameterSpec::new("robot_payload_mass", 0.0, ValidRange::unbounded(), CenteredZero, "kg"),
        PhysicsParameterSpec::new("robot_motor_strength", 1.0, ValidRange::non_negative(), CenteredOne, "x"),
        PhysicsParameterSpec::new("ball_mass", 1.0, ValidRange::non_negative(), ZeroToInf, "kg"),
        PhysicsParameterSpec::new("ball_drag", 0.1, ValidRange::non_negative(), ZeroToInf, "N*s/m"),
        PhysicsParameterSpec::new("ball_restitution", 0.5, ValidRange::unit(), ZeroToOne, ""),
        PhysicsParameterSpec::new("gravity_offset", 0.0, ValidRange::unbounded(), CenteredZero, "m/s^2"),
        PhysicsParameterSpec::new("robot_push_velocity", 0.0, ValidRange::non_negative(), ZeroToInf, "rad/s"),
    ]
}

#[derive(Debug, Clone)]
pub(crate) struct GlobeBalance {
    robot_mass: f64,
    ball_mass: f64,
    motor_strength: f64,
    drag: f64,
    restitution: f64,
    gravity: f64,
    push: f64,
    x: f64,
    vx: f64,
    theta: f64,
    theta_rate: f64,
    prev_a: f64,
}

impl GlobeBalance {
    pub(crate) fn new(a: &PhysicsAssignment) -> Self {
        let g = |n: &str| a.get(n).unwrap_or_else(|| panic!("assignment validated but missing {n}"));
        Self {
            robot_mass: (ROBOT_MASS + g("robot_payload_mass")).max(MIN_MASS),
            ball_mass: g("ball_mass").max(MIN_MASS),
            motor_strength: g("robot_motor_strength"),
            drag: g("ball_drag"),
            restitution: g("ball_restitution"),
            gravity: (GRAVITY + g("gravity_offset")).max(0.0),
            push: g("robot_push_velocity"),
            x: 0.0,
            vx: 0.0,
            theta: 0.0,
            theta_rate: 0.0,
            prev_a: 0.0,
        }
    }
}

impl Dynamics for GlobeBalance {
    fn reset(&mut self, rng: &mut Rng) {
        self.x = 0.0;
        self.vx = 0.0;
        self.theta = rng.random_range(-INIT_TILT..=INIT_TILT);
        self.theta_rate = 0.0;
        self.prev_a = 0.0;
    }

    fn observe(&self, step: usize, horizon: usize, out: &mut [f64]) {
        out[0] = self.x / ARENA;
        out[1] = self.vx;
        out[2] = self.theta;
        out[3] = self.theta_rate;
        out[4] = step as f64 / horizon as f64;
    }

    fn step(&mut self, action: &[f64], force_scale: f64, dt: f64, f: &mut [f64]) -> bool {
        let a = action[0];
        let force = MAX_FORCE * self.motor_strength * a * force_scale;
        let total = self.robot_mass + self.ball_mass;
        let (s, c) = self.theta.sin_cos();
        let pm_l = self.robot_mass * HALF_LENGTH;
        let temp = (force - self.drag * self.vx + pm_l * self.theta_rate * self.theta_rate * s) / total;
        let theta_acc = (self.gravity * s - c * temp)
            / (HALF_LENGTH * (4.0 / 3.0 - self.robot_mass * c * c / total));
        let x_acc = temp - pm_l * theta_acc * c / total;
        self.vx += dt * x_acc;
        self.x += dt * self.vx;
        self.theta_rate += dt * theta_acc;
        self.theta += dt * self.theta_rate;
        if self.x.abs() > ARENA {
            self.x = ARENA * self.x.signum();
            self.vx = -self.restitution * self.vx;
        }
        let da = a - self.prev_a;
        self.prev_a = a;

        let (s, c) = self.theta.sin_cos();
        f[0] = 2.0 * HALF_LENGTH * c;
        f[1] = 2.0 * HALF_LENGTH;
        f[2] = (2.0 * HALF_LENGTH * s).abs();
        f[3] = self.theta;
        f[4] = self.theta_rate;
        f[5] = self.x;
        f[6] = self.vx;
        f[7] = a;
        f[8] = a.abs();
        f[9] = da.abs();
        f[10] = force;
        f[11] = force * force;
        self.theta.abs() > FALL_ANGLE
    }

    fn push_magnitude(&self) -> f64 {
        self.push
    }

    fn apply_push(&mut self, signed: f64) {
        self.theta_rate += signed;
    }
}
