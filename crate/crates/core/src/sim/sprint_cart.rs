//! 1-D cart that must hold a forward speed of 2 m/s.
//!
//! Longitudinal dynamics with viscous friction, a first-order actuator, a
//! rear bumper, and a sprung body pitch mode excited by acceleration:
//!
//! ```text
//! u     <- u + alpha * (a - u)          alpha = min(ACTUATOR_RATE * g, 1), g = action_latency_gain
//! F      = MAX_FORCE * motor_strength * u * ripple
//! M      = max(BASE_MASS + payload_mass, MIN_MASS)
//! ax     = (F - DRAG * friction * vx) / M - gravity_slope
//! vx    <- vx + dt * ax                  (semi-implicit Euler)
//! x     <- x + dt * vx
//! th_dd  = -PITCH_K * th - PITCH_D * th_d - PITCH_C * ax
//! ```
//!
//! From rest with full action at default latency gain, a single step gives
//! `vx = dt * MAX_FORCE * motor_strength * ACTUATOR_RATE / M`.

use super::env::Dynamics;
use super::params::{GridKind, PhysicsAssignment, PhysicsParameterSpec, ValidRange};
use crate::seed::Rng;

pub const TARGET_VX: f64 = 2.0;
pub const MAX_FORCE: f64 = 8.0;
pub const DRAG: f64 = 1.0;
pub const BASE_MASS: f64 = 1.0;
pub const MIN_MASS: f64 = 0.1;
pub const PITCH_K: f64 = 40.0;
pub const PITCH_D: f64 = 4.0;
pub const PITCH_C: f64 = 0.5;
/// Actuator response per step at unit latency gain.
pub const ACTUATOR_RATE: f64 = 0.2;
pub const BODY_HEIGHT: f64 = 0.3;
pub const PITCH_LIMIT: f64 = 0.15;

pub const OBS_DIM: usize = 5;

/// `wz` is identically zero: the cart cannot yaw. It is kept so rewards
/// written for legged robots still bind.
pub const FEATURES: &[&str] = &[
    "vx",
    "x",
    "ax",
    "pitch",
    "pitch_rate",
    "vz",
    "pz_err",
    "wz",
    "w_norm",
    "w_xy_sq",
    "g_xy_sq",
    "joint_acc_sq",
    "joint_limit_violation",
    "act",
    "act_abs",
    "act_sq",
    "act_diff_l1",
    "act_diff_sq",
    "torque",
    "torque_sq_sum",
];

pub fn param_specs() -> Vec<PhysicsParameterSpec> {
    use GridKind::*;
    vec![
        PhysicsParameterSpec::new("friction", 1.0, ValidRange::non_negative(), ZeroToInf, "N*s/m"),
        PhysicsParameterSpec::new("payload_mass", 0.0, ValidRange::unbounded(), CenteredZero, "kg"),
        PhysicsParameterSpec::new("motor_strength", 1.0, ValidRange::non_negative(), CenteredOne, "x"),
        PhysicsParameterSpec::new("restitution", 0.5, ValidRange::unit(), ZeroToOne, ""),
        PhysicsParameterSpec::new("gravity_slope", 0.0, ValidRange::unbounded(), CenteredZero, "m/s^2"),
        PhysicsParameterSpec::new("push_velocity", 0.0, ValidRange::non_negative(), ZeroToInf, "m/s"),
        PhysicsParameterSpec::new("action_latency_gain", 1.0, ValidRange::non_negative(), CenteredOne, "x"),
    ]
}

#[derive(Debug, Clone)]
pub(crate) struct SprintCart {
    friction: f64,
    mass: f64,
    motor_strength: f64,
    restitution: f64,
    gravity_slope: f64,
    push_velocity: f64,
    alpha: f64,
    x: f64,
    vx: f64,
    pitch: f64,
    pitch_rate: f64,
    u: f64,
}

fn get(a: &PhysicsAssignment, name: &str) -> f64 {
    a.get(name).unwrap_or_else(|| panic!("assignment validated but missing {name}"))
}

impl SprintCart {
    pub(crate) fn new(a: &PhysicsAssignment) -> Self {
        let gain = get(a, "action_latency_gain");
        Self {
            friction: get(a, "friction"),
            mass: (BASE_MASS + get(a, "payload_mass")).max(MIN_MASS),
            motor_strength: get(a, "motor_strength"),
            restitution: get(a, "restitution"),
            gravity_slope: get(a, "gravity_slope"),
            push_velocity: get(a, "push_velocity"),
            alpha: (ACTUATOR_RATE * gain).min(1.0),
            x: 0.0,
            vx: 0.0,
            pitch: 0.0,
            pitch_rate: 0.0,
            u: 0.0,
        }
    }
}

impl Dynamics for SprintCart {
    fn reset(&mut self, _rng: &mut Rng) {
        self.x = 0.0;
        self.vx = 0.0;
        self.pitch = 0.0;
        self.pitch_rate = 0.0;
        self.u = 0.0;
    }

    fn observe(&self, step: usize, horizon: usize, out: &mut [f64]) {
        out[0] = self.vx;
        out[1] = self.pitch;
        out[2] = self.pitch_rate;
        out[3] = self.u;
        out[4] = step as f64 / horizon as f64;
    }

    fn step(&mut self, action: &[f64], force_scale: f64, dt: f64, f: &mut [f64]) -> bool {
        let a = action[0];
        let prev_u = self.u;
        self.u += self.alpha * (a - self.u);
        let force = MAX_FORCE * self.motor_strength * self.u * force_scale;
        let ax = (force - DRAG * self.friction * self.vx) / self.mass - self.gravity_slope;
        self.vx += dt * ax;
        self.x += dt * self.vx;
        if self.x < 0.0 {
            self.x = 0.0;
            self.vx = -self.restitution * self.vx;
        }
        let pitch_acc = -PITCH_K * self.pitch - PITCH_D * self.pitch_rate - PITCH_C * ax;
        self.pitch_rate += dt * pitch_acc;
        self.pitch += dt * self.pitch_rate;

        let (s, c) = self.pitch.sin_cos();
        let du = self.u - prev_u;
        f[0] = self.vx;
        f[1] = self.x;
        f[2] = ax;
        f[3] = self.pitch;
        f[4] = self.pitch_rate;
        f[5] = -BODY_HEIGHT * s * self.pitch_rate;
        f[6] = BODY_HEIGHT * (c - 1.0);
        f[7] = 0.0;
        f[8] = self.pitch_rate.abs();
        f[9] = self.pitch_rate * self.pitch_rate;
        f[10] = s * s;
        f[11] = pitch_acc * pitch_acc;
        f[12] = (self.pitch.abs() - PITCH_LIMIT).max(0.0);
        f[13] = self.u;
        f[14] = self.u.abs();
        f[15] = self.u * self.u;
        f[16] = du.abs();
        f[17] = du * du;
        f[18] = force;
        f[19] = force * force;
        false
    }

    fn push_magnitude(&self) -> f64 {
        self.push_velocity
    }

    fn apply_push(&mut self, signed: f64) {
        self.vx += signed;
    }
}
