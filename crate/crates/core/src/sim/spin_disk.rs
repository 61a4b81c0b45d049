//! Disk spun about its axis by a friction-coupled finger.
//!
//! ```text
//! tau    = MAX_TORQUE * motor_strength * a * ripple
//! tau_d  = tau * hand_friction / (hand_friction + GRIP_HALF)
//! I      = INERTIA_BASE * (1 + object_mass)
//! w     <- w + dt * (tau_d - damping * w) / I
//! ```
//!
//! The slipped torque `tau - tau_d` pushes the disk sideways against a
//! centering spring; past `DROP_OFFSET` the disk starts to sag and `pz`
//! falls below `Z_THRESHOLD`. A wall at `WALL` bounces the disk with
//! `object_restitution`.

use super::env::Dynamics;
use super::params::{GridKind, PhysicsAssignment, PhysicsParameterSpec, ValidRange};
use crate::seed::Rng;

pub const MAX_TORQUE: f64 = 0.05;
pub const GRIP_HALF: f64 = 0.5;
pub const INERTIA_BASE: f64 = 0.01;
pub const SLIP_GAIN: f64 = 20.0;
pub const CENTER_K: f64 = 30.0;
pub const CENTER_D: f64 = 3.0;
pub const WALL: f64 = 0.05;
pub const DROP_OFFSET: f64 = 0.03;
pub const REST_HEIGHT: f64 = 0.1;
pub const Z_THRESHOLD: f64 = 0.05;
pub const FINGER_RATE: f64 = 10.0;

pub const OBS_DIM: usize = 5;

pub const FEATURES: &[&str] = &[
    "wz",
    "offset",
    "lin_vel_l1",
    "lin_vel_norm",
    "pz",
    "pose_diff",
    "torque",
    "torque_sq_sum",
    "work",
    "act",
    "act_abs",
    "act_diff_l1",
];

pub fn param_specs() -> Vec<PhysicsParameterSpec> {
    use GridKind::*;
    vec![
        PhysicsParameterSpec::new("object_mass", 1.0, ValidRange::non_negative(), CenteredOne, "x"),
        PhysicsParameterSpec::new("hand_friction", 1.0, ValidRange::non_negative(), ZeroToInf, ""),
        PhysicsParameterSpec::new("damping", 0.01, ValidRange::non_negative(), ZeroToInf, "N*m*s"),
        PhysicsParameterSpec::new("motor_strength", 1.0, ValidRange::non_negative(), CenteredOne, "x"),
        PhysicsParameterSpec::new("object_restitution", 0.5, ValidRange::unit(), ZeroToOne, ""),
    ]
}

#[derive(Debug, Clone)]
pub(crate) struct SpinDisk {
    inertia: f64,
    hand_friction: f64,
    damping: f64,
    motor_strength: f64,
    restitution: f64,
    w: f64,
    offset: f64,
    offset_vel: f64,
    finger: f64,
    prev_a: f64,
}

impl SpinDisk {
    pub(crate) fn new(a: &PhysicsAssignment) -> Self {
        let g = |n: &str| a.get(n).unwrap_or_else(|| panic!("assignment validated but missing {n}"));
        Self {
            inertia: INERTIA_BASE * (1.0 + g("object_mass")),
            hand_friction: g("hand_friction"),
            damping: g("damping"),
            motor_strength: g("motor_strength"),
            restitution: g("object_restitution"),
            w: 0.0,
            offset: 0.0,
            offset_vel: 0.0,
            finger: 0.0,
            prev_a: 0.0,
        }
    }

    fn height(&self) -> f64 {
        REST_HEIGHT - 2.0 * (self.offset.abs() - DROP_OFFSET).max(0.0)
    }
}

impl Dynamics for SpinDisk {
    fn reset(&mut self, _rng: &mut Rng) {
        self.w = 0.0;
        self.offset = 0.0;
        self.offset_vel = 0.0;
        self.finger = 0.0;
        self.prev_a = 0.0;
    }

    fn observe(&self, step: usize, horizon: usize, out: &mut [f64]) {
        out[0] = self.w;
        out[1] = self.offset / WALL;
        out[2] = self.offset_vel;
        out[3] = self.finger;
        out[4] = step as f64 / horizon as f64;
    }

    fn step(&mut self, action: &[f64], force_scale: f64, dt: f64, f: &mut [f64]) -> bool {
        let a = action[0];
        let tau = MAX_TORQUE * self.motor_strength * a * force_scale;
        let coupling = self.hand_friction / (self.hand_friction + GRIP_HALF);
        let tau_d = tau * coupling;
        self.w += dt * (tau_d - self.damping * self.w) / self.inertia;
        let slip = tau - tau_d;
        let acc = SLIP_GAIN * slip - CENTER_K * self.offset - CENTER_D * self.offset_vel;
        self.offset_vel += dt * acc;
        self.offset += dt * self.offset_vel;
        if self.offset.abs() > WALL {
            self.offset = WALL * self.offset.signum();
            self.offset_vel = -self.restitution * self.offset_vel;
        }
        self.finger += dt * FINGER_RATE * (a - self.finger);
        let da = a - self.prev_a;
        self.prev_a = a;

        f[0] = self.w;
        f[1] = self.offset;
        f[2] = self.offset_vel.abs();
        f[3] = self.offset_vel.abs();
        f[4] = self.height();
        f[5] = self.finger.abs();
        f[6] = tau;
        f[7] = tau * tau;
        f[8] = (tau_d * self.w).abs() * dt;
        f[9] = a;
        f[10] = a.abs();
        f[11] = da.abs();
        false
    }

    fn push_magnitude(&self) -> f64 {
        0.0
    }

    fn apply_push(&mut self, _signed: f64) {}
}
