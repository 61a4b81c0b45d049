//! Parameterizable toy physics environments and the held-out target world.

mod env;
pub mod globe_balance;
mod io;
mod params;
mod rollout;
pub mod spin_disk;
pub mod sprint_cart;

use rand::Rng as _;
use thiserror::Error;

pub use env::{
    make_environment, make_target_world, EnvId, EnvironmentInstance, EnvironmentSpec, StepResult, TargetWorldSpec,
    UnmodeledEffects,
};
pub use io::{EnvironmentDocument, ParamDocument};
pub use params::{GridKind, PhysicsAssignment, PhysicsParameterSpec, ValidRange};
pub use rollout::{rollout, rollout_instance, ConstantPolicy, Policy, RolloutTrace, TraceStep};

use crate::dr::DomainRandomizationConfig;
use crate::seed::Rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("unknown environment {0:?}")]
    UnknownEnv(String),
    #[error("unknown parameter {0:?}")]
    UnknownParameter(String),
    #[error("assignment is missing parameter {0:?}")]
    MissingParameter(String),
    #[error("value {value} for {name:?} is outside its valid range")]
    OutOfValidRange { name: String, value: f64 },
    #[error("interval for {name:?} leaves the valid range")]
    IntervalOutsideValidRange { name: String },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("step called before reset")]
    NotReset,
    #[error("step called after the episode ended")]
    SteppedAfterTermination,
    #[error("feature {0:?} became non-finite")]
    NonFiniteFeature(String),
    #[error("feature {0:?} is not in the catalog")]
    MissingFeature(String),
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
}

/// Draw a physics assignment: uniform per randomized interval, defaults
/// elsewhere.
pub fn sample_assignment(
    spec: &EnvironmentSpec,
    dr: &DomainRandomizationConfig,
    defaults: &PhysicsAssignment,
    rng: &mut Rng,
) -> Result<PhysicsAssignment, SimError> {
    let mut out = defaults.clone();
    // BTreeMap iteration keeps the draw order fixed.
    for (name, iv) in &dr.intervals {
        let p = spec.param(name).ok_or_else(|| SimError::UnknownParameter(name.clone()))?;
        if !(iv.low <= iv.high && p.valid_range.contains(iv.low) && p.valid_range.contains(iv.high)) {
            return Err(SimError::IntervalOutsideValidRange { name: name.clone() });
        }
        let v = if iv.low == iv.high { iv.low } else { rng.random_range(iv.low..=iv.high) };
        out.set(name, v);
    }
    Ok(out)
}

/// Check every interval of `dr` against the environment's valid ranges.
pub fn validate_dr(spec: &EnvironmentSpec, dr: &DomainRandomizationConfig) -> Result<(), SimError> {
    for (name, iv) in &dr.intervals {
        let p = spec.param(name).ok_or_else(|| SimError::UnknownParameter(name.clone()))?;
        if !(iv.low <= iv.high && p.valid_range.contains(iv.low) && p.valid_range.contains(iv.high)) {
            return Err(SimError::IntervalOutsideValidRange { name: name.clone() });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests;
