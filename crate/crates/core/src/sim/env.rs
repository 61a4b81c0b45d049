use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::params::{PhysicsAssignment, PhysicsParameterSpec};
use super::{globe_balance, spin_disk, sprint_cart, SimError};
use crate::seed::{self, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvId {
    SprintCart,
    SpinDisk,
    GlobeBalance,
}

impl EnvId {
    pub const ALL: [EnvId; 3] = [EnvId::SprintCart, EnvId::SpinDisk, EnvId::GlobeBalance];

    pub fn as_str(self) -> &'static str {
        match self {
            EnvId::SprintCart => "sprint_cart",
            EnvId::SpinDisk => "spin_disk",
            EnvId::GlobeBalance => "globe_balance",
        }
    }
}

impl fmt::Display for EnvId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EnvId {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EnvId::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| SimError::UnknownEnv(s.to_string()))
    }
}

/// Static description of an environment: timing, parameters, features.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentSpec {
    pub env_id: EnvId,
    pub horizon: usize,
    pub dt: f64,
    pub param_specs: Vec<PhysicsParameterSpec>,
    pub feature_catalog: Vec<String>,
    pub action_dim: usize,
    pub obs_dim: usize,
}

impl EnvironmentSpec {
    /// The shipped environment for `env_id`.
    pub fn builtin(env_id: EnvId) -> Self {
        let (horizon, params, features, obs_dim) = match env_id {
            EnvId::SprintCart => (200, sprint_cart::param_specs(), sprint_cart::FEATURES, sprint_cart::OBS_DIM),
            EnvId::SpinDisk => (200, spin_disk::param_specs(), spin_disk::FEATURES, spin_disk::OBS_DIM),
            EnvId::GlobeBalance => (500, globe_balance::param_specs(), globe_balance::FEATURES, globe_balance::OBS_DIM),
        };
        Self {
            env_id,
            horizon,
            dt: 0.02,
            param_specs: params,
            feature_catalog: features.iter().map(|s| s.to_string()).collect(),
            action_dim: 1,
            obs_dim,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.horizon == 0 {
            return Err(SimError::InvalidSpec("horizon must be >= 1".into()));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(SimError::InvalidSpec("dt must be positive".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for f in &self.feature_catalog {
            if !seen.insert(f) {
                return Err(SimError::InvalidSpec(format!("duplicate feature {f}")));
            }
        }
        let known = Self::builtin(self.env_id);
        for p in &self.param_specs {
            if !known.param_specs.iter().any(|k| k.name == p.name) {
                return Err(SimError::UnknownParameter(p.name.clone()));
            }
            p.validate()?;
        }
        if self.param_specs.len() != known.param_specs.len() {
            return Err(SimError::InvalidSpec(format!(
                "{} expects {} parameters, got {}",
                self.env_id,
                known.param_specs.len(),
                self.param_specs.len()
            )));
        }
        Ok(())
    }

    pub fn param(&self, name: &str) -> Option<&PhysicsParameterSpec> {
        self.param_specs.iter().find(|p| p.name == name)
    }

    pub fn defaults(&self) -> PhysicsAssignment {
        PhysicsAssignment::defaults(&self.param_specs)
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_catalog.iter().position(|f| f == name)
    }
}

/// Unmodeled effects layered on top of the nominal dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct UnmodeledEffects {
    pub obs_noise_std: f64,
    pub action_delay_steps: usize,
    pub torque_ripple_amp: f64,
}

impl UnmodeledEffects {
    pub fn validate(&self) -> Result<(), SimError> {
        let ok = self.obs_noise_std.is_finite()
            && self.obs_noise_std >= 0.0
            && self.torque_ripple_amp.is_finite()
            && (0.0..=1.0).contains(&self.torque_ripple_amp);
        if ok {
            Ok(())
        } else {
            Err(SimError::InvalidSpec(format!("invalid unmodeled effects {self:?}")))
        }
    }

    pub fn is_nominal(&self) -> bool {
        self.obs_noise_std == 0.0 && self.action_delay_steps == 0 && self.torque_ripple_amp == 0.0
    }
}

/// Held-out world that stands in for deployment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetWorldSpec {
    pub base_env_id: EnvId,
    pub target_assignment: PhysicsAssignment,
    pub obs_noise_std: f64,
    pub action_delay_steps: usize,
    pub torque_ripple_amp: f64,
}

impl TargetWorldSpec {
    /// The shipped target world for an environment. Parameters not listed are
    /// left at their defaults.
    pub fn builtin(env_id: EnvId) -> Self {
        let spec = EnvironmentSpec::builtin(env_id);
        let mut assignment = spec.defaults();
        let shifted: &[(&str, f64)] = match env_id {
            EnvId::SprintCart => &[("friction", 2.5), ("payload_mass", 1.0), ("motor_strength", 0.85)],
            EnvId::SpinDisk => &[("hand_friction", 0.6), ("object_mass", 1.4), ("motor_strength", 0.85)],
            EnvId::GlobeBalance => &[("ball_mass", 1.5), ("robot_payload_mass", 0.3), ("robot_motor_strength", 0.85)],
        };
        for (k, v) in shifted {
            assignment.set(k, *v);
        }
        Self {
            base_env_id: env_id,
            target_assignment: assignment,
            obs_noise_std: 0.01,
            action_delay_steps: 1,
            torque_ripple_amp: 0.05,
        }
    }

    pub fn effects(&self) -> UnmodeledEffects {
        UnmodeledEffects {
            obs_noise_std: self.obs_noise_std,
            action_delay_steps: self.action_delay_steps,
            torque_ripple_amp: self.torque_ripple_amp,
        }
    }

    pub fn validate(&self, spec: &EnvironmentSpec) -> Result<(), SimError> {
        if spec.env_id != self.base_env_id {
            return Err(SimError::InvalidSpec(format!(
                "target world is for {}, environment is {}",
                self.base_env_id, spec.env_id
            )));
        }
        self.target_assignment.validate(&spec.param_specs)?;
        self.effects().validate()
    }
}

/// Output of a single step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Vec<f64>,
    /// Aligned with the environment's feature catalog.
    pub features: Vec<f64>,
    pub terminated: bool,
    /// Horizon reached without termination.
    pub truncated: bool,
    pub step_index: usize,
}

impl StepResult {
    pub fn done(&self) -> bool {
        self.terminated || self.truncated
    }
}

/// Per-environment physics. Actions arrive already clipped to [-1, 1].
pub(crate) trait Dynamics: Send {
    fn reset(&mut self, rng: &mut Rng);
    fn observe(&self, step: usize, horizon: usize, out: &mut [f64]);
    /// Advance one dt. `force_scale` carries multiplicative actuator ripple.
    fn step(&mut self, action: &[f64], force_scale: f64, dt: f64, features: &mut [f64]) -> bool;
    /// Magnitude of the single random push, 0 if disabled.
    fn push_magnitude(&self) -> f64;
    fn apply_push(&mut self, signed: f64);
}

pub(crate) fn build_dynamics(spec: &EnvironmentSpec, a: &PhysicsAssignment) -> Box<dyn Dynamics> {
    match spec.env_id {
        EnvId::SprintCart => Box::new(sprint_cart::SprintCart::new(a)),
        EnvId::SpinDisk => Box::new(spin_disk::SpinDisk::new(a)),
        EnvId::GlobeBalance => Box::new(globe_balance::GlobeBalance::new(a)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    ResetPending,
    Running,
    Done,
}

/// A live environment. Single owner; all randomness flows from its seed.
pub struct EnvironmentInstance {
    spec: EnvironmentSpec,
    assignment: PhysicsAssignment,
    dynamics: Box<dyn Dynamics>,
    effects: UnmodeledEffects,
    rng: Rng,
    phase: Phase,
    step_index: usize,
    push_step: Option<(usize, f64)>,
    delay: VecDeque<Vec<f64>>,
    clean_obs: Vec<f64>,
}

impl fmt::Debug for EnvironmentInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EnvironmentInstance")
            .field("env_id", &self.spec.env_id)
            .field("assignment", &self.assignment)
            .field("step_index", &self.step_index)
            .finish_non_exhaustive()
    }
}

/// Validate `assignment` against `spec` and build a nominal instance.
pub fn make_environment(
    spec: &EnvironmentSpec,
    assignment: &PhysicsAssignment,
    seed: u64,
) -> Result<EnvironmentInstance, SimError> {
    EnvironmentInstance::new(spec, assignment, UnmodeledEffects::default(), seed)
}

/// Instance of the held-out target world.
pub fn make_target_world(
    spec: &EnvironmentSpec,
    target: &TargetWorldSpec,
    seed: u64,
) -> Result<EnvironmentInstance, SimError> {
    target.validate(spec)?;
    EnvironmentInstance::new(spec, &target.target_assignment, target.effects(), seed)
}

impl EnvironmentInstance {
    pub fn new(
        spec: &EnvironmentSpec,
        assignment: &PhysicsAssignment,
        effects: UnmodeledEffects,
        seed: u64,
    ) -> Result<Self, SimError> {
        assignment.validate(&spec.param_specs)?;
        effects.validate()?;
        Ok(Self {
            spec: spec.clone(),
            assignment: assignment.clone(),
            dynamics: build_dynamics(spec, assignment),
            effects,
            rng: seed::rng(seed, &[seed::tag("env")]),
            phase: Phase::ResetPending,
            step_index: 0,
            push_step: None,
            delay: VecDeque::new(),
            clean_obs: vec![0.0; spec.obs_dim],
        })
    }

    pub fn spec(&self) -> &EnvironmentSpec {
        &self.spec
    }

    pub fn assignment(&self) -> &PhysicsAssignment {
        &self.assignment
    }

    /// Observation without sensor noise, for the most recent reset/step.
    pub fn clean_observation(&self) -> &[f64] {
        &self.clean_obs
    }

    pub fn reset(&mut self) -> Vec<f64> {
        self.dynamics.reset(&mut self.rng);
        self.step_index = 0;
        self.phase = Phase::Running;
        let mag = self.dynamics.push_magnitude();
        self.push_step = if mag > 0.0 {
            let at = self.rng.random_range(0..self.spec.horizon);
            let sign = if self.rng.random_bool(0.5) { 1.0 } else { -1.0 };
            Some((at, sign * mag))
        } else {
            None
        };
        self.delay = std::iter::repeat_n(vec![0.0; self.spec.action_dim], self.effects.action_delay_steps).collect();
        self.observe()
    }

    fn observe(&mut self) -> Vec<f64> {
        self.dynamics.observe(self.step_index, self.spec.horizon, &mut self.clean_obs);
        let mut obs = self.clean_obs.clone();
        if self.effects.obs_noise_std > 0.0 {
            for o in &mut obs {
                let n: f64 = StandardNormal.sample(&mut self.rng);
                *o += self.effects.obs_noise_std * n;
            }
        }
        obs
    }

    pub fn step(&mut self, action: &[f64]) -> Result<StepResult, SimError> {
        match self.phase {
            Phase::ResetPending => return Err(SimError::NotReset),
            Phase::Done => return Err(SimError::SteppedAfterTermination),
            Phase::Running => {}
        }
        if action.len() != self.spec.action_dim {
            return Err(SimError::DimensionMismatch { expected: self.spec.action_dim, got: action.len() });
        }
        let clipped: Vec<f64> =
            action.iter().map(|a| if a.is_nan() { 0.0 } else { a.clamp(-1.0, 1.0) }).collect();
        let applied = if self.effects.action_delay_steps > 0 {
            self.delay.push_back(clipped);
            self.delay.pop_front().expect("delay queue is non-empty")
        } else {
            clipped
        };
        let ripple = if self.effects.torque_ripple_amp > 0.0 {
            1.0 + self.effects.torque_ripple_amp * self.rng.random_range(-1.0..=1.0)
        } else {
            1.0
        };
        if let Some((at, dv)) = self.push_step {
            if at == self.step_index {
                self.dynamics.apply_push(dv);
            }
        }
        let mut features = vec![0.0; self.spec.feature_catalog.len()];
        let terminated = self.dynamics.step(&applied, ripple, self.spec.dt, &mut features);
        let index = self.step_index;
        self.step_index += 1;
        let truncated = !terminated && self.step_index >= self.spec.horizon;
        if terminated || truncated {
            self.phase = Phase::Done;
        }
        if let Some(i) = features.iter().position(|f| !f.is_finite()) {
            return Err(SimError::NonFiniteFeature(self.spec.feature_catalog[i].clone()));
        }
        let observation = self.observe();
        Ok(StepResult { observation, features, terminated, truncated, step_index: index })
    }
}
