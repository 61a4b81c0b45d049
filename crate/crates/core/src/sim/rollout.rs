use std::io::Write;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::env::{EnvId, EnvironmentInstance, EnvironmentSpec};
use super::params::PhysicsAssignment;
use super::SimError;

/// A deterministic controller queried in evaluation mode.
pub trait Policy: Sync {
    fn obs_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    fn act(&self, observation: &[f64]) -> Vec<f64>;
}

/// Constant action, handy for tests and sanity sweeps.
#[derive(Debug, Clone)]
pub struct ConstantPolicy {
    pub obs_dim: usize,
    pub action: Vec<f64>,
}

impl Policy for ConstantPolicy {
    fn obs_dim(&self) -> usize {
        self.obs_dim
    }
    fn action_dim(&self) -> usize {
        self.action.len()
    }
    fn act(&self, _observation: &[f64]) -> Vec<f64> {
        self.action.clone()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub observation: Vec<f64>,
    pub action: Vec<f64>,
    pub features: Vec<f64>,
    pub terminated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutTrace {
    pub env_id: EnvId,
    pub assignment: PhysicsAssignment,
    pub seed: u64,
    pub feature_catalog: Vec<String>,
    pub steps: Vec<TraceStep>,
    pub episode_length: usize,
}

impl RolloutTrace {
    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_catalog.iter().position(|f| f == name)
    }

    /// Values of one feature across the episode.
    pub fn feature_series(&self, name: &str) -> Result<Vec<f64>, SimError> {
        let i = self.feature_index(name).ok_or_else(|| SimError::MissingFeature(name.to_string()))?;
        Ok(self.steps.iter().map(|s| s.features[i]).collect())
    }

    /// SHA-256 over the bit patterns of every recorded value.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.env_id.as_str().as_bytes());
        for (k, v) in &self.assignment.values {
            h.update(k.as_bytes());
            h.update(v.to_le_bytes());
        }
        h.update(self.seed.to_le_bytes());
        for s in &self.steps {
            for v in s.observation.iter().chain(&s.action).chain(&s.features) {
                h.update(v.to_le_bytes());
            }
            h.update([s.terminated as u8]);
        }
        hex::encode(h.finalize())
    }

    /// One row per step: `step, obs_*, act_*, <features>, terminated`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        let obs_dim = self.steps.first().map_or(0, |s| s.observation.len());
        let act_dim = self.steps.first().map_or(0, |s| s.action.len());
        let mut header = vec!["step".to_string()];
        header.extend((0..obs_dim).map(|i| format!("obs_{i}")));
        header.extend((0..act_dim).map(|i| format!("act_{i}")));
        header.extend(self.feature_catalog.iter().cloned());
        header.push("terminated".into());
        w.write_record(&header)?;
        for (t, s) in self.steps.iter().enumerate() {
            let mut row = vec![t.to_string()];
            row.extend(s.observation.iter().chain(&s.action).chain(&s.features).map(|v| format!("{v:?}")));
            row.push(s.terminated.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Run one full episode of `policy` on a prepared instance.
pub fn rollout_instance(
    mut env: EnvironmentInstance,
    policy: &dyn Policy,
    seed: u64,
) -> Result<RolloutTrace, SimError> {
    let spec = env.spec().clone();
    check_dims(&spec, policy)?;
    let mut obs = env.reset();
    let mut steps = Vec::with_capacity(spec.horizon);
    loop {
        let action = policy.act(&obs);
        let res = env.step(&action)?;
        let done = res.done();
        steps.push(TraceStep { observation: obs, action, features: res.features, terminated: res.terminated });
        obs = res.observation;
        if done {
            break;
        }
    }
    Ok(RolloutTrace {
        env_id: spec.env_id,
        assignment: env.assignment().clone(),
        seed,
        feature_catalog: spec.feature_catalog.clone(),
        episode_length: steps.len(),
        steps,
    })
}

/// Nominal-world rollout; a pure function of `(policy, assignment, seed)`.
pub fn rollout(
    spec: &EnvironmentSpec,
    assignment: &PhysicsAssignment,
    policy: &dyn Policy,
    seed: u64,
) -> Result<RolloutTrace, SimError> {
    let env = super::make_environment(spec, assignment, seed)?;
    rollout_instance(env, policy, seed)
}

pub(crate) fn check_dims(spec: &EnvironmentSpec, policy: &dyn Policy) -> Result<(), SimError> {
    if policy.obs_dim() != spec.obs_dim {
        return Err(SimError::DimensionMismatch { expected: spec.obs_dim, got: policy.obs_dim() });
    }
    if policy.action_dim() != spec.action_dim {
        return Err(SimError::DimensionMismatch { expected: spec.action_dim, got: policy.action_dim() });
    }
    Ok(())
}
