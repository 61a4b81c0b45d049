//! Reward-aware physics prior: a one-parameter-at-a-time feasibility sweep.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dr::Interval;
use crate::rl;
use crate::seed;
use crate::sim::{EnvironmentSpec, PhysicsAssignment, Policy, SimError};

pub const DEFAULT_THRESHOLD: f64 = 0.5;
pub const DEFAULT_EPISODES_PER_VALUE: usize = 4;

#[derive(Debug, Error)]
pub enum RappError {
    #[error("policy fails its own success criterion at defaults (nominal fitness {nominal})")]
    NominalFailure { nominal: f64 },
    #[error("invalid criterion: {0}")]
    InvalidCriterion(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("evaluation failed: {0}")]
    Eval(String),
}

/// Fraction-of-nominal success rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuccessCriterion {
    pub threshold: f64,
    pub nominal_fitness: f64,
    pub episodes_per_value: usize,
}

impl SuccessCriterion {
    pub fn validate(&self) -> Result<(), RappError> {
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(RappError::InvalidCriterion(format!("threshold {} not in (0, 1]", self.threshold)));
        }
        if self.episodes_per_value == 0 {
            return Err(RappError::InvalidCriterion("episodes_per_value must be at least 1".into()));
        }
        Ok(())
    }
}

pub fn is_feasible(mean_fitness: f64, criterion: &SuccessCriterion) -> bool {
    mean_fitness >= criterion.threshold * criterion.nominal_fitness
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamBounds {
    pub low: Option<f64>,
    pub high: Option<f64>,
    pub feasible: Vec<f64>,
    pub empty: bool,
}

impl ParamBounds {
    pub fn from_feasible(mut feasible: Vec<f64>) -> Self {
        feasible.sort_by(f64::total_cmp);
        Self {
            low: feasible.first().copied(),
            high: feasible.last().copied(),
            empty: feasible.is_empty(),
            feasible,
        }
    }

    pub fn interval(&self) -> Option<Interval> {
        Some(Interval::new(self.low?, self.high?))
    }
}

/// Per-parameter feasible range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RappBounds {
    pub params: BTreeMap<String, ParamBounds>,
}

impl RappBounds {
    pub fn get(&self, name: &str) -> Option<&ParamBounds> {
        self.params.get(name)
    }

    pub fn interval(&self, name: &str) -> Option<Interval> {
        self.params.get(name).and_then(ParamBounds::interval)
    }

    /// Every grid point feasible: bounds are the grid extremes.
    pub fn grid_extremes(spec: &EnvironmentSpec) -> Self {
        Self {
            params: spec.param_specs.iter().map(|p| (p.name.clone(), ParamBounds::from_feasible(p.grid()))).collect(),
        }
    }

    /// Bounds equal to each parameter's valid range (possibly infinite).
    pub fn valid_ranges(spec: &EnvironmentSpec) -> Self {
        Self {
            params: spec
                .param_specs
                .iter()
                .map(|p| {
                    let b = ParamBounds {
                        low: Some(p.valid_range.min),
                        high: Some(p.valid_range.max),
                        feasible: Vec::new(),
                        empty: false,
                    };
                    (p.name.clone(), b)
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bounds serialize")
    }

    /// Text block listing each parameter with its bounds, in spec order.
    pub fn prompt_block(&self, spec: &EnvironmentSpec) -> String {
        let mut out = String::new();
        for p in &spec.param_specs {
            match self.interval(&p.name) {
                Some(iv) => out.push_str(&format!("{}: {}\n", p.name, iv)),
                None => out.push_str(&format!("{}: infeasible\n", p.name)),
            }
        }
        out
    }
}

/// Search grid per parameter, filtered to its valid range.
pub fn default_grids(spec: &EnvironmentSpec) -> BTreeMap<String, Vec<f64>> {
    spec.param_specs.iter().map(|p| (p.name.clone(), p.grid())).collect()
}

/// Mean task fitness of a fixed policy under one assignment.
pub trait AssignmentScorer: Sync {
    fn score(&self, assignment: &PhysicsAssignment, episode_seeds: &[u64]) -> Result<f64, RappError>;
}

/// Scores a policy by rolling it out in the nominal simulator.
pub struct PolicyScorer<'a> {
    pub policy: &'a dyn Policy,
    pub spec: &'a EnvironmentSpec,
}

impl AssignmentScorer for PolicyScorer<'_> {
    fn score(&self, assignment: &PhysicsAssignment, episode_seeds: &[u64]) -> Result<f64, RappError> {
        rl::mean_fitness_fixed(self.policy, self.spec, assignment, episode_seeds)
            .map_err(|e| RappError::Eval(e.to_string()))
    }
}

/// The evaluation seeds shared by the nominal run and every sweep point.
pub fn episode_seeds(seed: u64, episodes: usize) -> Vec<u64> {
    (0..episodes as u64).map(|i| seed::derive(seed, &[seed::tag("rapp"), i])).collect()
}

/// Build a criterion by measuring the nominal fitness at defaults.
pub fn nominal_criterion(
    scorer: &dyn AssignmentScorer,
    spec: &EnvironmentSpec,
    threshold: f64,
    episodes_per_value: usize,
    seed: u64,
) -> Result<SuccessCriterion, RappError> {
    let probe = SuccessCriterion { threshold, nominal_fitness: 1.0, episodes_per_value };
    probe.validate()?;
    let nominal = scorer.score(&spec.defaults(), &episode_seeds(seed, episodes_per_value))?;
    Ok(SuccessCriterion { nominal_fitness: nominal, ..probe })
}

/// Sweep every grid value of every parameter with the others at defaults.
pub fn compute_rapp_with(
    scorer: &dyn AssignmentScorer,
    spec: &EnvironmentSpec,
    criterion: &SuccessCriterion,
    seed: u64,
) -> Result<RappBounds, RappError> {
    criterion.validate()?;
    if !(criterion.nominal_fitness.is_finite() && criterion.nominal_fitness > 0.0) {
        return Err(RappError::NominalFailure { nominal: criterion.nominal_fitness });
    }
    let seeds = episode_seeds(seed, criterion.episodes_per_value);
    let defaults = spec.defaults();
    let work: Vec<(String, f64)> =
        spec.param_specs.iter().flat_map(|p| p.grid().into_iter().map(move |v| (p.name.clone(), v))).collect();
    let scores: Vec<Result<f64, RappError>> =
        work.par_iter().map(|(name, v)| scorer.score(&defaults.clone().with(name, *v), &seeds)).collect();

    let mut feasible: BTreeMap<String, Vec<f64>> = spec.param_specs.iter().map(|p| (p.name.clone(), vec![])).collect();
    for ((name, v), s) in work.iter().zip(scores) {
        if is_feasible(s?, criterion) {
            feasible.get_mut(name).expect("name from spec").push(*v);
        }
    }
    let params: BTreeMap<String, ParamBounds> =
        feasible.into_iter().map(|(k, vs)| (k, ParamBounds::from_feasible(vs))).collect();
    for (k, b) in &params {
        if b.empty {
            log::warn!("no feasible value for {k}; it will be left out of randomization");
        }
    }
    Ok(RappBounds { params })
}

/// Sweep for a trained policy.
pub fn compute_rapp(
    policy: &dyn Policy,
    spec: &EnvironmentSpec,
    criterion: &SuccessCriterion,
    seed: u64,
) -> Result<RappBounds, RappError> {
    compute_rapp_with(&PolicyScorer { policy, spec }, spec, criterion, seed)
}

#[cfg(test)]
mod tests;
