use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::RlError;
use crate::dr::DomainRandomizationConfig;
use crate::seed;
use crate::sim::{
    make_environment, make_target_world, rollout_instance, sample_assignment, EnvId, EnvironmentSpec, PhysicsAssignment,
    Policy, RolloutTrace, TargetWorldSpec,
};

pub const SPRINT_TARGET_VX: f64 = 2.0;
pub const SPRINT_WIDTH: f64 = 0.25;
pub const SPIN_CLIP: f64 = 0.25;
/// Distance analog is capped like a fixed-length test track.
pub const DISTANCE_CAP: f64 = 5.0;

/// Per-step task fitness, resolved against a feature catalog once.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitnessMeter {
    env_id: EnvId,
    index: usize,
}

impl FitnessMeter {
    pub fn new(env_id: EnvId, catalog: &[String]) -> Result<Self, RlError> {
        let feature = match env_id {
            EnvId::SprintCart => Some("vx"),
            EnvId::SpinDisk => Some("wz"),
            EnvId::GlobeBalance => None,
        };
        let index = match feature {
            Some(f) => catalog
                .iter()
                .position(|c| c == f)
                .ok_or_else(|| RlError::Sim(crate::sim::SimError::MissingFeature(f.to_string())))?,
            None => 0,
        };
        Ok(Self { env_id, index })
    }

    pub fn step(&self, features: &[f64]) -> f64 {
        match self.env_id {
            EnvId::SprintCart => (-(features[self.index] - SPRINT_TARGET_VX).powi(2) / SPRINT_WIDTH).exp(),
            EnvId::SpinDisk => features[self.index].clamp(-SPIN_CLIP, SPIN_CLIP),
            EnvId::GlobeBalance => 1.0,
        }
    }
}

/// Episode fitness: summed per-step task score.
pub fn fitness(trace: &RolloutTrace, env_id: EnvId) -> Result<f64, RlError> {
    if trace.env_id != env_id {
        return Err(RlError::EnvMismatch { expected: env_id, got: trace.env_id });
    }
    let m = FitnessMeter::new(env_id, &trace.feature_catalog)?;
    Ok(trace.steps.iter().take(trace.episode_length).map(|s| m.step(&s.features)).sum())
}

/// Where evaluation episodes draw their physics from.
#[derive(Debug, Clone, PartialEq)]
pub enum AssignmentSource {
    Fixed(PhysicsAssignment),
    Randomized(DomainRandomizationConfig),
    Target(TargetWorldSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitnessReport {
    pub episodes: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation across episodes.
    pub std: f64,
    /// Mean `vx` over all steps (sprint_cart only).
    pub mean_forward_velocity: Option<f64>,
    /// Mean per-episode `sum(vx * dt)`, capped (sprint_cart only).
    pub mean_distance: Option<f64>,
    pub mean_abs_action: f64,
    pub mean_torque_sq: f64,
}

struct EpisodeStats {
    fitness: f64,
    vx_sum: f64,
    distance: f64,
    abs_action_sum: f64,
    torque_sq_sum: f64,
    steps: usize,
}

fn episode_stats(trace: &RolloutTrace, spec: &EnvironmentSpec) -> Result<EpisodeStats, RlError> {
    let fit = fitness(trace, spec.env_id)?;
    let tq = trace.feature_index("torque_sq_sum");
    let vx = trace.feature_index("vx").filter(|_| spec.env_id == EnvId::SprintCart);
    let steps = &trace.steps[..trace.episode_length];
    let vx_sum: f64 = vx.map_or(0.0, |i| steps.iter().map(|s| s.features[i]).sum());
    Ok(EpisodeStats {
        fitness: fit,
        vx_sum,
        distance: (vx_sum * spec.dt).min(DISTANCE_CAP),
        abs_action_sum: steps
            .iter()
            .map(|s| s.action.iter().map(|a| a.clamp(-1.0, 1.0).abs()).sum::<f64>() / s.action.len().max(1) as f64)
            .sum(),
        torque_sq_sum: tq.map_or(0.0, |i| steps.iter().map(|s| s.features[i]).sum()),
        steps: steps.len(),
    })
}

fn run_episode(
    policy: &dyn Policy,
    spec: &EnvironmentSpec,
    source: &AssignmentSource,
    env_seed: u64,
    dr_seed: u64,
) -> Result<RolloutTrace, RlError> {
    let env = match source {
        AssignmentSource::Fixed(a) => make_environment(spec, a, env_seed)?,
        AssignmentSource::Randomized(dr) => {
            let mut rng = seed::rng(dr_seed, &[]);
            let a = sample_assignment(spec, dr, &spec.defaults(), &mut rng)?;
            make_environment(spec, &a, env_seed)?
        }
        AssignmentSource::Target(t) => make_target_world(spec, t, env_seed)?,
    };
    Ok(rollout_instance(env, policy, env_seed)?)
}

/// Mean-action rollouts of `policy`; episode `i` is seeded from `(seed, i)`.
pub fn evaluate_policy(
    policy: &dyn Policy,
    spec: &EnvironmentSpec,
    source: &AssignmentSource,
    episodes: usize,
    seed: u64,
) -> Result<FitnessReport, RlError> {
    if episodes == 0 {
        return Err(RlError::InvalidConfig("episodes must be >= 1".into()));
    }
    let stats: Vec<EpisodeStats> = (0..episodes as u64)
        .into_par_iter()
        .map(|i| {
            let env_seed = seed::derive(seed, &[seed::tag("eval"), i]);
            let dr_seed = seed::derive(seed, &[seed::tag("eval_dr"), i]);
            let trace = run_episode(policy, spec, source, env_seed, dr_seed)?;
            episode_stats(&trace, spec)
        })
        .collect::<Result<_, _>>()?;
    let n = stats.len() as f64;
    let fits: Vec<f64> = stats.iter().map(|s| s.fitness).collect();
    let mean = fits.iter().sum::<f64>() / n;
    let std = (fits.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / n).sqrt();
    let total_steps = stats.iter().map(|s| s.steps).sum::<usize>().max(1) as f64;
    let sprint = spec.env_id == EnvId::SprintCart;
    Ok(FitnessReport {
        episodes: fits,
        mean,
        std,
        mean_forward_velocity: sprint.then(|| stats.iter().map(|s| s.vx_sum).sum::<f64>() / total_steps),
        mean_distance: sprint.then(|| stats.iter().map(|s| s.distance).sum::<f64>() / n),
        mean_abs_action: stats.iter().map(|s| s.abs_action_sum).sum::<f64>() / total_steps,
        mean_torque_sq: stats.iter().map(|s| s.torque_sq_sum).sum::<f64>() / total_steps,
    })
}

/// Mean fitness over one episode per seed under a fixed assignment.
pub fn mean_fitness_fixed(
    policy: &dyn Policy,
    spec: &EnvironmentSpec,
    assignment: &PhysicsAssignment,
    seeds: &[u64],
) -> Result<f64, RlError> {
    if seeds.is_empty() {
        return Err(RlError::InvalidConfig("no evaluation seeds".into()));
    }
    let fits: Vec<f64> = seeds
        .par_iter()
        .map(|&s| {
            let env = make_environment(spec, assignment, s)?;
            fitness(&rollout_instance(env, policy, s)?, spec.env_id)
        })
        .collect::<Result<_, _>>()?;
    Ok(fits.iter().sum::<f64>() / fits.len() as f64)
}
