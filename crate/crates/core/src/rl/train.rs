use std::io::Write;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::fitness::FitnessMeter;
use super::network::Cache;
use super::policy::PolicyCheckpoint;
use super::ppo::{gae, gaussian_log_prob, normalize_advantages, Batch, PpoLearner};
use super::RlError;
use crate::dr::DomainRandomizationConfig;
use crate::reward::{ComponentTrace, RewardProgram, StatsAccumulator};
use crate::seed::{self, Rng};
use crate::sim::{make_environment, sample_assignment, validate_dr, EnvironmentInstance, EnvironmentSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub total_env_steps: usize,
    pub num_parallel_envs: usize,
    pub rollout_length: usize,
    pub epochs_per_update: usize,
    pub minibatch_size: usize,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_ratio: f64,
    pub learning_rate: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub max_grad_norm: f64,
    /// Mixed into the seed passed to `train_policy`.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            total_env_steps: 200_000,
            num_parallel_envs: 16,
            rollout_length: 256,
            epochs_per_update: 4,
            minibatch_size: 1024,
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_ratio: 0.2,
            learning_rate: 3e-4,
            entropy_coef: 0.0,
            value_coef: 0.5,
            max_grad_norm: 0.5,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), RlError> {
        let bad = |m: &str| Err(RlError::InvalidConfig(m.to_string()));
        if self.num_parallel_envs == 0 || self.rollout_length == 0 || self.epochs_per_update == 0 || self.minibatch_size == 0
        {
            return bad("env count, rollout length, epochs and minibatch size must be positive");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) || !(self.gae_lambda > 0.0 && self.gae_lambda <= 1.0) {
            return bad("gamma and gae_lambda must lie in (0, 1]");
        }
        if !(self.clip_ratio > 0.0 && self.clip_ratio < 1.0) {
            return bad("clip_ratio must lie in (0, 1)");
        }
        if !(self.learning_rate > 0.0 && self.max_grad_norm > 0.0) {
            return bad("learning_rate and max_grad_norm must be positive");
        }
        if !(self.entropy_coef >= 0.0 && self.value_coef >= 0.0) {
            return bad("loss coefficients must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLogRow {
    pub update: usize,
    pub env_steps: usize,
    /// `None` when no episode finished during the rollout.
    pub mean_episode_reward: Option<f64>,
    pub mean_fitness: Option<f64>,
    pub episodes: usize,
    pub components: ComponentTrace,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingLog {
    pub rows: Vec<TrainingLogRow>,
}

impl TrainingLog {
    pub fn last(&self) -> Option<&TrainingLogRow> {
        self.rows.last()
    }

    /// One row per update; four columns per reward component.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        let names: Vec<String> = self
            .rows
            .first()
            .map(|r| r.components.components.iter().map(|c| c.name.clone()).collect())
            .unwrap_or_default();
        let mut header: Vec<String> = [
            "update",
            "env_steps",
            "mean_episode_reward",
            "mean_fitness",
            "episodes",
            "policy_loss",
            "value_loss",
            "entropy",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        for n in &names {
            for s in ["mean", "std", "min", "max"] {
                header.push(format!("{n}_{s}"));
            }
        }
        w.write_record(&header)?;
        let opt = |v: Option<f64>| v.map(|x| format!("{x:?}")).unwrap_or_default();
        for r in &self.rows {
            let mut row = vec![
                r.update.to_string(),
                r.env_steps.to_string(),
                opt(r.mean_episode_reward),
                opt(r.mean_fitness),
                r.episodes.to_string(),
                format!("{:?}", r.policy_loss),
                format!("{:?}", r.value_loss),
                format!("{:?}", r.entropy),
            ];
            for c in &r.components.components {
                row.extend([c.mean, c.std, c.min, c.max].iter().map(|v| format!("{v:?}")));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

struct Slot {
    env: EnvironmentInstance,
    obs: Vec<f64>,
    dr_rng: Rng,
    episode: u64,
    ep_reward: f64,
    ep_fitness: f64,
}

struct Ctx<'a> {
    spec: &'a EnvironmentSpec,
    dr: Option<&'a DomainRandomizationConfig>,
    root: u64,
}

impl Ctx<'_> {
    fn start(&self, index: u64, dr_rng: &mut Rng, episode: u64) -> Result<(EnvironmentInstance, Vec<f64>), RlError> {
        let defaults = self.spec.defaults();
        let assignment = match self.dr {
            Some(dr) => sample_assignment(self.spec, dr, &defaults, dr_rng)?,
            None => defaults,
        };
        let seed = seed::derive(self.root, &[seed::tag("episode"), index, episode]);
        let mut env = make_environment(self.spec, &assignment, seed)?;
        let obs = env.reset();
        Ok((env, obs))
    }
}

/// Train a fresh policy with PPO on `reward`, resampling physics from `dr`
/// at every episode reset.
pub fn train_policy(
    spec: &EnvironmentSpec,
    dr: Option<&DomainRandomizationConfig>,
    reward: &RewardProgram,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<(PolicyCheckpoint, TrainingLog), RlError> {
    cfg.validate()?;
    spec.validate()?;
    if let Some(dr) = dr {
        validate_dr(spec, dr)?;
    }
    let bound;
    let reward = if reward.catalog() == spec.feature_catalog.as_slice() {
        reward
    } else {
        bound = reward.rebind(&spec.feature_catalog)?;
        &bound
    };
    let root = seed::derive(seed, &[cfg.seed]);
    let mut policy = PolicyCheckpoint::init(spec.obs_dim, spec.action_dim, root);
    let mut log = TrainingLog::default();
    if cfg.total_env_steps == 0 {
        return Ok((policy, log));
    }
    let meter = FitnessMeter::new(spec.env_id, &spec.feature_catalog)?;
    let ctx = Ctx { spec, dr, root };
    let mut slots = Vec::with_capacity(cfg.num_parallel_envs);
    for i in 0..cfg.num_parallel_envs as u64 {
        let mut dr_rng = seed::rng(root, &[seed::tag("dr"), i]);
        let (env, obs) = ctx.start(i, &mut dr_rng, 0)?;
        slots.push(Slot { env, obs, dr_rng, episode: 0, ep_reward: 0.0, ep_fitness: 0.0 });
    }
    let mut act_rng = seed::rng(root, &[seed::tag("act")]);
    let mut shuffle_rng = seed::rng(root, &[seed::tag("shuffle")]);
    let mut learner = PpoLearner::new(policy.params.len());
    let (n_env, t_len) = (cfg.num_parallel_envs, cfg.rollout_length);
    let updates = cfg.total_env_steps.div_ceil(n_env * t_len);
    let actor = policy.actor_net();
    let critic = policy.critic_net();
    let mut cache = Cache::default();
    let mut env_steps = 0;

    for update in 0..updates {
        let mut obs_n = vec![Vec::with_capacity(t_len); n_env];
        let mut raw = Vec::with_capacity(n_env * t_len);
        let mut acts = vec![Vec::with_capacity(t_len); n_env];
        let mut logps = vec![Vec::with_capacity(t_len); n_env];
        let mut rewards = vec![Vec::with_capacity(t_len); n_env];
        let mut values = vec![Vec::with_capacity(t_len + 1); n_env];
        let mut dones = vec![Vec::with_capacity(t_len); n_env];
        let mut stats = StatsAccumulator::new(reward);
        let (mut ep_rewards, mut ep_fits) = (Vec::new(), Vec::new());
        let log_std = policy.log_std().to_vec();

        for _ in 0..t_len {
            for (e, slot) in slots.iter_mut().enumerate() {
                let o = policy.obs_norm.normalize(&slot.obs);
                let mean = actor.forward(policy.actor_params(), &o, &mut cache);
                let v = critic.forward(policy.critic_params(), &o, &mut cache)[0];
                let a: Vec<f64> = mean
                    .iter()
                    .zip(&log_std)
                    .map(|(m, s)| {
                        let z: f64 = StandardNormal.sample(&mut act_rng);
                        m + s.exp() * z
                    })
                    .collect();
                let logp = gaussian_log_prob(&a, &mean, &log_std);
                let res = slot.env.step(&a)?;
                let ev = reward.evaluate(&res.features)?;
                stats.push(&ev.per_component, ev.total);
                slot.ep_reward += ev.total;
                slot.ep_fitness += meter.step(&res.features);
                raw.push(std::mem::take(&mut slot.obs));
                obs_n[e].push(o);
                acts[e].push(a);
                logps[e].push(logp);
                rewards[e].push(ev.total);
                values[e].push(v);
                dones[e].push(res.done());
                if res.done() {
                    ep_rewards.push(slot.ep_reward);
                    ep_fits.push(slot.ep_fitness);
                    slot.episode += 1;
                    let (env, obs) = ctx.start(e as u64, &mut slot.dr_rng, slot.episode)?;
                    slot.env = env;
                    slot.obs = obs;
                    slot.ep_reward = 0.0;
                    slot.ep_fitness = 0.0;
                } else {
                    slot.obs = res.observation;
                }
            }
        }
        env_steps += n_env * t_len;

        let mut batch = Batch::default();
        for (e, slot) in slots.iter().enumerate() {
            let o = policy.obs_norm.normalize(&slot.obs);
            values[e].push(critic.forward(policy.critic_params(), &o, &mut cache)[0]);
            let adv = gae(&rewards[e], &values[e], &dones[e], cfg.gamma, cfg.gae_lambda)?;
            batch.returns.extend(adv.iter().zip(&values[e]).map(|(a, v)| a + v));
            batch.advantages.extend(adv);
            batch.observations.append(&mut obs_n[e]);
            batch.actions.append(&mut acts[e]);
            batch.log_probs.append(&mut logps[e]);
        }
        normalize_advantages(&mut batch.advantages);
        policy.obs_norm.update(&raw);

        let mean_of = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
        let mut row = TrainingLogRow {
            update,
            env_steps,
            mean_episode_reward: mean_of(&ep_rewards),
            mean_fitness: mean_of(&ep_fits),
            episodes: ep_rewards.len(),
            components: stats.finish()?,
            policy_loss: f64::NAN,
            value_loss: f64::NAN,
            entropy: f64::NAN,
        };
        match learner.update(&mut policy, &batch, cfg, &mut shuffle_rng) {
            Ok(s) if s.policy_loss.is_finite() && s.value_loss.is_finite() && policy.is_finite() => {
                row.policy_loss = s.policy_loss;
                row.value_loss = s.value_loss;
                row.entropy = s.entropy;
                log::debug!(
                    "update {update}: steps {env_steps}, fitness {:?}, policy loss {:.4}, value loss {:.4}",
                    row.mean_fitness,
                    s.policy_loss,
                    s.value_loss
                );
                log.rows.push(row);
            }
            Ok(_) | Err(RlError::NonFiniteGradient) => {
                log.rows.push(row);
                return Err(RlError::DivergedTraining { update, log: Box::new(log) });
            }
            Err(e) => return Err(e),
        }
    }
    Ok((policy, log))
}
