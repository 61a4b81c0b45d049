use rand::seq::SliceRandom;

use super::network::Cache;
use super::policy::{PolicyCheckpoint, LOG_STD_MAX, LOG_STD_MIN};
use super::{RlError, TrainConfig};
use crate::seed::Rng;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Generalized advantage estimation over one sequence.
pub fn gae(rewards: &[f64], values: &[f64], dones: &[bool], gamma: f64, lambda: f64) -> Result<Vec<f64>, RlError> {
    if values.len() != rewards.len() + 1 || dones.len() != rewards.len() {
        return Err(RlError::LengthMismatch { rewards: rewards.len(), values: values.len(), dones: dones.len() });
    }
    let mut adv = vec![0.0; rewards.len()];
    let mut next = 0.0;
    for t in (0..rewards.len()).rev() {
        let keep = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * values[t + 1] * keep - values[t];
        next = delta + gamma * lambda * keep * next;
        adv[t] = next;
    }
    Ok(adv)
}

/// Rescale to mean 0, std 1; no-op for fewer than two entries.
pub fn normalize_advantages(adv: &mut [f64]) {
    if adv.len() < 2 {
        return;
    }
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let std = (adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n).sqrt();
    for a in adv.iter_mut() {
        *a = (*a - mean) / (std + 1e-8);
    }
}

pub fn gaussian_log_prob(action: &[f64], mean: &[f64], log_std: &[f64]) -> f64 {
    action
        .iter()
        .zip(mean)
        .zip(log_std)
        .map(|((a, m), s)| {
            let z = (a - m) / s.exp();
            -0.5 * z * z - s - 0.5 * LN_2PI
        })
        .sum()
}

/// Collected transitions. Observations are stored already normalized.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Batch {
    pub observations: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub log_probs: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossParts {
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    pub total: f64,
}

/// Loss over the transitions `idx` and its gradient w.r.t. `policy.params`.
///
/// `total = policy + value_coef * value - entropy_coef * entropy`, where
/// `policy` is the negated clipped surrogate and `value = 0.5 * mean((V - R)^2)`.
pub fn loss_and_grad(policy: &PolicyCheckpoint, batch: &Batch, idx: &[usize], cfg: &TrainConfig) -> (LossParts, Vec<f64>) {
    let actor = policy.actor_net();
    let critic = policy.critic_net();
    let (na, nc) = (policy.actor_len(), policy.critic_len());
    let log_std: Vec<f64> = policy.log_std().iter().map(|s| s.clamp(LOG_STD_MIN, LOG_STD_MAX)).collect();
    let mut grad = vec![0.0; policy.params.len()];
    let (ga, rest) = grad.split_at_mut(na);
    let (gc, gs) = rest.split_at_mut(nc);
    let n = idx.len().max(1) as f64;
    let mut parts = LossParts::default();
    let mut cache = Cache::default();
    let mut d_mean = vec![0.0; policy.action_dim];
    for &i in idx {
        let obs = &batch.observations[i];
        let act = &batch.actions[i];
        let adv = batch.advantages[i];
        let mean = actor.forward(policy.actor_params(), obs, &mut cache);
        let logp = gaussian_log_prob(act, &mean, &log_std);
        let ratio = (logp - batch.log_probs[i]).exp();
        let clipped = ratio.clamp(1.0 - cfg.clip_ratio, 1.0 + cfg.clip_ratio);
        let (unc, clp) = (ratio * adv, clipped * adv);
        parts.policy -= unc.min(clp) / n;
        // Gradient flows only through the unclipped branch when it is the min.
        let d_logp = if unc <= clp { -ratio * adv / n } else { 0.0 };
        if d_logp != 0.0 {
            for d in 0..policy.action_dim {
                let sigma2 = (2.0 * log_std[d]).exp();
                let diff = act[d] - mean[d];
                d_mean[d] = d_logp * diff / sigma2;
                let s = policy.log_std()[d];
                if (LOG_STD_MIN..=LOG_STD_MAX).contains(&s) {
                    gs[d] += d_logp * (diff * diff / sigma2 - 1.0);
                }
            }
            actor.backward(policy.actor_params(), &cache, &d_mean, ga);
        }
        let v = critic.forward(policy.critic_params(), obs, &mut cache)[0];
        let err = v - batch.returns[i];
        parts.value += 0.5 * err * err / n;
        critic.backward(policy.critic_params(), &cache, &[cfg.value_coef * err / n], gc);
    }
    parts.entropy = log_std.iter().map(|s| s + 0.5 * (LN_2PI + 1.0)).sum();
    for (d, s) in policy.log_std().iter().enumerate() {
        if (LOG_STD_MIN..=LOG_STD_MAX).contains(s) {
            gs[d] -= cfg.entropy_coef;
        }
    }
    parts.total = parts.policy + cfg.value_coef * parts.value - cfg.entropy_coef * parts.entropy;
    (parts, grad)
}

/// Adam state over the full parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PpoLearner {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
}

impl PpoLearner {
    pub fn new(param_count: usize) -> Self {
        Self { m: vec![0.0; param_count], v: vec![0.0; param_count], t: 0 }
    }

    /// One Adam step on `grad` after clipping its global norm.
    pub fn step(&mut self, params: &mut [f64], grad: &mut [f64], cfg: &TrainConfig) -> Result<(), RlError> {
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if !norm.is_finite() {
            return Err(RlError::NonFiniteGradient);
        }
        if norm > cfg.max_grad_norm {
            let s = cfg.max_grad_norm / norm;
            grad.iter_mut().for_each(|g| *g *= s);
        }
        let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
        self.t += 1;
        let c1 = 1.0 - b1.powi(self.t as i32);
        let c2 = 1.0 - b2.powi(self.t as i32);
        for k in 0..params.len() {
            self.m[k] = b1 * self.m[k] + (1.0 - b1) * grad[k];
            self.v[k] = b2 * self.v[k] + (1.0 - b2) * grad[k] * grad[k];
            params[k] -= cfg.learning_rate * (self.m[k] / c1) / ((self.v[k] / c2).sqrt() + eps);
        }
        Ok(())
    }

    /// Epochs of shuffled minibatch steps over `batch`. Returns losses
    /// averaged over every minibatch.
    pub fn update(
        &mut self,
        policy: &mut PolicyCheckpoint,
        batch: &Batch,
        cfg: &TrainConfig,
        rng: &mut Rng,
    ) -> Result<UpdateStats, RlError> {
        let mut idx: Vec<usize> = (0..batch.len()).collect();
        let mut stats = UpdateStats::default();
        let mut count = 0.0;
        for _ in 0..cfg.epochs_per_update {
            idx.shuffle(rng);
            for chunk in idx.chunks(cfg.minibatch_size.max(1)) {
                let (parts, mut grad) = loss_and_grad(policy, batch, chunk, cfg);
                if !parts.total.is_finite() {
                    return Err(RlError::NonFiniteGradient);
                }
                self.step(&mut policy.params, &mut grad, cfg)?;
                policy.clamp_log_std();
                stats.policy_loss += parts.policy;
                stats.value_loss += parts.value;
                stats.entropy += parts.entropy;
                count += 1.0;
            }
        }
        if count > 0.0 {
            stats.policy_loss /= count;
            stats.value_loss /= count;
            stats.entropy /= count;
        }
        Ok(stats)
    }
}

/// A single update with fresh optimizer state.
pub fn ppo_update(
    policy: &PolicyCheckpoint,
    batch: &Batch,
    cfg: &TrainConfig,
    rng: &mut Rng,
) -> Result<PolicyCheckpoint, RlError> {
    let mut p = policy.clone();
    PpoLearner::new(p.params.len()).update(&mut p, batch, cfg, rng)?;
    Ok(p)
}
