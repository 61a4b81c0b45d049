use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{call, check_box, outcome, EvalFlag, EvalRecord, OptError, OptOutcome};
use crate::dr::Interval;
use crate::seed::Rng;

const MAX_REJECTIONS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CemConfig {
    pub iterations: usize,
    pub samples_per_iter: usize,
    pub elite_count: usize,
    pub variance_floor: f64,
}

impl Default for CemConfig {
    fn default() -> Self {
        Self { iterations: 4, samples_per_iter: 4, elite_count: 2, variance_floor: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CemInit {
    /// Explicit starting Gaussian, e.g. simulator defaults with variance 1.
    DefaultMeanVar { mean: Vec<f64>, variance: Vec<f64> },
    /// Mean and variance of `samples_per_iter` uniform draws in the box.
    RappUniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CemState {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub iteration: usize,
    /// Mean objective of the elite set after each iteration.
    pub elite_objective: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CemOutcome {
    pub outcome: OptOutcome,
    pub state: CemState,
}

fn moments(points: &[&[f64]], d: usize, floor: f64) -> (Vec<f64>, Vec<f64>) {
    let n = points.len() as f64;
    let mean: Vec<f64> = (0..d).map(|j| points.iter().map(|p| p[j]).sum::<f64>() / n).collect();
    let var = (0..d)
        .map(|j| (points.iter().map(|p| (p[j] - mean[j]).powi(2)).sum::<f64>() / n).max(floor))
        .collect();
    (mean, var)
}

fn truncated_normal(mean: f64, sd: f64, b: &Interval, rng: &mut Rng) -> f64 {
    let mut v = mean;
    for _ in 0..MAX_REJECTIONS {
        let z: f64 = StandardNormal.sample(rng);
        v = mean + sd * z;
        if v >= b.low && v <= b.high {
            return v;
        }
    }
    v.clamp(b.low, b.high)
}

/// Cross-entropy method with per-coordinate Gaussians truncated to the box.
/// Calls `objective` exactly `iterations * samples_per_iter` times.
pub fn cem_optimize<F, E>(
    mut objective: F,
    init: CemInit,
    bounds: &[Interval],
    cfg: &CemConfig,
    rng: &mut Rng,
) -> Result<CemOutcome, OptError>
where
    F: FnMut(&[f64]) -> Result<f64, E>,
    E: std::fmt::Display,
{
    if cfg.elite_count > cfg.samples_per_iter {
        return Err(OptError::EliteCountExceedsSamples { elite: cfg.elite_count, samples: cfg.samples_per_iter });
    }
    if cfg.iterations == 0 || cfg.elite_count == 0 || !(cfg.variance_floor > 0.0) {
        return Err(OptError::InvalidConfig("need iterations >= 1, elite_count >= 1, variance_floor > 0".into()));
    }
    let d = bounds.len();
    let (mut mean, mut variance) = match init {
        CemInit::DefaultMeanVar { mean, variance } => {
            check_box(bounds, false)?;
            for got in [mean.len(), variance.len()] {
                if got != d {
                    return Err(OptError::DimensionMismatch { expected: d, got });
                }
            }
            let variance = variance.iter().map(|v| v.max(cfg.variance_floor)).collect();
            (mean, variance)
        }
        CemInit::RappUniform => {
            check_box(bounds, true)?;
            let draws: Vec<Vec<f64>> = (0..cfg.samples_per_iter.max(1))
                .map(|_| bounds.iter().map(|b| b.low + rng.random::<f64>() * b.width()).collect())
                .collect();
            let refs: Vec<&[f64]> = draws.iter().map(Vec::as_slice).collect();
            moments(&refs, d, cfg.variance_floor)
        }
    };
    let mut history: Vec<EvalRecord> = Vec::with_capacity(cfg.iterations * cfg.samples_per_iter);
    let mut elite_objective = Vec::with_capacity(cfg.iterations);
    for it in 0..cfg.iterations {
        let start = history.len();
        for _ in 0..cfg.samples_per_iter {
            let x: Vec<f64> =
                (0..d).map(|j| truncated_normal(mean[j], variance[j].sqrt(), &bounds[j], rng)).collect();
            history.push(call(&mut objective, &x, it, EvalFlag::Cem));
        }
        let round = &history[start..];
        let mut order: Vec<usize> = (0..round.len()).collect();
        order.sort_by(|&a, &b| round[b].objective.total_cmp(&round[a].objective));
        let elites: Vec<&[f64]> = order[..cfg.elite_count].iter().map(|&i| round[i].x.as_slice()).collect();
        elite_objective.push(order[..cfg.elite_count].iter().map(|&i| round[i].objective).sum::<f64>() / cfg.elite_count as f64);
        (mean, variance) = moments(&elites, d, cfg.variance_floor);
    }
    let state = CemState { mean, variance, iteration: cfg.iterations, elite_objective };
    Ok(CemOutcome { outcome: outcome(history), state })
}
