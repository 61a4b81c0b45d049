use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::gp::{gp_fit, ucb, KernelParams};
use super::{call, check_box, outcome, EvalFlag, EvalRecord, OptError, OptOutcome};
use crate::dr::Interval;
use crate::seed::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BayrnConfig {
    pub n_init: usize,
    pub n_iter: usize,
    pub kernel: KernelParams,
    pub noise_variance: f64,
    pub kappa: f64,
    /// Accepted for config compatibility; the acquisition does not use it.
    pub xi: f64,
    pub acquisition_candidates: usize,
}

impl Default for BayrnConfig {
    fn default() -> Self {
        Self {
            n_init: 8,
            n_iter: 8,
            kernel: KernelParams::default(),
            noise_variance: 1e-4,
            kappa: 5.0,
            xi: 1.0,
            acquisition_candidates: 2048,
        }
    }
}

fn to_unit(x: &[f64], bounds: &[Interval]) -> Vec<f64> {
    x.iter()
        .zip(bounds)
        .map(|(v, b)| if b.width() > 0.0 { (v - b.low) / b.width() } else { 0.0 })
        .collect()
}

fn from_unit(u: &[f64], bounds: &[Interval]) -> Vec<f64> {
    u.iter().zip(bounds).map(|(v, b)| b.low + v * b.width()).collect()
}

/// GP-UCB over the box: `n_init` uniform samples, then `n_iter` sequential
/// acquisitions. Calls `objective` exactly `n_init + n_iter` times.
pub fn bayrn_optimize<F, E>(mut objective: F, bounds: &[Interval], cfg: &BayrnConfig, rng: &mut Rng) -> Result<OptOutcome, OptError>
where
    F: FnMut(&[f64]) -> Result<f64, E>,
    E: std::fmt::Display,
{
    if cfg.n_init == 0 {
        return Err(OptError::InvalidConfig("n_init must be >= 1".into()));
    }
    if cfg.acquisition_candidates == 0 || !(cfg.kappa >= 0.0) {
        return Err(OptError::InvalidConfig("need acquisition_candidates >= 1 and kappa >= 0".into()));
    }
    cfg.kernel.validate()?;
    check_box(bounds, true)?;
    let d = bounds.len();
    let uniform = |rng: &mut Rng| (0..d).map(|_| rng.random::<f64>()).collect::<Vec<f64>>();
    let mut history: Vec<EvalRecord> = Vec::with_capacity(cfg.n_init + cfg.n_iter);
    for i in 0..cfg.n_init {
        let x = from_unit(&uniform(rng), bounds);
        history.push(call(&mut objective, &x, i, EvalFlag::Init));
    }
    for t in 0..cfg.n_iter {
        let ok: Vec<&EvalRecord> = history.iter().filter(|r| r.objective.is_finite()).collect();
        let u = if ok.is_empty() {
            uniform(rng)
        } else {
            let xs: Vec<Vec<f64>> = ok.iter().map(|r| to_unit(&r.x, bounds)).collect();
            let n = ok.len() as f64;
            let mean = ok.iter().map(|r| r.objective).sum::<f64>() / n;
            let std = (ok.iter().map(|r| (r.objective - mean).powi(2)).sum::<f64>() / n).sqrt();
            let scale = if std > 1e-12 { std } else { 1.0 };
            let ys: Vec<f64> = ok.iter().map(|r| (r.objective - mean) / scale).collect();
            let model = gp_fit(&xs, &ys, cfg.kernel, cfg.noise_variance)?;
            let incumbent = ok
                .iter()
                .enumerate()
                .fold(None::<(usize, f64)>, |b, (i, r)| match b {
                    Some((_, v)) if v >= r.objective => b,
                    _ => Some((i, r.objective)),
                })
                .map(|(i, _)| xs[i].clone())
                .expect("nonempty");
            let mut best = incumbent.clone();
            let (m, v) = model.posterior(&incumbent)?;
            let mut best_a = ucb(m, v, cfg.kappa)?;
            for _ in 0..cfg.acquisition_candidates {
                let c = uniform(rng);
                let (m, v) = model.posterior(&c)?;
                let a = ucb(m, v, cfg.kappa)?;
                if a > best_a {
                    best_a = a;
                    best = c;
                }
            }
            best
        };
        let x = from_unit(&u, bounds);
        history.push(call(&mut objective, &x, cfg.n_init + t, EvalFlag::Bo));
    }
    Ok(outcome(history))
}
