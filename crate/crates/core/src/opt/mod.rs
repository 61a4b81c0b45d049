//! Black-box optimization over DR configurations: cross-entropy method and
//! GP-UCB Bayesian optimization.

mod bayrn;
mod cem;
mod gp;
mod space;

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bayrn::{bayrn_optimize, BayrnConfig};
pub use cem::{cem_optimize, CemConfig, CemInit, CemOutcome, CemState};
pub use gp::{cholesky, gp_fit, matern52, ucb, GaussianProcessModel, KernelParams};
pub use space::ConfigSpace;

use crate::dr::Interval;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptError {
    #[error("kernel hyperparameters must be positive")]
    NonPositiveHyperparameter,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("kernel matrix is not positive definite")]
    FactorizationFailure,
    #[error("negative variance {0}")]
    NegativeVariance(f64),
    #[error("no training data")]
    NoData,
    #[error("non-finite input")]
    NonFinite,
    #[error("elite count {elite} exceeds samples per iteration {samples}")]
    EliteCountExceedsSamples { elite: usize, samples: usize },
    #[error("search box must be finite with low <= high")]
    InvalidBox,
    #[error("invalid optimizer config: {0}")]
    InvalidConfig(String),
    #[error("writing history: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalFlag {
    Init,
    Bo,
    Cem,
}

impl EvalFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            EvalFlag::Init => "init",
            EvalFlag::Bo => "bo",
            EvalFlag::Cem => "cem",
        }
    }
}

mod objective_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_some(v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NEG_INFINITY))
    }
}

/// One objective call. Failed calls carry `-inf` and the error text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub iteration: usize,
    pub flag: EvalFlag,
    pub x: Vec<f64>,
    #[serde(with = "objective_serde")]
    pub objective: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip)]
    pub wall_clock_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptOutcome {
    pub best: Vec<f64>,
    #[serde(with = "objective_serde")]
    pub best_objective: f64,
    pub history: Vec<EvalRecord>,
}

/// Index of the highest objective, earliest on ties.
pub fn best_index(history: &[EvalRecord]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, r) in history.iter().enumerate() {
        if best.is_none_or(|b| r.objective > history[b].objective) {
            best = Some(i);
        }
    }
    best
}

fn call<F, E>(objective: &mut F, x: &[f64], iteration: usize, flag: EvalFlag) -> EvalRecord
where
    F: FnMut(&[f64]) -> Result<f64, E>,
    E: std::fmt::Display,
{
    let start = std::time::Instant::now();
    let (objective, error) = match objective(x) {
        Ok(v) if !v.is_nan() => (v, None),
        Ok(v) => (f64::NEG_INFINITY, Some(format!("objective returned {v}"))),
        Err(e) => {
            log::warn!("objective call {iteration} failed: {e}");
            (f64::NEG_INFINITY, Some(e.to_string()))
        }
    };
    EvalRecord { iteration, flag, x: x.to_vec(), objective, error, wall_clock_s: start.elapsed().as_secs_f64() }
}

fn outcome(history: Vec<EvalRecord>) -> OptOutcome {
    let b = best_index(&history).expect("at least one evaluation");
    OptOutcome { best: history[b].x.clone(), best_objective: history[b].objective, history }
}

fn check_box(bounds: &[Interval], finite: bool) -> Result<(), OptError> {
    if bounds.is_empty() {
        return Err(OptError::InvalidBox);
    }
    for b in bounds {
        if b.low.is_nan() || b.high.is_nan() || b.low > b.high || (finite && !(b.low.is_finite() && b.high.is_finite())) {
            return Err(OptError::InvalidBox);
        }
    }
    Ok(())
}

/// History CSV: iteration, flag, objective, wall clock, then one column per
/// coordinate. Failed calls have an empty objective.
pub fn write_history_csv<W: Write>(history: &[EvalRecord], coord_names: &[String], w: W) -> Result<(), OptError> {
    let io = |e: csv::Error| OptError::Io(e.to_string());
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["iteration".to_string(), "flag".into(), "objective".into(), "wall_clock_s".into()];
    header.extend(coord_names.iter().cloned());
    out.write_record(&header).map_err(io)?;
    for r in history {
        let mut row = vec![
            r.iteration.to_string(),
            r.flag.as_str().to_string(),
            if r.objective.is_finite() { r.objective.to_string() } else { String::new() },
            format!("{:.3}", r.wall_clock_s),
        ];
        row.extend(r.x.iter().map(f64::to_string));
        out.write_record(&row).map_err(io)?;
    }
    out.flush().map_err(|e| OptError::Io(e.to_string()))
}
