use serde::{Deserialize, Serialize};

use super::{DomainRandomizationConfig, DrError, Interval, Provenance};
use crate::llm::extract_fenced;
use crate::rapp::RappBounds;
use crate::sim::EnvironmentSpec;

/// Parse the first ```dr block of a response into an llm-provenance config.
pub fn parse_dr_response(text: &str, spec: &EnvironmentSpec) -> Result<DomainRandomizationConfig, DrError> {
    let block = extract_fenced(text, "dr").ok_or(DrError::MissingBlock)?;
    let mut cfg = DomainRandomizationConfig::empty(Provenance::Llm);
    for raw in block.lines() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (name, rest) = line.split_once(':').ok_or_else(|| DrError::MalformedLine(raw.to_string()))?;
        let name = name.trim();
        let rest = rest.trim().trim_start_matches('[').trim_end_matches(']');
        let (lo, hi) = rest.split_once(',').ok_or_else(|| DrError::MalformedLine(raw.to_string()))?;
        let parse = |s: &str| s.trim().parse::<f64>().ok().filter(|v| v.is_finite());
        let (Some(low), Some(high)) = (parse(lo), parse(hi)) else {
            return Err(DrError::MalformedLine(raw.to_string()));
        };
        if spec.param(name).is_none() {
            return Err(DrError::UnknownParameter(name.to_string()));
        }
        if low > high {
            return Err(DrError::MalformedInterval { name: name.to_string() });
        }
        if cfg.intervals.insert(name.to_string(), Interval::new(low, high)).is_some() {
            return Err(DrError::DuplicateParameter(name.to_string()));
        }
    }
    Ok(cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidationPolicy {
    Reject,
    #[default]
    Clamp,
}

/// A change made by clamping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adjustment {
    pub name: String,
    pub proposed: Option<Interval>,
    /// `None` when the parameter was dropped for lack of bounds.
    pub clamped: Option<Interval>,
}

/// Force every interval inside its bounds.
///
/// Parameters whose bounds are empty cannot be randomized: clamp mode drops
/// them, reject mode errors.
pub fn clamp_validate(
    config: &DomainRandomizationConfig,
    bounds: &RappBounds,
    spec: &EnvironmentSpec,
    policy: ValidationPolicy,
) -> Result<(DomainRandomizationConfig, Vec<Adjustment>), DrError> {
    let mut out = DomainRandomizationConfig::empty(config.provenance);
    let mut adjustments = Vec::new();
    for (name, iv) in &config.intervals {
        if spec.param(name).is_none() {
            return Err(DrError::UnknownParameter(name.clone()));
        }
        if iv.low > iv.high {
            return Err(DrError::MalformedInterval { name: name.clone() });
        }
        let bound = match bounds.get(name) {
            None => return Err(DrError::MissingBounds(name.clone())),
            Some(b) => b.interval(),
        };
        let Some(bound) = bound else {
            match policy {
                ValidationPolicy::Reject => return Err(DrError::EmptyAfterClamp { name: name.clone() }),
                ValidationPolicy::Clamp => {
                    log::warn!("dropping {name}: no feasible bounds");
                    adjustments.push(Adjustment { name: name.clone(), proposed: Some(*iv), clamped: None });
                    continue;
                }
            }
        };
        if bound.contains_interval(iv) {
            out.intervals.insert(name.clone(), *iv);
            continue;
        }
        match policy {
            ValidationPolicy::Reject => return Err(DrError::OutOfRappBounds { name: name.clone(), bound }),
            ValidationPolicy::Clamp => {
                let c = iv.intersect(&bound).ok_or_else(|| DrError::EmptyAfterClamp { name: name.clone() })?;
                log::info!("clamped {name} from {iv} to {c}");
                adjustments.push(Adjustment { name: name.clone(), proposed: Some(*iv), clamped: Some(c) });
                out.intervals.insert(name.clone(), c);
            }
        }
    }
    Ok((out, adjustments))
}
