use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{DomainRandomizationConfig, DrError, Interval, Provenance};
use crate::rapp::RappBounds;
use crate::seed::Rng;
use crate::sim::{EnvId, EnvironmentSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationKind {
    NoDr,
    PromptDr,
    RandomSampling,
    HumanDesigned,
}

/// Hand-authored reference randomization per environment.
pub fn human_designed(env: EnvId) -> DomainRandomizationConfig {
    let c = DomainRandomizationConfig::empty(Provenance::HumanDesigned);
    match env {
        EnvId::SprintCart => {
            c.with("friction", 0.25, 3.0).with("payload_mass", -1.0, 3.0).with("motor_strength", 0.9, 1.1)
        }
        EnvId::SpinDisk => {
            c.with("object_mass", 0.5, 1.5).with("hand_friction", 0.5, 2.0).with("motor_strength", 0.9, 1.1)
        }
        EnvId::GlobeBalance => c
            .with("ball_mass", 0.5, 2.0)
            .with("robot_payload_mass", -0.1, 0.5)
            .with("robot_motor_strength", 0.9, 1.1),
    }
}

fn bounds_for(bounds: Option<&RappBounds>) -> Result<&RappBounds, DrError> {
    bounds.ok_or_else(|| DrError::MissingBounds("*".into()))
}

pub fn generate_ablation(
    kind: AblationKind,
    bounds: Option<&RappBounds>,
    spec: &EnvironmentSpec,
    rng: &mut Rng,
) -> Result<DomainRandomizationConfig, DrError> {
    match kind {
        AblationKind::NoDr => Ok(DomainRandomizationConfig::no_dr()),
        AblationKind::HumanDesigned => Ok(human_designed(spec.env_id)),
        AblationKind::PromptDr => {
            let b = bounds_for(bounds)?;
            let mut c = DomainRandomizationConfig::empty(Provenance::PromptDr);
            for p in &spec.param_specs {
                let pb = b.get(&p.name).ok_or_else(|| DrError::MissingBounds(p.name.clone()))?;
                if let Some(iv) = pb.interval() {
                    c.intervals.insert(p.name.clone(), iv);
                }
            }
            Ok(c)
        }
        AblationKind::RandomSampling => {
            let b = bounds_for(bounds)?;
            let mut c = DomainRandomizationConfig::empty(Provenance::RandomSampling);
            for p in &spec.param_specs {
                let pb = b.get(&p.name).ok_or_else(|| DrError::MissingBounds(p.name.clone()))?;
                let Some(iv) = pb.interval() else { continue };
                if !rng.random_bool(0.5) {
                    continue;
                }
                let x = rng.random_range(iv.low..=iv.high);
                let y = rng.random_range(iv.low..=iv.high);
                c.intervals.insert(p.name.clone(), Interval::new(x.min(y), x.max(y)));
            }
            Ok(c)
        }
    }
}
