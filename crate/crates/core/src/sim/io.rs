//! JSON documents for environment and target-world specs.

use serde::{Deserialize, Serialize};

use super::env::{EnvId, EnvironmentSpec, TargetWorldSpec};
use super::params::{GridKind, PhysicsAssignment, PhysicsParameterSpec, ValidRange};
use super::SimError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamDocument {
    pub name: String,
    pub default: f64,
    /// `null` means unbounded below.
    pub valid_min: Option<f64>,
    /// `null` means unbounded above.
    pub valid_max: Option<f64>,
    pub grid_kind: GridKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetDocument {
    pub assignment: PhysicsAssignment,
    pub obs_noise_std: f64,
    pub action_delay_steps: usize,
    pub torque_ripple_amp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentDocument {
    pub env_id: EnvId,
    pub horizon: usize,
    pub dt: f64,
    pub params: Vec<ParamDocument>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<TargetDocument>,
}

fn finite_or_none(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

impl EnvironmentDocument {
    pub fn from_spec(spec: &EnvironmentSpec, target: Option<&TargetWorldSpec>) -> Self {
        Self {
            env_id: spec.env_id,
            horizon: spec.horizon,
            dt: spec.dt,
            params: spec
                .param_specs
                .iter()
                .map(|p| ParamDocument {
                    name: p.name.clone(),
                    default: p.default,
                    valid_min: finite_or_none(p.valid_range.min),
                    valid_max: finite_or_none(p.valid_range.max),
                    grid_kind: p.grid_kind,
                })
                .collect(),
            target: target.map(|t| TargetDocument {
                assignment: t.target_assignment.clone(),
                obs_noise_std: t.obs_noise_std,
                action_delay_steps: t.action_delay_steps,
                torque_ripple_amp: t.torque_ripple_amp,
            }),
        }
    }

    /// Build and validate the environment. Units and the feature catalog come from
    /// the built-in environment.
    pub fn to_spec(&self) -> Result<(EnvironmentSpec, Option<TargetWorldSpec>), SimError> {
        let base = EnvironmentSpec::builtin(self.env_id);
        let params = self
            .params
            .iter()
            .map(|d| {
                let unit = base.param(&d.name).ok_or_else(|| SimError::UnknownParameter(d.name.clone()))?.unit.clone();
                Ok(PhysicsParameterSpec {
                    name: d.name.clone(),
                    default: d.default,
                    valid_range: ValidRange::new(
                        d.valid_min.unwrap_or(f64::NEG_INFINITY),
                        d.valid_max.unwrap_or(f64::INFINITY),
                    ),
                    grid_kind: d.grid_kind,
                    unit,
                })
            })
            .collect::<Result<Vec<_>, SimError>>()?;
        let spec = EnvironmentSpec { horizon: self.horizon, dt: self.dt, param_specs: params, ..base };
        spec.validate()?;
        let target = match &self.target {
            None => None,
            Some(t) => {
                let tw = TargetWorldSpec {
                    base_env_id: self.env_id,
                    target_assignment: t.assignment.clone(),
                    obs_noise_std: t.obs_noise_std,
                    action_delay_steps: t.action_delay_steps,
                    torque_ripple_amp: t.torque_ripple_amp,
                };
                tw.validate(&spec)?;
                Some(tw)
            }
        };
        Ok((spec, target))
    }

    pub fn from_json(text: &str) -> Result<Self, SimError> {
        serde_json::from_str(text).map_err(|e| SimError::InvalidSpec(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("document serializes")
    }
}
