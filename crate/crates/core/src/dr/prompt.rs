use serde::{Deserialize, Serialize};

use super::DrError;
use crate::rapp::RappBounds;
use crate::sim::EnvironmentSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptVariant {
    Rapp,
    NoPrior,
    Uninformative,
}

const INSTRUCTION: &str = "Choose a subset of these parameters to randomize during training so that the policy \
transfers to an unknown real system. For every parameter you choose, give a sampling range. Parameters you leave \
out stay at their default values.";

const FORMAT: &str = "Answer with one fenced block tagged dr containing one line per chosen parameter, \
formatted as `name: low, high`, for example:\n```dr\nfriction: 0.5, 1.5\n```";

/// Build the proposal prompt. Parameters appear in spec order; for the
/// `rapp` variant parameters with empty bounds are left out.
pub fn build_dr_prompt(
    spec: &EnvironmentSpec,
    bounds: Option<&RappBounds>,
    variant: PromptVariant,
    task: &str,
) -> Result<String, DrError> {
    let mut listing = Vec::new();
    for p in &spec.param_specs {
        let line = match variant {
            PromptVariant::NoPrior => p.name.clone(),
            PromptVariant::Uninformative => {
                let g = p.grid();
                format!("{}: [{:?}, {:?}]", p.name, g[0], g[g.len() - 1])
            }
            PromptVariant::Rapp => {
                let b = bounds.ok_or_else(|| DrError::MissingBounds(p.name.clone()))?;
                match b.get(&p.name) {
                    None => return Err(DrError::MissingBounds(p.name.clone())),
                    Some(pb) => match pb.interval() {
                        Some(iv) => format!("{}: {}", p.name, iv),
                        None => continue,
                    },
                }
            }
        };
        listing.push(line);
    }
    if listing.is_empty() {
        return Err(DrError::EmptyParameterSet);
    }
    let heading = match variant {
        PromptVariant::Rapp => "Randomizable parameters with the range over which the current policy still succeeds:",
        PromptVariant::Uninformative => "Randomizable parameters with their search ranges:",
        PromptVariant::NoPrior => "Randomizable parameters:",
    };
    let mut out = String::new();
    out.push_str(task.trim());
    out.push_str("\n\n");
    out.push_str(heading);
    out.push('\n');
    for l in &listing {
        out.push_str(l);
        out.push('\n');
    }
    if variant != PromptVariant::NoPrior {
        out.push_str("\nDefault values:\n");
        for p in &spec.param_specs {
            out.push_str(&format!("- {} = {:?} {}\n", p.name, p.default, p.unit).replace(" \n", "\n"));
        }
    }
    out.push('\n');
    out.push_str(INSTRUCTION);
    out.push_str("\n\n");
    out.push_str(FORMAT);
    out.push('\n');
    Ok(out)
}
