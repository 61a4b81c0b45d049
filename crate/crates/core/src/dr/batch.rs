use serde::{Deserialize, Serialize};

use super::{clamp_validate, parse_dr_response, Adjustment, DomainRandomizationConfig, DrError, Provenance, ValidationPolicy};
use crate::llm::{llm_complete, ChatMessage, LlmError, ProposalSource, RequestRole};
use crate::rapp::RappBounds;
use crate::sim::EnvironmentSpec;

/// Retries after the first failed attempt of each proposal.
pub const MAX_RETRIES: usize = 3;

pub const SYSTEM_PROMPT: &str = "You design domain randomization for training robot controllers in simulation.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalAttempt {
    pub proposal: usize,
    pub attempt: usize,
    pub response: Option<String>,
    pub error: Option<String>,
    pub adjustments: Vec<Adjustment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub configs: Vec<DomainRandomizationConfig>,
    /// Retries used by each accepted config, aligned with `configs`.
    pub retries: Vec<usize>,
    /// Proposal indices that exhausted their retries.
    pub failed: Vec<usize>,
    pub attempts: Vec<ProposalAttempt>,
}

/// Request `m` configs one at a time, validating each against `bounds`.
#[allow(clippy::too_many_arguments)]
pub fn propose_batch(
    source: &dyn ProposalSource,
    prompt: &str,
    m: usize,
    spec: &EnvironmentSpec,
    bounds: &RappBounds,
    policy: ValidationPolicy,
    provenance: Provenance,
) -> Result<BatchReport, DrError> {
    if m == 0 {
        return Err(DrError::EmptyBatch);
    }
    let messages = [ChatMessage::system(SYSTEM_PROMPT), ChatMessage::user(prompt)];
    let mut report = BatchReport { configs: vec![], retries: vec![], failed: vec![], attempts: vec![] };
    let mut last = String::new();
    for proposal in 0..m {
        let mut accepted = false;
        for attempt in 0..=MAX_RETRIES {
            let (response, outcome) = match llm_complete(source, RequestRole::Dr, &messages) {
                Err(e @ LlmError::PlaybookExhausted { .. }) => return Err(e.into()),
                Err(e) => (None, Err(DrError::from(e))),
                Ok(c) => {
                    let r = parse_dr_response(&c.text, spec).and_then(|cfg| clamp_validate(&cfg, bounds, spec, policy));
                    (Some(c.text), r)
                }
            };
            match outcome {
                Ok((mut cfg, adjustments)) => {
                    cfg.provenance = provenance;
                    report.attempts.push(ProposalAttempt { proposal, attempt, response, error: None, adjustments });
                    report.configs.push(cfg);
                    report.retries.push(attempt);
                    accepted = true;
                    break;
                }
                Err(e) => {
                    log::warn!("proposal {proposal} attempt {attempt} rejected: {e}");
                    last = e.to_string();
                    report.attempts.push(ProposalAttempt {
                        proposal,
                        attempt,
                        response,
                        error: Some(last.clone()),
                        adjustments: vec![],
                    });
                }
            }
        }
        if !accepted {
            report.failed.push(proposal);
        }
    }
    if report.configs.is_empty() {
        return Err(DrError::AllProposalsFailed { attempts: report.attempts.len(), last });
    }
    Ok(report)
}
