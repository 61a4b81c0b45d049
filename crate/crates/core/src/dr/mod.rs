//! Domain-randomization configs: prompting, parsing, bounding and ablations.

mod ablation;
mod batch;
mod config;
mod parse;
mod prompt;

use thiserror::Error;

pub use ablation::{generate_ablation, human_designed, AblationKind};
pub use batch::{propose_batch, BatchReport, ProposalAttempt};
pub use config::{DomainRandomizationConfig, Interval, Provenance};
pub use parse::{clamp_validate, parse_dr_response, Adjustment, ValidationPolicy};
pub use prompt::{build_dr_prompt, PromptVariant};

use crate::llm::LlmError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DrError {
    #[error("no parameters to randomize")]
    EmptyParameterSet,
    #[error("no bounds available for {0:?}")]
    MissingBounds(String),
    #[error("response has no ```dr block")]
    MissingBlock,
    #[error("unknown parameter {0:?}")]
    UnknownParameter(String),
    #[error("parameter {0:?} listed twice")]
    DuplicateParameter(String),
    #[error("interval for {name:?} has low > high")]
    MalformedInterval { name: String },
    #[error("cannot parse line {0:?}")]
    MalformedLine(String),
    #[error("interval for {name:?} leaves its bounds {bound}")]
    OutOfRappBounds { name: String, bound: Interval },
    #[error("interval for {name:?} is disjoint from its bounds")]
    EmptyAfterClamp { name: String },
    #[error("batch size must be at least 1")]
    EmptyBatch,
    #[error("all {attempts} proposal attempts failed; last error: {last}")]
    AllProposalsFailed { attempts: usize, last: String },
    #[error(transparent)]
    Source(#[from] LlmError),
}
