//! Run-directory orchestration of the full experiment: reward search,
//! physics prior, DR proposals, final training, transfer evaluation,
//! black-box baselines and reporting.

mod config;
mod manifest;
mod report;
mod stages;

use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{
    BaselineSettings, Budgets, DrSettings, EurekaSettings, ExperimentConfig, Method, RappSettings, SourceConfig,
    StageToggles,
};
pub use manifest::{sha256_file, RunManifest, StageRecord, MANIFEST_FILE, TIMING_FILE, VOLATILE_FILES};
pub use report::{aggregate, cmd_report, AggregateRow, PolicyRecord, PolicyStatus};
pub use stages::{
    cmd_baseline, cmd_dr_propose, cmd_dr_train, cmd_eureka, cmd_rapp, cmd_transfer_eval, run_pipeline,
};

use crate::dr::DrError;
use crate::llm::{redact, ChatMessage, Completion, LlmError, ProposalSource, RequestRole, API_KEY_ENV};
use crate::opt::OptError;
use crate::rapp::RappError;
use crate::reward::RewardError;
use crate::rl::RlError;
use crate::search::SearchError;
use crate::sim::SimError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("missing upstream artifact {0:?}")]
    MissingArtifact(String),
    #[error("artifact {0:?} does not match its recorded hash")]
    TamperedArtifact(String),
    #[error("run has no completed stage")]
    EmptyRun,
    #[error("corrupt manifest: {0}")]
    CorruptManifest(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Rapp(#[from] RappError),
    #[error(transparent)]
    Dr(#[from] DrError),
    #[error(transparent)]
    Opt(#[from] OptError),
    #[error(transparent)]
    Rl(#[from] RlError),
    #[error(transparent)]
    Reward(#[from] RewardError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Llm(#[from] LlmError),
}

impl PipelineError {
    /// 2 for validation errors, 3 for upstream-artifact errors, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::InvalidConfig(_)
            | PipelineError::Search(SearchError::InvalidConfig(_))
            | PipelineError::Rl(RlError::InvalidConfig(_))
            | PipelineError::Opt(OptError::InvalidConfig(_) | OptError::EliteCountExceedsSamples { .. })
            | PipelineError::Llm(LlmError::InvalidPlaybook(_)) => 2,
            PipelineError::MissingArtifact(_)
            | PipelineError::TamperedArtifact(_)
            | PipelineError::EmptyRun
            | PipelineError::CorruptManifest(_) => 3,
            _ => 1,
        }
    }
}

pub(crate) fn io_err(path: &Path, e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Io { path: path.display().to_string(), message: e.to_string() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Stage {
    #[serde(rename = "eureka")]
    Eureka,
    #[serde(rename = "rapp")]
    Rapp,
    #[serde(rename = "dr-propose")]
    DrPropose,
    #[serde(rename = "dr-train")]
    DrTrain,
    #[serde(rename = "transfer-eval")]
    TransferEval,
    #[serde(rename = "baseline")]
    Baseline,
    #[serde(rename = "report")]
    Report,
}

impl Stage {
    pub const ALL: [Stage; 7] =
        [Stage::Eureka, Stage::Rapp, Stage::DrPropose, Stage::DrTrain, Stage::TransferEval, Stage::Baseline, Stage::Report];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Eureka => "eureka",
            Stage::Rapp => "rapp",
            Stage::DrPropose => "dr-propose",
            Stage::DrTrain => "dr-train",
            Stage::TransferEval => "transfer-eval",
            Stage::Baseline => "baseline",
            Stage::Report => "report",
        }
    }

    /// Directory under the run root holding the stage's artifacts.
    pub fn dir(self) -> &'static str {
        match self {
            Stage::Eureka => "eureka",
            Stage::Rapp => "rapp",
            Stage::DrPropose => "dr",
            Stage::DrTrain => "train",
            Stage::TransferEval => "eval",
            Stage::Baseline => "baseline",
            Stage::Report => "report",
        }
    }

    fn parents(self) -> &'static [Stage] {
        match self {
            Stage::Eureka => &[],
            Stage::Rapp => &[Stage::Eureka],
            Stage::DrPropose => &[Stage::Rapp],
            Stage::DrTrain => &[Stage::Eureka, Stage::DrPropose],
            Stage::TransferEval => &[Stage::DrTrain],
            Stage::Baseline => &[Stage::Eureka, Stage::Rapp],
            Stage::Report => &[Stage::Eureka, Stage::TransferEval, Stage::Baseline],
        }
    }

    /// True if `other` is a transitive upstream of `self`.
    pub fn depends_on(self, other: Stage) -> bool {
        self.parents().iter().any(|p| *p == other || p.depends_on(other))
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Wraps a source and keeps a redacted log of every exchange.
pub struct RecordingSource<'a> {
    inner: &'a dyn ProposalSource,
    secret: Option<String>,
    log: Mutex<Vec<serde_json::Value>>,
}

impl<'a> RecordingSource<'a> {
    pub fn new(inner: &'a dyn ProposalSource) -> Self {
        let secret = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        Self { inner, secret, log: Mutex::new(Vec::new()) }
    }

    /// One JSON object per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for v in self.log.lock().expect("lock").iter() {
            out.push_str(&redact(&v.to_string(), self.secret.as_deref()));
            out.push('\n');
        }
        out
    }
}

impl ProposalSource for RecordingSource<'_> {
    fn complete(&self, role: RequestRole, messages: &[ChatMessage]) -> Result<Completion, LlmError> {
        let r = self.inner.complete(role, messages);
        let entry = match &r {
            Ok(c) => serde_json::json!({"role": role, "messages": messages, "response": c.text, "retry_count": c.retry_count}),
            Err(e) => serde_json::json!({"role": role, "messages": messages, "error": e.to_string()}),
        };
        self.log.lock().expect("lock").push(entry);
        r
    }
}

#[cfg(test)]
mod tests;
