use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::dr::ValidationPolicy;
use crate::llm::{HttpConfig, HttpSource, Playbook, ProposalSource, ScriptedSource};
use crate::opt::{BayrnConfig, CemConfig};
use crate::rl::TrainConfig;
use crate::search::{SearchConfig, TaskPrompt};
use crate::sim::{EnvId, EnvironmentDocument, EnvironmentSpec, TargetWorldSpec};

/// Rows of the experiment matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Ours,
    NoDr,
    HumanDesigned,
    PromptDr,
    NoPrior,
    Uninformative,
    RandomSampling,
    CemRandom,
    CemRapp,
    BayrnRapp,
}

impl Method {
    pub const ALL: [Method; 10] = [
        Method::Ours,
        Method::NoDr,
        Method::HumanDesigned,
        Method::PromptDr,
        Method::NoPrior,
        Method::Uninformative,
        Method::RandomSampling,
        Method::CemRandom,
        Method::CemRapp,
        Method::BayrnRapp,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Ours => "ours",
            Method::NoDr => "no_dr",
            Method::HumanDesigned => "human_designed",
            Method::PromptDr => "prompt_dr",
            Method::NoPrior => "no_prior",
            Method::Uninformative => "uninformative",
            Method::RandomSampling => "random_sampling",
            Method::CemRandom => "cem_random",
            Method::CemRapp => "cem_rapp",
            Method::BayrnRapp => "bayrn_rapp",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        Method::ALL.into_iter().find(|m| m.as_str() == s)
    }

    /// Optimized by black-box search instead of proposed up front.
    pub fn is_baseline(self) -> bool {
        matches!(self, Method::CemRandom | Method::CemRapp | Method::BayrnRapp)
    }

    pub fn needs_bounds(self) -> bool {
        matches!(self, Method::Ours | Method::PromptDr | Method::RandomSampling | Method::CemRapp | Method::BayrnRapp)
    }

    /// Configs come from the proposal source.
    pub fn is_proposed(self) -> bool {
        matches!(self, Method::Ours | Method::NoPrior | Method::Uninformative)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceConfig {
    Scripted { playbook: PathBuf },
    LlmHttp(HttpConfig),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StageToggles {
    pub eureka: bool,
    pub rapp: bool,
    pub dr_propose: bool,
    pub dr_train: bool,
    pub transfer_eval: bool,
    pub baseline: bool,
    pub report: bool,
}

impl Default for StageToggles {
    fn default() -> Self {
        Self { eureka: true, rapp: true, dr_propose: true, dr_train: true, transfer_eval: true, baseline: true, report: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EurekaSettings {
    pub iterations: usize,
    pub candidates: usize,
    pub eval_episodes: usize,
    /// Replaces the shipped task instruction.
    pub l_task: Option<String>,
    /// Replaces the shipped safety instruction; `""` disables it.
    pub l_safety: Option<String>,
}

impl Default for EurekaSettings {
    fn default() -> Self {
        let s = SearchConfig::default();
        Self { iterations: s.iterations, candidates: s.candidates, eval_episodes: s.eval_episodes, l_task: None, l_safety: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RappSettings {
    pub threshold: f64,
    pub episodes_per_value: usize,
}

impl Default for RappSettings {
    fn default() -> Self {
        Self { threshold: 0.5, episodes_per_value: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DrSettings {
    /// Configs per proposed or sampled method.
    pub m: usize,
    pub validation_policy: ValidationPolicy,
    pub methods: Vec<Method>,
}

impl Default for DrSettings {
    fn default() -> Self {
        Self { m: 16, validation_policy: ValidationPolicy::Clamp, methods: Method::ALL.to_vec() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Budgets {
    /// Reward-search candidates and baseline objective calls.
    pub eureka_stage: TrainConfig,
    /// Final DR policies.
    pub final_stage: TrainConfig,
}

impl Default for Budgets {
    fn default() -> Self {
        Self {
            eureka_stage: TrainConfig { total_env_steps: 100_000, ..TrainConfig::default() },
            final_stage: TrainConfig { total_env_steps: 600_000, ..TrainConfig::default() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineSettings {
    pub cem: CemConfig,
    pub bayrn: BayrnConfig,
}

fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2]
}

fn default_eval_episodes() -> usize {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env_id: EnvId,
    /// Environment document; its `target` section, if any, replaces the
    /// shipped target world.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub environment: Option<PathBuf>,
    /// Root seed of the pipeline.
    #[serde(default)]
    pub seed: u64,
    /// Training seeds for final policies.
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    pub source: SourceConfig,
    #[serde(default)]
    pub stages: StageToggles,
    #[serde(default)]
    pub eureka: EurekaSettings,
    #[serde(default)]
    pub rapp: RappSettings,
    #[serde(default)]
    pub dr: DrSettings,
    #[serde(default)]
    pub budgets: Budgets,
    /// Target-world episodes per policy.
    #[serde(default = "default_eval_episodes")]
    pub eval_episodes: usize,
    #[serde(default)]
    pub baselines: BaselineSettings,
    /// Worker threads for independent trainings; all cores when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

fn invalid(msg: impl Into<String>) -> PipelineError {
    PipelineError::InvalidConfig(msg.into())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        serde_json::from_str(text).map_err(|e| invalid(e.to_string()))
    }

    /// Read, resolve relative paths against the file's directory, validate.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        if let SourceConfig::Scripted { playbook } = &mut self.source {
            if playbook.is_relative() {
                *playbook = base.join(&*playbook);
            }
        }
        if let Some(p) = &mut self.environment {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.seeds.is_empty() {
            return Err(invalid("seeds must be nonempty"));
        }
        let mut seen = self.seeds.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.seeds.len() {
            return Err(invalid("seeds must be distinct"));
        }
        if self.eureka.iterations == 0 || self.eureka.candidates == 0 || self.eureka.eval_episodes == 0 {
            return Err(invalid("eureka iterations, candidates and eval_episodes must be >= 1"));
        }
        if !(self.rapp.threshold > 0.0 && self.rapp.threshold <= 1.0) || self.rapp.episodes_per_value == 0 {
            return Err(invalid("rapp threshold must lie in (0, 1] and episodes_per_value >= 1"));
        }
        if self.dr.m == 0 {
            return Err(invalid("dr.m must be >= 1"));
        }
        if self.dr.methods.is_empty() {
            return Err(invalid("dr.methods must be nonempty"));
        }
        for (i, m) in self.dr.methods.iter().enumerate() {
            if self.dr.methods[..i].contains(m) {
                return Err(invalid(format!("method {m} listed twice")));
            }
        }
        if self.eval_episodes == 0 {
            return Err(invalid("eval_episodes must be >= 1"));
        }
        if self.workers == Some(0) {
            return Err(invalid("workers must be >= 1"));
        }
        for (name, t) in [("eureka_stage", &self.budgets.eureka_stage), ("final_stage", &self.budgets.final_stage)] {
            t.validate().map_err(|e| invalid(format!("budgets.{name}: {e}")))?;
        }
        match &self.source {
            SourceConfig::Scripted { playbook } => {
                if !playbook.is_file() {
                    return Err(invalid(format!("playbook {} does not exist", playbook.display())));
                }
            }
            SourceConfig::LlmHttp(h) => {
                if h.endpoint.trim().is_empty() || h.model.trim().is_empty() {
                    return Err(invalid("llm_http needs endpoint and model"));
                }
            }
        }
        if let Some(p) = &self.environment {
            if !p.is_file() {
                return Err(invalid(format!("environment file {} does not exist", p.display())));
            }
        }
        self.world()?;
        Ok(())
    }

    /// Environment and target world, from the document if configured.
    pub fn world(&self) -> Result<(EnvironmentSpec, TargetWorldSpec), PipelineError> {
        let (spec, target) = match &self.environment {
            None => (EnvironmentSpec::builtin(self.env_id), None),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| invalid(format!("{}: {e}", p.display())))?;
                let doc = EnvironmentDocument::from_json(&text).map_err(|e| invalid(e.to_string()))?;
                doc.to_spec().map_err(|e| invalid(e.to_string()))?
            }
        };
        if spec.env_id != self.env_id {
            return Err(invalid(format!("environment file is for {}, config says {}", spec.env_id, self.env_id)));
        }
        let target = target.unwrap_or_else(|| TargetWorldSpec::builtin(self.env_id));
        target.validate(&spec).map_err(|e| invalid(e.to_string()))?;
        Ok((spec, target))
    }

    pub fn build_source(&self) -> Result<Box<dyn ProposalSource>, PipelineError> {
        Ok(match &self.source {
            SourceConfig::Scripted { playbook } => {
                Box::new(ScriptedSource::new(Playbook::load(playbook).map_err(|e| invalid(e.to_string()))?))
            }
            SourceConfig::LlmHttp(h) => Box::new(HttpSource::from_env(h.clone())),
        })
    }

    pub fn search_config(&self) -> SearchConfig {
        SearchConfig {
            iterations: self.eureka.iterations,
            candidates: self.eureka.candidates,
            eval_episodes: self.eureka.eval_episodes,
            train: self.budgets.eureka_stage.clone(),
        }
    }

    pub fn task_prompt(&self, spec: &EnvironmentSpec) -> TaskPrompt {
        let mut p = TaskPrompt::builtin(spec);
        if let Some(t) = &self.eureka.l_task {
            p.l_task = t.clone();
        }
        if let Some(s) = &self.eureka.l_safety {
            p.l_safety = s.clone();
        }
        p
    }

    pub fn has(&self, m: Method) -> bool {
        self.dr.methods.contains(&m)
    }
}
