//! Evolutionary reward search: sample candidate reward programs, train a
//! policy on each, keep the best and feed a reflection back to the source.

mod prompt;

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use prompt::{environment_summary, TaskPrompt, REWARD_SYSTEM_PROMPT};

use crate::llm::{extract_fenced, llm_complete, ChatMessage, LlmError, ProposalSource, RequestRole};
use crate::reward::{parse_reward, trace_components, ComponentTrace, RewardProgram};
use crate::rl::{evaluate_policy, train_policy, AssignmentSource, PolicyCheckpoint, TrainConfig, TrainingLog};
use crate::seed;
use crate::sim::{rollout, EnvironmentSpec};

pub const DEFAULT_ITERATIONS: usize = 2;
pub const DEFAULT_CANDIDATES: usize = 4;
pub const DEFAULT_EVAL_EPISODES: usize = 8;

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("invalid search config: {0}")]
    InvalidConfig(String),
    #[error("no candidate parsed; last errors: {}", .last_errors.join("; "))]
    NoValidCandidate { last_errors: Vec<String> },
    #[error("every candidate failed")]
    AllCandidatesFailed,
    #[error("candidate has no score")]
    MissingScore,
    #[error(transparent)]
    Source(#[from] LlmError),
    #[error("writing history: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchConfig {
    pub iterations: usize,
    pub candidates: usize,
    pub eval_episodes: usize,
    pub train: TrainConfig,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            iterations: DEFAULT_ITERATIONS,
            candidates: DEFAULT_CANDIDATES,
            eval_episodes: DEFAULT_EVAL_EPISODES,
            train: TrainConfig { total_env_steps: 100_000, ..TrainConfig::default() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CandidateOutcome {
    ParseFailed { error: String },
    TrainingFailed { error: String },
    Scored { score: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub iteration: usize,
    pub index: usize,
    /// Raw response text.
    pub response: String,
    /// Contents of the first reward block, if any.
    pub reward_text: Option<String>,
    pub outcome: CandidateOutcome,
    pub components: Option<ComponentTrace>,
    #[serde(skip)]
    pub log: Option<TrainingLog>,
    #[serde(skip)]
    pub policy: Option<PolicyCheckpoint>,
    #[serde(skip)]
    pub program: Option<RewardProgram>,
}

impl CandidateRecord {
    pub fn score(&self) -> Option<f64> {
        match self.outcome {
            CandidateOutcome::Scored { score } if !score.is_nan() => Some(score),
            _ => None,
        }
    }

    pub fn error(&self) -> Option<&str> {
        match &self.outcome {
            CandidateOutcome::ParseFailed { error } | CandidateOutcome::TrainingFailed { error } => Some(error),
            CandidateOutcome::Scored { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReflectionMessage {
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestPointer {
    pub iteration: usize,
    pub index: usize,
    pub score: f64,
    /// Best score seen after each iteration.
    pub running_best: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchHistory {
    pub candidates: Vec<CandidateRecord>,
    pub running_best: Vec<f64>,
    /// Every request sent to the source, in order.
    pub requests: Vec<Vec<ChatMessage>>,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub reward: RewardProgram,
    pub policy: PolicyCheckpoint,
    pub best: BestPointer,
    pub history: SearchHistory,
}

/// Index of the highest score; ties go to the lowest index.
pub fn select_best(candidates: &[CandidateRecord]) -> Result<usize, SearchError> {
    let mut best: Option<(usize, f64)> = None;
    for (i, c) in candidates.iter().enumerate() {
        if let Some(s) = c.score() {
            if s > f64::NEG_INFINITY && best.is_none_or(|(_, b)| s > b) {
                best = Some((i, s));
            }
        }
    }
    best.map(|(i, _)| i).ok_or(SearchError::AllCandidatesFailed)
}

/// Feedback text built from the iteration's best candidate.
pub fn build_reflection(best: &CandidateRecord) -> Result<ReflectionMessage, SearchError> {
    let score = best.score().ok_or(SearchError::MissingScore)?;
    let mut t = String::new();
    let reward = best.reward_text.as_deref().unwrap_or_default().trim_end();
    let _ = writeln!(t, "We trained a policy with the reward function below.\n```reward\n{reward}\n```");
    let _ = writeln!(t, "Task score (mean fitness over evaluation episodes): {score:.3}");
    if let Some(log) = &best.log {
        let fits: Vec<f64> = log.rows.iter().filter_map(|r| r.mean_fitness).collect();
        if let (Some(first), Some(last)) = (fits.first(), fits.last()) {
            let max = fits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let _ = writeln!(t, "Fitness during training: first {first:.3}, last {last:.3}, max {max:.3}");
        }
    }
    if let Some(c) = &best.components {
        let _ = writeln!(t, "Reward components:");
        for s in &c.components {
            let _ = writeln!(
                t,
                "- {}: mean={:.3}, std={:.3}, min={:.3}, max={:.3}",
                s.name, s.mean, s.std, s.min, s.max
            );
        }
    }
    t.push_str(
        "Analyze which components help or hurt the task score and write an improved reward function \
         in a single ```reward block.",
    );
    Ok(ReflectionMessage { text: t })
}

fn failure_notes(records: &[CandidateRecord]) -> String {
    let mut t = String::new();
    for r in records {
        if let Some(e) = r.error() {
            let _ = writeln!(t, "Candidate {} failed: {e}", r.index);
        }
    }
    t
}

struct Trained {
    policy: PolicyCheckpoint,
    log: TrainingLog,
    score: f64,
    components: ComponentTrace,
}

fn train_and_score(
    spec: &EnvironmentSpec,
    program: &RewardProgram,
    cfg: &SearchConfig,
    train_seed: u64,
    eval_seed: u64,
) -> Result<Trained, String> {
    let (policy, log) = train_policy(spec, None, program, &cfg.train, train_seed).map_err(|e| e.to_string())?;
    let report = evaluate_policy(&policy, spec, &AssignmentSource::Fixed(spec.defaults()), cfg.eval_episodes, eval_seed)
        .map_err(|e| e.to_string())?;
    let components = match log.last() {
        Some(row) => row.components.clone(),
        None => {
            let trace = rollout(spec, &spec.defaults(), &policy, eval_seed).map_err(|e| e.to_string())?;
            trace_components(program, &trace).map_err(|e| e.to_string())?
        }
    };
    Ok(Trained { policy, log, score: report.mean, components })
}

/// Run `cfg.iterations` rounds of `cfg.candidates` proposals each.
pub fn run_reward_search(
    source: &dyn ProposalSource,
    spec: &EnvironmentSpec,
    prompt: &TaskPrompt,
    cfg: &SearchConfig,
    seed: u64,
) -> Result<SearchOutcome, SearchError> {
    if cfg.iterations == 0 || cfg.candidates == 0 || cfg.eval_episodes == 0 {
        return Err(SearchError::InvalidConfig("iterations, candidates and eval_episodes must be >= 1".into()));
    }
    prompt.validate()?;
    cfg.train.validate().map_err(|e| SearchError::InvalidConfig(e.to_string()))?;
    let eval_seed = seed::derive(seed, &[seed::tag("eureka_eval")]);
    let mut messages = vec![ChatMessage::system(REWARD_SYSTEM_PROMPT), ChatMessage::user(prompt.render())];
    let mut history = SearchHistory { candidates: Vec::new(), running_best: Vec::new(), requests: Vec::new() };
    let mut best: Option<usize> = None;
    let mut last_errors = Vec::new();

    for n in 0..cfg.iterations {
        let mut round = Vec::with_capacity(cfg.candidates);
        for k in 0..cfg.candidates {
            history.requests.push(messages.clone());
            let response = llm_complete(source, RequestRole::Reward, &messages)?.text;
            let block = extract_fenced(&response, "reward").map(str::to_string);
            let parsed = match &block {
                Some(text) => parse_reward(text, &spec.feature_catalog).map_err(|e| e.to_string()),
                None => Err("response has no ```reward block".to_string()),
            };
            round.push((k, response, block, parsed));
        }
        let trained: Vec<Option<Result<Trained, String>>> = round
            .par_iter()
            .map(|(k, _, _, parsed)| {
                parsed.as_ref().ok().map(|p| {
                    let train_seed = seed::derive(seed, &[seed::tag("eureka"), n as u64, *k as u64]);
                    train_and_score(spec, p, cfg, train_seed, eval_seed)
                })
            })
            .collect();
        let start = history.candidates.len();
        for ((k, response, block, parsed), t) in round.into_iter().zip(trained) {
            let mut rec = CandidateRecord {
                iteration: n,
                index: k,
                response,
                reward_text: block,
                outcome: CandidateOutcome::ParseFailed { error: String::new() },
                components: None,
                log: None,
                policy: None,
                program: None,
            };
            match (parsed, t) {
                (Err(e), _) => {
                    log::warn!("iteration {n} candidate {k}: {e}");
                    last_errors.push(e.clone());
                    rec.outcome = CandidateOutcome::ParseFailed { error: e };
                }
                (Ok(_), Some(Err(e))) => {
                    log::warn!("iteration {n} candidate {k}: training failed: {e}");
                    rec.outcome = CandidateOutcome::TrainingFailed { error: e };
                }
                (Ok(p), Some(Ok(t))) => {
                    log::info!("iteration {n} candidate {k}: score {:.3}", t.score);
                    rec.outcome = CandidateOutcome::Scored { score: t.score };
                    rec.components = Some(t.components);
                    rec.log = Some(t.log);
                    rec.policy = Some(t.policy);
                    rec.program = Some(p);
                }
                (Ok(_), None) => unreachable!("parsed candidates are always trained"),
            }
            history.candidates.push(rec);
        }
        let this_round = &history.candidates[start..];
        let round_best = select_best(this_round).ok().map(|i| start + i);
        if let Some(i) = round_best {
            let s = history.candidates[i].score().expect("selected candidates are scored");
            if best.is_none_or(|b| s > history.candidates[b].score().expect("scored")) {
                best = Some(i);
            }
        }
        let running = best.and_then(|b| history.candidates[b].score()).unwrap_or(f64::NEG_INFINITY);
        history.running_best.push(running);

        if n + 1 < cfg.iterations {
            let mut feedback = match round_best {
                Some(i) => {
                    messages.push(ChatMessage::assistant(history.candidates[i].response.clone()));
                    build_reflection(&history.candidates[i])?.text
                }
                None => "No candidate in the last round could be trained. Write a new reward function in a \
                         single ```reward block."
                    .to_string(),
            };
            let notes = failure_notes(&history.candidates[start..]);
            if !notes.is_empty() {
                feedback.push('\n');
                feedback.push_str(&notes);
            }
            messages.push(ChatMessage::user(feedback));
        }
    }

    if history.candidates.iter().all(|c| matches!(c.outcome, CandidateOutcome::ParseFailed { .. })) {
        let keep = last_errors.len().saturating_sub(cfg.candidates);
        return Err(SearchError::NoValidCandidate { last_errors: last_errors.split_off(keep) });
    }
    let b = best.ok_or(SearchError::AllCandidatesFailed)?;
    let winner = &history.candidates[b];
    let pointer = BestPointer {
        iteration: winner.iteration,
        index: winner.index,
        score: winner.score().expect("scored"),
        running_best: history.running_best.clone(),
    };
    Ok(SearchOutcome {
        reward: winner.program.clone().expect("scored candidates keep their program"),
        policy: winner.policy.clone().expect("scored candidates keep their policy"),
        best: pointer,
        history,
    })
}

fn io_err(e: impl std::fmt::Display) -> SearchError {
    SearchError::Io(e.to_string())
}

impl SearchHistory {
    /// One directory per candidate plus `best.json` when a winner exists.
    pub fn write_to(&self, dir: &Path, best: Option<&BestPointer>) -> Result<(), SearchError> {
        std::fs::create_dir_all(dir).map_err(io_err)?;
        for c in &self.candidates {
            let d = dir.join(format!("iter_{}_cand_{}", c.iteration, c.index));
            std::fs::create_dir_all(&d).map_err(io_err)?;
            std::fs::write(d.join("response.txt"), &c.response).map_err(io_err)?;
            if let Some(r) = &c.reward_text {
                std::fs::write(d.join("reward.rwd"), r).map_err(io_err)?;
            }
            let parse = match &c.outcome {
                CandidateOutcome::ParseFailed { error } => serde_json::json!({"ok": false, "error": error}),
                _ => serde_json::json!({"ok": true}),
            };
            std::fs::write(d.join("parse.json"), serde_json::to_string_pretty(&parse).map_err(io_err)?)
                .map_err(io_err)?;
            if let Some(log) = &c.log {
                let f = std::fs::File::create(d.join("training.csv")).map_err(io_err)?;
                log.write_csv(f).map_err(io_err)?;
            }
            let score = serde_json::json!({"outcome": c.outcome, "components": c.components});
            std::fs::write(d.join("score.json"), serde_json::to_string_pretty(&score).map_err(io_err)?)
                .map_err(io_err)?;
        }
        if let Some(b) = best {
            std::fs::write(dir.join("best.json"), serde_json::to_string_pretty(b).map_err(io_err)?).map_err(io_err)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests;
