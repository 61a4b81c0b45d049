use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{write_transfer_tables, PolicyRecord, PolicyStatus};
use super::{io_err, ExperimentConfig, Method, PipelineError, RecordingSource, RunManifest, Stage, TIMING_FILE};
use crate::dr::{
    build_dr_prompt, generate_ablation, propose_batch, AblationKind, DomainRandomizationConfig, PromptVariant, Provenance,
};
use crate::opt::{bayrn_optimize, cem_optimize, write_history_csv, CemInit, ConfigSpace, OptOutcome};
use crate::rapp::{compute_rapp, nominal_criterion, PolicyScorer, RappBounds};
use crate::reward::{parse_reward, RewardProgram};
use crate::rl::{evaluate_policy, train_policy, AssignmentSource, PolicyCheckpoint, RlError, TrainConfig};
use crate::search::{run_reward_search, CandidateOutcome};
use crate::seed;
use crate::sim::{EnvironmentSpec, TargetWorldSpec};

const REWARD: &str = "eureka/reward.rwd";
const PI_INITIAL: &str = "eureka/pi_initial.ckpt";
const BOUNDS: &str = "rapp/bounds.json";
const TRAIN_INDEX: &str = "train/index.json";
const POLICIES: &str = "eval/policies.json";

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), PipelineError> {
    if let Some(d) = path.parent() {
        std::fs::create_dir_all(d).map_err(|e| io_err(d, e))?;
    }
    std::fs::write(path, contents).map_err(|e| io_err(path, e))
}

fn write_json<T: Serialize + ?Sized>(path: &Path, v: &T) -> Result<(), PipelineError> {
    write(path, serde_json::to_string_pretty(v).expect("artifact serializes"))
}

pub(crate) fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| io_err(path, e))
}

fn reset_dir(dir: &Path) -> Result<(), PipelineError> {
    if dir.exists() {
        std::fs::remove_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn stage_seed(cfg: &ExperimentConfig, label: &str) -> u64 {
    seed::derive(cfg.seed, &[seed::tag(label)])
}

/// Load or start the run manifest and refresh its config snapshot.
fn open_run(cfg: &ExperimentConfig, run_dir: &Path) -> Result<RunManifest, PipelineError> {
    std::fs::create_dir_all(run_dir).map_err(|e| io_err(run_dir, e))?;
    let snapshot = serde_json::to_value(cfg).expect("config serializes");
    let mut m = RunManifest::load(run_dir)?.unwrap_or_else(|| RunManifest::new(snapshot.clone()));
    m.config = snapshot;
    Ok(m)
}

fn finish(m: &mut RunManifest, run_dir: &Path, stage: Stage, started: Instant) -> Result<(), PipelineError> {
    m.complete(run_dir, stage)?;
    m.save(run_dir)?;
    let p = run_dir.join(TIMING_FILE);
    let mut timing: BTreeMap<String, f64> = if p.exists() { read_json(&p)? } else { BTreeMap::new() };
    timing.insert(stage.as_str().to_string(), started.elapsed().as_secs_f64());
    write_json(&p, &timing)?;
    log::info!("stage {stage} finished in {:.1} s", started.elapsed().as_secs_f64());
    Ok(())
}

fn load_reward(m: &RunManifest, run_dir: &Path, spec: &EnvironmentSpec) -> Result<RewardProgram, PipelineError> {
    let p = m.require(run_dir, Stage::Eureka, REWARD, "reward")?;
    let text = std::fs::read_to_string(&p).map_err(|e| io_err(&p, e))?;
    Ok(parse_reward(&text, &spec.feature_catalog)?)
}

fn load_bounds(m: &RunManifest, run_dir: &Path) -> Result<RappBounds, PipelineError> {
    read_json(&m.require(run_dir, Stage::Rapp, BOUNDS, "rapp_bounds")?)
}

fn pool<T: Send>(cfg: &ExperimentConfig, f: impl FnOnce() -> T + Send) -> Result<T, PipelineError> {
    match cfg.workers {
        None => Ok(f()),
        Some(n) => {
            let p = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| PipelineError::InvalidConfig(e.to_string()))?;
            Ok(p.install(f))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CandidateSummary {
    iteration: usize,
    index: usize,
    outcome: CandidateOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct SearchSummary {
    pub(crate) best_iteration: usize,
    pub(crate) best_index: usize,
    pub(crate) best_score: f64,
    pub(crate) running_best: Vec<f64>,
    candidates: Vec<CandidateSummary>,
}

impl SearchSummary {
    pub(crate) fn rows(&self) -> Vec<(usize, usize, String, Option<f64>)> {
        self.candidates
            .iter()
            .map(|c| {
                let (status, score) = match &c.outcome {
                    CandidateOutcome::Scored { score } => ("scored", Some(*score)),
                    CandidateOutcome::ParseFailed { .. } => ("parse_failed", None),
                    CandidateOutcome::TrainingFailed { .. } => ("training_failed", None),
                };
                (c.iteration, c.index, status.to_string(), score)
            })
            .collect()
    }
}

/// Reward search; writes the winning reward, `pi_initial` and the history.
pub fn cmd_eureka(cfg: &ExperimentConfig, run_dir: &Path) -> Result<(), PipelineError> {
    cfg.validate()?;
    let started = Instant::now();
    let (spec, _) = cfg.world()?;
    let mut m = open_run(cfg, run_dir)?;
    let dir = run_dir.join(Stage::Eureka.dir());
    reset_dir(&dir)?;
    let source = cfg.build_source()?;
    let rec = RecordingSource::new(source.as_ref());
    let result = run_reward_search(&rec, &spec, &cfg.task_prompt(&spec), &cfg.search_config(), stage_seed(cfg, "eureka"));
    write(&dir.join("transcript.jsonl"), rec.to_jsonl())?;
    let out = result?;
    out.history.write_to(&dir.join("history"), Some(&out.best))?;
    let winner = out
        .history
        .candidates
        .iter()
        .find(|c| c.iteration == out.best.iteration && c.index == out.best.index)
        .expect("best candidate is in the history");
    write(&dir.join("reward.rwd"), winner.reward_text.as_deref().unwrap_or_default())?;
    out.policy.save(&dir.join("pi_initial.ckpt"))?;
    write_json(&dir.join("best.json"), &out.best)?;
    let summary = SearchSummary {
        best_iteration: out.best.iteration,
        best_index: out.best.index,
        best_score: out.best.score,
        running_best: out.best.running_best.clone(),
        candidates: out
            .history
            .candidates
            .iter()
            .map(|c| CandidateSummary { iteration: c.iteration, index: c.index, outcome: c.outcome.clone() })
            .collect(),
    };
    write_json(&dir.join("search.json"), &summary)?;
    finish(&mut m, run_dir, Stage::Eureka, started)
}

/// Physics-prior sweep of `pi_initial`.
pub fn cmd_rapp(cfg: &ExperimentConfig, run_dir: &Path) -> Result<(), PipelineError> {
    cfg.validate()?;
    let started = Instant::now();
    let (spec, _) = cfg.world()?;
    let mut m = open_run(cfg, run_dir)?;
    let ckpt = m.require(run_dir, Stage::Eureka, PI_INITIAL, "pi_initial")?;
    let policy = PolicyCheckpoint::load(&ckpt)?;
    let dir = run_dir.join(Stage::Rapp.dir());
    reset_dir(&dir)?;
    let s = stage_seed(cfg, "rapp");
    let scorer = PolicyScorer { policy: &policy, spec: &spec };
    let criterion = nominal_criterion(&scorer, &spec, cfg.rapp.threshold, cfg.rapp.episodes_per_value, s)?;
    let bounds = compute_rapp(&policy, &spec, &criterion, s)?;
    write_json(&dir.join("criterion.json"), &criterion)?;
    write(&dir.join("bounds.json"), bounds.to_json())?;
    write(&dir.join("prompt_block.txt"), bounds.prompt_block(&spec))?;
    finish(&mut m, run_dir, Stage::Rapp, started)
}

fn configs_path(method: Method) -> String {
    format!("dr/{method}/configs.json")
}

/// DR configs for every non-baseline method in the matrix.
pub fn cmd_dr_propose(cfg: &ExperimentConfig, run_dir: &Path) -> Result<(), PipelineError> {
    cfg.validate()?;
    let started = Instant::now();
    let (spec, _) = cfg.world()?;
    let mut m = open_run(cfg, run_dir)?;
    let methods: Vec<Method> = cfg.dr.methods.iter().copied().filter(|x| !x.is_baseline()).collect();
    let bounds = if methods.iter().any(|x| x.needs_bounds()) { Some(load_bounds(&m, run_dir)?) } else { None };
    let source = if methods.iter().any(|x| x.is_proposed()) { Some(cfg.build_source()?) } else { None };
    let rec = source.as_deref().map(RecordingSource::new);
    let dir = run_dir.join(Stage::DrPropose.dir());
    reset_dir(&dir)?;
    let task = cfg.task_prompt(&spec).l_task;
    let mut result = Ok(());
    for method in methods {
        let configs = match propose_method(cfg, &spec, bounds.as_ref(), rec.as_ref(), &task, method, &dir) {
            Ok(c) => c,
            Err(e) => {
                result = Err(e);
                break;
            }
        };
        log::info!("{method}: {} configs", configs.len());
        write_json(&run_dir.join(configs_path(method)), &configs)?;
    }
    if let Some(r) = &rec {
        write(&dir.join("transcript.jsonl"), r.to_jsonl())?;
    }
    result?;
    finish(&mut m, run_dir, Stage::DrPropose, started)
}

fn propose_method(
    cfg: &ExperimentConfig,
    spec: &EnvironmentSpec,
    bounds: Option<&RappBounds>,
    rec: Option<&RecordingSource>,
    task: &str,
    method: Method,
    dir: &Path,
) -> Result<Vec<DomainRandomizationConfig>, PipelineError> {
    let ablation = |kind, rng: &mut seed::Rng| generate_ablation(kind, bounds, spec, rng);
    let mut rng = seed::rng(cfg.seed, &[seed::tag(method.as_str())]);
    Ok(match method {
        Method::NoDr => vec![ablation(AblationKind::NoDr, &mut rng)?],
        Method::HumanDesigned => vec![ablation(AblationKind::HumanDesigned, &mut rng)?],
        Method::PromptDr => vec![ablation(AblationKind::PromptDr, &mut rng)?],
        Method::RandomSampling => {
            (0..cfg.dr.m).map(|_| ablation(AblationKind::RandomSampling, &mut rng)).collect::<Result<_, _>>()?
        }
        Method::Ours | Method::NoPrior | Method::Uninformative => {
            let (variant, check, provenance) = match method {
                Method::Ours => (PromptVariant::Rapp, bounds.expect("bounds loaded").clone(), Provenance::Llm),
                Method::NoPrior => (PromptVariant::NoPrior, RappBounds::valid_ranges(spec), Provenance::NoPrior),
                _ => (PromptVariant::Uninformative, RappBounds::grid_extremes(spec), Provenance::Uninformative),
            };
            let prompt = build_dr_prompt(spec, bounds, variant, task)?;
            let mdir = dir.join(method.as_str());
            write(&mdir.join("prompt.txt"), &prompt)?;
            let source = rec.expect("source built for proposed methods");
            let report = propose_batch(source, &prompt, cfg.dr.m, spec, &check, cfg.dr.validation_policy, provenance)?;
            write_json(&mdir.join("batch.json"), &report)?;
            report.configs
        }
        Method::CemRandom | Method::CemRapp | Method::BayrnRapp => unreachable!("baselines are not proposed"),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct TrainUnit {
    pub(crate) method: Method,
    pub(crate) config_index: usize,
    pub(crate) seed: u64,
    pub(crate) status: PolicyStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub(crate) error: Option<String>,
    pub(crate) checkpoint: String,
}

fn final_seed(cfg: &ExperimentConfig, s: u64) -> u64 {
    seed::derive(cfg.seed, &[seed::tag("final"), s])
}

fn train_one(
    spec: &EnvironmentSpec,
    config: &DomainRandomizationConfig,
    reward: &RewardProgram,
    budget: &TrainConfig,
    seed: u64,
    dir: &Path,
) -> Result<(), String> {
    let dr = (!config.is_empty()).then_some(config);
    let result = train_policy(spec, dr, reward, budget, seed);
    let log = match &result {
        Ok((_, log)) => Some(log),
        Err(RlError::DivergedTraining { log, .. }) => Some(log.as_ref()),
        Err(_) => None,
    };
    if let Some(log) = log {
        std::fs::create_dir_all(dir).map_err(|e| e.to_string())?;
        let f = std::fs::File::create(dir.join("training.csv")).map_err(|e| e.to_string())?;
        log.write_csv(f).map_err(|e| e.to_string())?;
    }
    let (policy, _) = result.map_err(|e| e.to_string())?;
    policy.save(&dir.join("policy.ckpt")).map_err(|e| e.to_string())
}

/// Final training: every config of every method, once per seed.
pub fn cmd_dr_train(cfg: &ExperimentConfig, run_dir: &Path) -> Result<(), PipelineError> {
    cfg.validate()?;
    let started = Instant::now();
    let (spec, _) = cfg.world()?;
    let mut m = open_run(cfg, run_dir)?;
    let reward = load_reward(&m, run_dir, &spec)?;
    let mut work = Vec::new();
    for method in cfg.dr.methods.iter().copied().filter(|x| !x.is_baseline()) {
        let p = m.require(run_dir, Stage::DrPropose, &configs_path(method), "dr_configs")?;
        let configs: Vec<DomainRandomizationConfig> = read_json(&p)?;
        for (ci, c) in configs.into_iter().enumerate() {
            for &s in &cfg.seeds {
                work.push((method, ci, c.clone(), s));
            }
        }
    }
    let dir = run_dir.join(Stage::DrTrain.dir());
    reset_dir(&dir)?;
    let units: Vec<TrainUnit> = pool(cfg, || {
        work.par_iter()
            .map(|(method, ci, c, s)| {
                let rel = format!("train/{method}/cfg_{ci}_seed_{s}");
                let r = train_one(&spec, c, &reward, &cfg.budgets.final_stage, final_seed(cfg, *s), &run_dir.join(&rel));
                if let Err(e) = &r {
                    log::warn!("{rel}: training failed: {e}");
                }
                TrainUnit {
                    method: *method,
                    config_index: *ci,
                    seed: *s,
                    status: if r.is_ok() { PolicyStatus::Ok } else { PolicyStatus::Failed },
                    error: r.err(),
                    checkpoint: format!("{rel}/policy.ckpt"),
                }
            })
            .collect()
    })?;
    write_json(&run_dir.join(TRAIN_INDEX), &units)?;
    finish(&mut m, run_dir, Stage::DrTrain, started)
}

fn transfer_seed(cfg: &ExperimentConfig) -> u64 {
    stage_seed(cfg, "transfer")
}

fn evaluate_unit(cfg: &ExperimentConfig, spec: &EnvironmentSpec, target: &TargetWorldSpec, path: &Path) -> Result<crate::rl::FitnessReport, String> {
    let policy = PolicyCheckpoint::load(path).map_err(|e| e.to_string())?;
    evaluate_policy(&policy, spec, &AssignmentSource::Target(target.clone()), cfg.eval_episodes, transfer_seed(cfg))
        .map_err(|e| e.to_string())
}

/// Target-world evaluation of every trained policy.
pub fn cmd_transfer_eval(cfg: &ExperimentConfig, run_dir: &Path) -> Result<(), PipelineError> {
    cfg.validate()?;
    let started = Instant::now();
    let (spec, target) = cfg.world()?;
    let mut m = open_run(cfg, run_dir)?;
    let units: Vec<TrainUnit> = read_json(&m.require(run_dir, Stage::DrTrain, TRAIN_INDEX, "policies")?)?;
    let dir = run_dir.join(Stage::TransferEval.dir());
    reset_dir(&dir)?;
    let records: Vec<PolicyRecord> = pool(cfg, || {
        units
            .par_iter()
            .map(|u| {
                let mut rec = PolicyRecord {
                    method: u.method,
                    config_index: u.config_index,
                    seed: u.seed,
                    status: u.status,
                    error: u.error.clone(),
                    report: None,
                };
                if u.status == PolicyStatus::Ok {
                    match evaluate_unit(cfg, &spec, &target, &run_dir.join(&u.checkpoint)) {
                        Ok(r) => rec.report = Some(r),
                        Err(e) => {
                            rec.status = PolicyStatus::Failed;
                            rec.error = Some(e);
                        }
                    }
                }
                rec
            })
            .collect()
    })?;
    write_json(&run_dir.join(POLICIES), &records)?;
    write_transfer_tables(&records, &cfg.dr.methods, &dir)?;
    finish(&mut m, run_dir, Stage::TransferEval, started)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct BaselineResult {
    kind: Method,
    coordinates: Vec<String>,
    outcome: OptOutcome,
}

/// Black-box DR search. `kinds` defaults to the baselines in the matrix.
pub fn cmd_baseline(cfg: &ExperimentConfig, run_dir: &Path, kinds: Option<&[Method]>) -> Result<(), PipelineError> {
    cfg.validate()?;
    let started = Instant::now();
    let kinds: Vec<Method> = match kinds {
        Some(k) => k.to_vec(),
        None => cfg.dr.methods.iter().copied().filter(|x| x.is_baseline()).collect(),
    };
    if let Some(k) = kinds.iter().find(|k| !k.is_baseline()) {
        return Err(PipelineError::InvalidConfig(format!("{k} is not a baseline")));
    }
    let (spec, target) = cfg.world()?;
    let mut m = open_run(cfg, run_dir)?;
    let reward = load_reward(&m, run_dir, &spec)?;
    let bounds = if kinds.iter().any(|k| k.needs_bounds()) { Some(load_bounds(&m, run_dir)?) } else { None };
    for kind in kinds {
        let dir = run_dir.join(Stage::Baseline.dir()).join(kind.as_str());
        reset_dir(&dir)?;
        run_baseline(cfg, &spec, &target, &reward, bounds.as_ref(), kind, &dir)?;
    }
    finish(&mut m, run_dir, Stage::Baseline, started)
}

#[allow(clippy::too_many_arguments)]
fn run_baseline(
    cfg: &ExperimentConfig,
    spec: &EnvironmentSpec,
    target: &TargetWorldSpec,
    reward: &RewardProgram,
    bounds: Option<&RappBounds>,
    kind: Method,
    dir: &Path,
) -> Result<(), PipelineError> {
    let space = match kind {
        Method::CemRandom => ConfigSpace::valid_ranges(spec),
        _ => ConfigSpace::from_bounds(spec, bounds.expect("bounds loaded for rapp baselines")),
    };
    if space.dim() == 0 {
        return Err(PipelineError::InvalidConfig(format!("{kind}: no parameter has usable bounds")));
    }
    let provenance = if kind == Method::BayrnRapp { Provenance::Bayrn } else { Provenance::Cem };
    let objective_seed = stage_seed(cfg, "baseline_objective");
    let eval_seed = transfer_seed(cfg);
    let mut calls = 0usize;
    let objective = |x: &[f64]| -> Result<f64, String> {
        calls += 1;
        let c = space.decode(x, provenance);
        let (policy, _) = train_policy(spec, Some(&c), reward, &cfg.budgets.eureka_stage, objective_seed).map_err(|e| e.to_string())?;
        let r = evaluate_policy(&policy, spec, &AssignmentSource::Target(target.clone()), cfg.eval_episodes, eval_seed)
            .map_err(|e| e.to_string())?;
        log::info!("{kind} objective call {calls}: {:.3}", r.mean);
        Ok(r.mean)
    };
    let mut rng = seed::rng(cfg.seed, &[seed::tag(kind.as_str())]);
    let bounds_v = space.coord_bounds();
    let outcome = match kind {
        Method::CemRandom => {
            let init = CemInit::DefaultMeanVar { mean: space.default_vector(), variance: vec![1.0; space.dim()] };
            cem_optimize(objective, init, &bounds_v, &cfg.baselines.cem, &mut rng)?.outcome
        }
        Method::CemRapp => cem_optimize(objective, CemInit::RappUniform, &bounds_v, &cfg.baselines.cem, &mut rng)?.outcome,
        _ => bayrn_optimize(objective, &bounds_v, &cfg.baselines.bayrn, &mut rng)?,
    };
    let names = space.coord_names();
    let f = std::fs::File::create(dir.join("history.csv")).map_err(|e| io_err(dir, e))?;
    write_history_csv(&outcome.history, &names, f)?;
    let best = space.decode(&outcome.best, provenance);
    write(&dir.join("best_config.json"), best.to_json())?;
    write_json(&dir.join("history.json"), &BaselineResult { kind, coordinates: names, outcome })?;

    let records: Vec<PolicyRecord> = pool(cfg, || {
        cfg.seeds
            .par_iter()
            .map(|&s| {
                let pdir: PathBuf = dir.join(format!("seed_{s}"));
                let r = train_one(spec, &best, reward, &cfg.budgets.final_stage, final_seed(cfg, s), &pdir)
                    .and_then(|_| evaluate_unit(cfg, spec, target, &pdir.join("policy.ckpt")));
                let (status, error, report) = match r {
                    Ok(rep) => (PolicyStatus::Ok, None, Some(rep)),
                    Err(e) => (PolicyStatus::Failed, Some(e), None),
                };
                PolicyRecord { method: kind, config_index: 0, seed: s, status, error, report }
            })
            .collect()
    })?;
    write_json(&dir.join("policies.json"), &records)
}

/// Every enabled stage in order.
pub fn run_pipeline(cfg: &ExperimentConfig, run_dir: &Path) -> Result<(), PipelineError> {
    let t = cfg.stages;
    if t.eureka {
        cmd_eureka(cfg, run_dir)?;
    }
    if t.rapp {
        cmd_rapp(cfg, run_dir)?;
    }
    if t.dr_propose {
        cmd_dr_propose(cfg, run_dir)?;
    }
    if t.dr_train {
        cmd_dr_train(cfg, run_dir)?;
    }
    if t.transfer_eval {
        cmd_transfer_eval(cfg, run_dir)?;
    }
    if t.baseline && cfg.dr.methods.iter().any(|m| m.is_baseline()) {
        cmd_baseline(cfg, run_dir, None)?;
    }
    if t.report {
        super::cmd_report(run_dir)?;
    }
    Ok(())
}
