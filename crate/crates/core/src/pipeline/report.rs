use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::stages::{read_json, SearchSummary};
use super::{io_err, Method, PipelineError, RunManifest, Stage};
use crate::rl::FitnessReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyStatus {
    Ok,
    Failed,
}

/// One trained policy and its target-world report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyRecord {
    pub method: Method,
    pub config_index: usize,
    pub seed: u64,
    pub status: PolicyStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub report: Option<FitnessReport>,
}

/// Best or Average summary of one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub method: Method,
    pub fitness: f64,
    /// Population std across training seeds.
    pub std: f64,
    pub velocity_proxy: Option<f64>,
    pub distance_proxy: Option<f64>,
    pub mean_abs_action: f64,
    pub mean_torque_sq: f64,
    pub policies: usize,
    pub failed: usize,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn pop_std(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
}

fn opt_mean(v: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let xs: Option<Vec<f64>> = v.collect();
    xs.filter(|x| !x.is_empty()).map(|x| mean(&x))
}

fn row(method: Method, reports: &[&FitnessReport], fitness: f64, std: f64, policies: usize, failed: usize) -> AggregateRow {
    AggregateRow {
        method,
        fitness,
        std,
        velocity_proxy: opt_mean(reports.iter().map(|r| r.mean_forward_velocity)),
        distance_proxy: opt_mean(reports.iter().map(|r| r.mean_distance)),
        mean_abs_action: mean(&reports.iter().map(|r| r.mean_abs_action).collect::<Vec<_>>()),
        mean_torque_sq: mean(&reports.iter().map(|r| r.mean_torque_sq).collect::<Vec<_>>()),
        policies,
        failed,
    }
}

/// `(best, average)` over a method's successful policies.
///
/// Best is the config with the highest seed-mean fitness, its std taken
/// across that config's seeds. Average is the mean over configs of the
/// seed-means, its std taken across seeds of the per-seed config average.
pub fn aggregate(method: Method, records: &[PolicyRecord]) -> Option<(AggregateRow, AggregateRow)> {
    let mine: Vec<&PolicyRecord> = records.iter().filter(|r| r.method == method).collect();
    let failed = mine.iter().filter(|r| r.report.is_none() || r.status == PolicyStatus::Failed).count();
    let ok: Vec<(&PolicyRecord, &FitnessReport)> = mine
        .iter()
        .filter(|r| r.status == PolicyStatus::Ok)
        .filter_map(|r| r.report.as_ref().map(|rep| (*r, rep)))
        .collect();
    if ok.is_empty() {
        return None;
    }
    let mut by_config: BTreeMap<usize, Vec<&FitnessReport>> = BTreeMap::new();
    let mut by_seed: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    for (r, rep) in &ok {
        by_config.entry(r.config_index).or_default().push(rep);
        by_seed.entry(r.seed).or_default().push(rep.mean);
    }
    let config_means: Vec<(usize, f64)> =
        by_config.iter().map(|(c, reps)| (*c, mean(&reps.iter().map(|r| r.mean).collect::<Vec<_>>()))).collect();
    let (best_c, best_f) = config_means.iter().fold(config_means[0], |b, x| if x.1 > b.1 { *x } else { b });
    let best_reps = &by_config[&best_c];
    let best_std = pop_std(&best_reps.iter().map(|r| r.mean).collect::<Vec<_>>());
    let avg_f = mean(&config_means.iter().map(|x| x.1).collect::<Vec<_>>());
    let seed_avgs: Vec<f64> = by_seed.values().map(|v| mean(v)).collect();
    let all: Vec<&FitnessReport> = ok.iter().map(|x| x.1).collect();
    let n = mine.len();
    Some((
        row(method, best_reps, best_f, best_std, best_reps.len(), failed),
        row(method, &all, avg_f, pop_std(&seed_avgs), n, failed),
    ))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.3}")).unwrap_or_else(|| "-".into())
}

fn csv_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

const TRANSFER_HEADER: [&str; 10] = [
    "method",
    "row",
    "fitness",
    "std",
    "velocity_proxy",
    "distance_proxy",
    "mean_abs_action",
    "mean_torque_sq",
    "policies",
    "failed",
];

/// `transfer.csv` and `transfer.md`: Best and Average rows per method.
pub(crate) fn write_transfer_tables(records: &[PolicyRecord], methods: &[Method], dir: &Path) -> Result<(), PipelineError> {
    let csv_path = dir.join("transfer.csv");
    let mut w = csv::Writer::from_path(&csv_path).map_err(|e| io_err(&csv_path, e))?;
    w.write_record(TRANSFER_HEADER).map_err(|e| io_err(&csv_path, e))?;
    let mut md = String::from("| method | row | fitness | velocity | distance | mean abs action | mean torque sq |\n");
    md.push_str("|---|---|---|---|---|---|---|\n");
    for &m in methods {
        let Some((best, avg)) = aggregate(m, records) else {
            if records.iter().any(|r| r.method == m) {
                let _ = writeln!(md, "| {m} | - | failed | - | - | - | - |");
            }
            continue;
        };
        for (label, r) in [("best", &best), ("average", &avg)] {
            w.write_record([
                m.as_str().to_string(),
                label.to_string(),
                r.fitness.to_string(),
                r.std.to_string(),
                csv_opt(r.velocity_proxy),
                csv_opt(r.distance_proxy),
                r.mean_abs_action.to_string(),
                r.mean_torque_sq.to_string(),
                r.policies.to_string(),
                r.failed.to_string(),
            ])
            .map_err(|e| io_err(&csv_path, e))?;
            let _ = writeln!(
                md,
                "| {m} | {label} | {:.3} ± {:.3} | {} | {} | {:.3} | {:.4} |",
                r.fitness,
                r.std,
                fmt_opt(r.velocity_proxy),
                fmt_opt(r.distance_proxy),
                r.mean_abs_action,
                r.mean_torque_sq
            );
        }
    }
    w.flush().map_err(|e| io_err(&csv_path, e))?;
    let md_path = dir.join("transfer.md");
    std::fs::write(&md_path, md).map_err(|e| io_err(&md_path, e))
}

/// Render every completed stage into `report/report.md` plus CSVs.
pub fn cmd_report(run_dir: &Path) -> Result<(), PipelineError> {
    let started = std::time::Instant::now();
    let mut m = RunManifest::load(run_dir)?.ok_or(PipelineError::EmptyRun)?;
    let done: Vec<Stage> = m.stages.keys().copied().filter(|s| *s != Stage::Report).collect();
    if done.is_empty() {
        return Err(PipelineError::EmptyRun);
    }
    for s in &done {
        m.verify_stage(run_dir, *s)?;
    }
    let methods: Vec<Method> = m
        .config
        .pointer("/dr/methods")
        .and_then(|v| serde_json::from_value(v.clone()).ok())
        .unwrap_or_else(|| Method::ALL.to_vec());
    let dir = run_dir.join(Stage::Report.dir());
    if dir.exists() {
        std::fs::remove_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    }
    std::fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    let mut md = format!("# Run {}\n\n", m.run_id);

    if done.contains(&Stage::Eureka) {
        let s: SearchSummary = read_json(&run_dir.join("eureka/search.json"))?;
        let _ = writeln!(md, "## Reward search\n");
        let _ = writeln!(md, "Best candidate: iteration {}, index {}, score {:.3}.\n", s.best_iteration, s.best_index, s.best_score);
        md.push_str("| iteration | candidate | status | score |\n|---|---|---|---|\n");
        let p = dir.join("reward_search.csv");
        let mut w = csv::Writer::from_path(&p).map_err(|e| io_err(&p, e))?;
        w.write_record(["iteration", "candidate", "status", "score"]).map_err(|e| io_err(&p, e))?;
        for (it, idx, status, score) in s.rows() {
            let _ = writeln!(md, "| {it} | {idx} | {status} | {} |", fmt_opt(score));
            w.write_record([it.to_string(), idx.to_string(), status, csv_opt(score)]).map_err(|e| io_err(&p, e))?;
        }
        w.flush().map_err(|e| io_err(&p, e))?;
        let running: Vec<String> = s.running_best.iter().map(|v| format!("{v:.3}")).collect();
        let _ = writeln!(md, "\nRunning best: {}\n", running.join(", "));
    }

    let mut records: Vec<PolicyRecord> = Vec::new();
    if done.contains(&Stage::TransferEval) {
        records.extend(read_json::<Vec<PolicyRecord>>(&run_dir.join("eval/policies.json"))?);
    }
    if done.contains(&Stage::Baseline) {
        for k in methods.iter().filter(|k| k.is_baseline()) {
            let p = run_dir.join(Stage::Baseline.dir()).join(k.as_str()).join("policies.json");
            if p.exists() {
                records.extend(read_json::<Vec<PolicyRecord>>(&p)?);
            }
        }
    }
    if !records.is_empty() {
        let mut rows: Vec<(AggregateRow, f64)> = Vec::new();
        let mut failed: Vec<Method> = Vec::new();
        for &meth in &methods {
            match aggregate(meth, &records) {
                Some((best, avg)) => rows.push((avg, best.fitness)),
                None if records.iter().any(|r| r.method == meth) => failed.push(meth),
                None => {}
            }
        }
        rows.sort_by(|a, b| b.0.fitness.total_cmp(&a.0.fitness));
        let _ = writeln!(md, "## Target-world transfer\n");
        md.push_str(
            "| method | fitness (average) | fitness (best) | velocity | distance | mean abs action | mean torque sq | failed |\n",
        );
        md.push_str("|---|---|---|---|---|---|---|---|\n");
        let p = dir.join("summary.csv");
        let mut w = csv::Writer::from_path(&p).map_err(|e| io_err(&p, e))?;
        w.write_record([
            "method",
            "fitness_mean",
            "fitness_std",
            "best_fitness",
            "velocity_proxy",
            "distance_proxy",
            "mean_abs_action",
            "mean_torque_sq",
            "policies",
            "failed",
        ])
        .map_err(|e| io_err(&p, e))?;
        for (r, best) in &rows {
            let _ = writeln!(
                md,
                "| {} | {:.3} ± {:.3} | {:.3} | {} | {} | {:.3} | {:.4} | {}/{} |",
                r.method,
                r.fitness,
                r.std,
                best,
                fmt_opt(r.velocity_proxy),
                fmt_opt(r.distance_proxy),
                r.mean_abs_action,
                r.mean_torque_sq,
                r.failed,
                r.policies
            );
            w.write_record([
                r.method.as_str().to_string(),
                r.fitness.to_string(),
                r.std.to_string(),
                best.to_string(),
                csv_opt(r.velocity_proxy),
                csv_opt(r.distance_proxy),
                r.mean_abs_action.to_string(),
                r.mean_torque_sq.to_string(),
                r.policies.to_string(),
                r.failed.to_string(),
            ])
            .map_err(|e| io_err(&p, e))?;
        }
        for f in &failed {
            let _ = writeln!(md, "| {f} | failed | - | - | - | - | - | all |");
            w.write_record([f.as_str(), "", "", "", "", "", "", "", "", ""]).map_err(|e| io_err(&p, e))?;
        }
        w.flush().map_err(|e| io_err(&p, e))?;
    }
    let p = dir.join("report.md");
    std::fs::write(&p, md).map_err(|e| io_err(&p, e))?;
    m.complete(run_dir, Stage::Report)?;
    m.save(run_dir)?;
    log::info!("report written in {:.1} s", started.elapsed().as_secs_f64());
    Ok(())
}
