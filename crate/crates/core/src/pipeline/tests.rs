use super::*;
use crate::rl::FitnessReport;

fn rep(mean: f64) -> FitnessReport {
    FitnessReport {
        episodes: vec![mean],
        mean,
        std: 0.0,
        mean_forward_velocity: Some(1.0),
        mean_distance: Some(2.0),
        mean_abs_action: 0.5,
        mean_torque_sq: 0.25,
    }
}

fn record(method: Method, config_index: usize, seed: u64, mean: f64) -> PolicyRecord {
    PolicyRecord { method, config_index, seed, status: PolicyStatus::Ok, error: None, report: Some(rep(mean)) }
}

#[test]
fn best_and_average_fixture() {
    let rs: Vec<_> = [3.0, 1.0, 2.0].iter().enumerate().map(|(i, v)| record(Method::Ours, i, 0, *v)).collect();
    let (best, avg) = aggregate(Method::Ours, &rs).unwrap();
    assert_eq!(best.fitness, 3.0);
    assert_eq!(avg.fitness, 2.0);
    assert_eq!(avg.std, 0.0);
    assert_eq!(best.velocity_proxy, Some(1.0));
    let one = [record(Method::NoDr, 0, 0, 4.5)];
    let (b, a) = aggregate(Method::NoDr, &one).unwrap();
    assert_eq!(b, a);
    assert!(aggregate(Method::PromptDr, &one).is_none());
}

#[test]
fn stds_are_across_seeds() {
    // One config, seeds scoring 1, 2, 6: population std = sqrt(14/3).
    let rs: Vec<_> = [1.0, 2.0, 6.0].iter().enumerate().map(|(s, v)| record(Method::Ours, 0, s as u64, *v)).collect();
    let (best, avg) = aggregate(Method::Ours, &rs).unwrap();
    let want = (14.0f64 / 3.0).sqrt();
    assert!((best.std - want).abs() < 1e-12);
    assert!((avg.std - want).abs() < 1e-12);
    assert_eq!(avg.fitness, 3.0);
    // Two configs over two seeds: per-seed averages 2 and 4.
    let rs = vec![
        record(Method::Ours, 0, 0, 1.0),
        record(Method::Ours, 1, 0, 3.0),
        record(Method::Ours, 0, 1, 3.0),
        record(Method::Ours, 1, 1, 5.0),
    ];
    let (best, avg) = aggregate(Method::Ours, &rs).unwrap();
    assert_eq!((best.fitness, best.std), (4.0, 1.0));
    assert_eq!((avg.fitness, avg.std), (3.0, 1.0));
}

#[test]
fn failed_policies_are_counted_not_averaged() {
    let mut rs = vec![record(Method::Ours, 0, 0, 2.0), record(Method::Ours, 1, 0, 4.0)];
    rs.push(PolicyRecord { status: PolicyStatus::Failed, error: Some("diverged".into()), report: None, ..record(Method::Ours, 2, 0, 0.0) });
    let (best, avg) = aggregate(Method::Ours, &rs).unwrap();
    assert_eq!(best.fitness, 4.0);
    assert_eq!(avg.fitness, 3.0);
    assert_eq!(avg.failed, 1);
    assert_eq!(avg.policies, 3);
}

#[test]
fn stage_dag() {
    assert!(Stage::TransferEval.depends_on(Stage::Eureka));
    assert!(Stage::DrTrain.depends_on(Stage::Rapp));
    assert!(!Stage::Rapp.depends_on(Stage::DrPropose));
    assert!(!Stage::Eureka.depends_on(Stage::Eureka));
    assert_eq!(serde_json::to_string(&Stage::DrPropose).unwrap(), "\"dr-propose\"");
}

#[test]
fn manifest_detects_tampering_and_drops_downstream() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path();
    std::fs::create_dir_all(run.join("eureka")).unwrap();
    std::fs::write(run.join("eureka/reward.rwd"), "component a = vx").unwrap();
    std::fs::create_dir_all(run.join("rapp")).unwrap();
    std::fs::write(run.join("rapp/bounds.json"), "{}").unwrap();
    let mut m = RunManifest::new(serde_json::json!({"a": 1}));
    m.complete(run, Stage::Eureka).unwrap();
    m.complete(run, Stage::Rapp).unwrap();
    assert!(m.require(run, Stage::Eureka, "eureka/reward.rwd", "reward").is_ok());
    assert!(matches!(
        m.require(run, Stage::Eureka, "eureka/pi_initial.ckpt", "pi_initial"),
        Err(PipelineError::MissingArtifact(n)) if n == "pi_initial"
    ));
    let digest = m.digest();
    std::fs::write(run.join("eureka/reward.rwd"), "component a = 2 * vx").unwrap();
    let e = m.require(run, Stage::Eureka, "eureka/reward.rwd", "reward").unwrap_err();
    assert!(matches!(&e, PipelineError::TamperedArtifact(p) if p == "eureka/reward.rwd"));
    assert_eq!(e.exit_code(), 3);
    m.complete(run, Stage::Eureka).unwrap();
    assert!(!m.stages.contains_key(&Stage::Rapp));
    assert_ne!(m.digest(), digest);
}

#[test]
fn volatile_files_stay_out_of_the_digest() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path();
    std::fs::create_dir_all(run.join("baseline/cem_rapp")).unwrap();
    std::fs::write(run.join("baseline/cem_rapp/history.csv"), "t=1").unwrap();
    let mut a = RunManifest::new(serde_json::json!({}));
    a.complete(run, Stage::Baseline).unwrap();
    std::fs::write(run.join("baseline/cem_rapp/history.csv"), "t=2").unwrap();
    let mut b = a.clone();
    b.complete(run, Stage::Baseline).unwrap();
    assert_ne!(a, b);
    assert_eq!(a.digest(), b.digest());
}

#[test]
fn config_parsing_and_validation() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("pb.json"), r#"{"reward": [], "dr": []}"#).unwrap();
    let path = dir.path().join("exp.json");
    std::fs::write(&path, r#"{"env_id": "sprint_cart", "source": {"kind": "scripted", "playbook": "pb.json"}}"#).unwrap();
    let cfg = ExperimentConfig::load(&path).unwrap();
    assert_eq!(cfg.seeds, vec![0, 1, 2]);
    assert_eq!(cfg.dr.m, 16);
    assert_eq!(cfg.dr.methods.len(), 10);
    assert_eq!(cfg.budgets.final_stage.total_env_steps, 600_000);
    assert!(cfg.world().is_ok());

    let http: ExperimentConfig = ExperimentConfig::from_json(
        r#"{"env_id": "spin_disk", "source": {"kind": "llm_http", "endpoint": "http://127.0.0.1:1", "model": "m"}}"#,
    )
    .unwrap();
    assert!(matches!(http.source, SourceConfig::LlmHttp(_)));

    let bad = |text: &str| {
        std::fs::write(&path, text).unwrap();
        ExperimentConfig::load(&path).unwrap_err()
    };
    let e = bad(r#"{"env_id": "sprint_cart", "seeds": [], "source": {"kind": "scripted", "playbook": "pb.json"}}"#);
    assert_eq!(e.exit_code(), 2);
    let e = bad(r#"{"env_id": "sprint_cart", "source": {"kind": "scripted", "playbook": "missing.json"}}"#);
    assert!(matches!(e, PipelineError::InvalidConfig(_)));
    let e = bad(r#"{"env_id": "sprint_cart", "bogus": 1, "source": {"kind": "scripted", "playbook": "pb.json"}}"#);
    assert_eq!(e.exit_code(), 2);
    let e = bad(r#"{"env_id": "sprint_cart", "dr": {"methods": ["ours", "ours"]}, "source": {"kind": "scripted", "playbook": "pb.json"}}"#);
    assert_eq!(e.exit_code(), 2);
}

#[test]
fn method_names_round_trip() {
    for m in Method::ALL {
        assert_eq!(Method::parse(m.as_str()), Some(m));
        assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{}\"", m.as_str()));
    }
    assert_eq!(Method::parse("nope"), None);
}

#[test]
fn report_needs_a_completed_stage() {
    let dir = tempfile::tempdir().unwrap();
    let e = cmd_report(dir.path()).unwrap_err();
    assert!(matches!(e, PipelineError::EmptyRun));
    assert_eq!(e.exit_code(), 3);
    RunManifest::new(serde_json::json!({})).save(dir.path()).unwrap();
    assert!(matches!(cmd_report(dir.path()), Err(PipelineError::EmptyRun)));
}

#[test]
fn recording_source_redacts_key_material() {
    use crate::llm::{ChatMessage, Playbook, RequestRole, ScriptedSource};
    let inner = ScriptedSource::new(Playbook { reward: vec!["answer sk-test-123".into()], dr: vec![] });
    let rec = RecordingSource { inner: &inner, secret: Some("sk-test-123".into()), log: Default::default() };
    rec.complete(RequestRole::Reward, &[ChatMessage::user("hello")]).unwrap();
    let _ = rec.complete(RequestRole::Reward, &[ChatMessage::user("again")]);
    let text = rec.to_jsonl();
    assert_eq!(text.lines().count(), 2);
    assert!(!text.contains("sk-test-123"));
    assert!(text.contains("[REDACTED]"));
    assert!(text.contains("playbook exhausted"));
}
