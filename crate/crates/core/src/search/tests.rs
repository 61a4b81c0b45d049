use super::*;
use crate::llm::{Playbook, ScriptedSource};
use crate::reward::ComponentStats;
use crate::sim::EnvId;

fn scored(index: usize, score: f64) -> CandidateRecord {
    CandidateRecord {
        iteration: 0,
        index,
        response: String::new(),
        reward_text: Some("component a = vx".into()),
        outcome: CandidateOutcome::Scored { score },
        components: None,
        log: None,
        policy: None,
        program: None,
    }
}

fn failed(index: usize) -> CandidateRecord {
    CandidateRecord { outcome: CandidateOutcome::ParseFailed { error: "bad".into() }, ..scored(index, 0.0) }
}

fn tiny() -> SearchConfig {
    SearchConfig {
        iterations: 2,
        candidates: 3,
        eval_episodes: 2,
        train: TrainConfig {
            total_env_steps: 512,
            num_parallel_envs: 2,
            rollout_length: 128,
            minibatch_size: 128,
            epochs_per_update: 1,
            ..TrainConfig::default()
        },
    }
}

fn block(body: &str) -> String {
    format!("Here you go.\n```reward\n{body}\n```\n")
}

#[test]
fn select_best_examples() {
    let s = |v: &[f64]| v.iter().enumerate().map(|(i, x)| scored(i, *x)).collect::<Vec<_>>();
    assert_eq!(select_best(&s(&[1.0, 3.0, 2.0])).unwrap(), 1);
    assert_eq!(select_best(&s(&[5.0, 5.0])).unwrap(), 0);
    assert_eq!(select_best(&s(&[f64::NEG_INFINITY, 2.0])).unwrap(), 1);
    assert_eq!(select_best(&s(&[f64::NAN, 0.5])).unwrap(), 1);
    assert!(matches!(select_best(&[failed(0)]), Err(SearchError::AllCandidatesFailed)));
    assert!(matches!(select_best(&s(&[f64::NEG_INFINITY])), Err(SearchError::AllCandidatesFailed)));
}

#[test]
fn reflection_lists_every_component() {
    let stat = |name: &str, v: f64| ComponentStats { name: name.into(), mean: v, std: 0.0, min: v, max: v };
    let mut r = scored(0, 4.25);
    r.components = Some(ComponentTrace {
        components: vec![stat("a", 1.0), stat("b", -0.5), stat("c", 0.0)],
        total_mean: 0.5,
        steps: 10,
    });
    let text = build_reflection(&r).unwrap().text;
    assert!(text.contains("- a: mean=1.000, std=0.000, min=1.000, max=1.000"));
    assert_eq!(text.lines().filter(|l| l.starts_with("- ")).count(), 3);
    assert!(text.contains("4.250"));
    assert!(text.contains("component a = vx"));
    assert!(matches!(build_reflection(&failed(0)), Err(SearchError::MissingScore)));
}

#[test]
fn search_survives_broken_candidates_and_feeds_back() {
    let spec = EnvironmentSpec::builtin(EnvId::SprintCart);
    let pb = Playbook {
        reward: vec![
            block("component f = exp(-((vx - 2.0)^2) / 0.25)"),
            "no block here".into(),
            block("component f = vx +"),
            block("component f = -abs(vx - 2.0)"),
            block("component f = unknown_feature"),
            block("component f = exp(-((vx - 2.0)^2))\ncomponent e = -0.1 * act_sq"),
        ],
        dr: vec![],
    };
    let source = ScriptedSource::new(pb);
    let prompt = TaskPrompt::builtin(&spec);
    let out = run_reward_search(&source, &spec, &prompt, &tiny(), 5).unwrap();
    let h = &out.history;
    assert_eq!(h.candidates.len(), 6);
    assert_eq!(h.requests.len(), 6);
    assert_eq!(source.consumed(RequestRole::Reward), 6);
    assert!(matches!(h.candidates[1].outcome, CandidateOutcome::ParseFailed { .. }));
    assert!(matches!(h.candidates[2].outcome, CandidateOutcome::ParseFailed { .. }));
    assert!(matches!(h.candidates[4].outcome, CandidateOutcome::ParseFailed { .. }));
    assert!(h.running_best.windows(2).all(|w| w[1] >= w[0]));
    assert_eq!(out.best.running_best, h.running_best);
    assert_eq!(out.best.score, *h.running_best.last().unwrap());

    // First request: system, then user text with l_task followed by l_safety.
    let first = &h.requests[0];
    assert_eq!(first.len(), 2);
    let user = &first[1].content;
    let t = user.find(&prompt.l_task).unwrap();
    let s = user.find(&prompt.l_safety).unwrap();
    assert!(t < s);

    // Second iteration carries the best response and the reflection.
    let second = &h.requests[3];
    assert_eq!(second.len(), 4);
    assert_eq!(second[2].role, "assistant");
    assert!(second[3].content.contains("Reward components:"));
    assert!(second[3].content.contains("Candidate 1 failed"));
    assert!(h.requests[..3].iter().all(|r| r.len() == 2));
}

#[test]
fn search_is_deterministic_and_writes_history() {
    let spec = EnvironmentSpec::builtin(EnvId::SprintCart);
    let pb = Playbook {
        reward: (0..6).map(|i| block(&format!("component f = -abs(vx - {}.0)", i % 3))).collect(),
        dr: vec![],
    };
    let a = run_reward_search(&ScriptedSource::new(pb.clone()), &spec, &TaskPrompt::builtin(&spec), &tiny(), 1).unwrap();
    let b = run_reward_search(&ScriptedSource::new(pb), &spec, &TaskPrompt::builtin(&spec), &tiny(), 1).unwrap();
    assert_eq!(a.best, b.best);
    assert_eq!(a.policy, b.policy);
    let dir = tempfile::tempdir().unwrap();
    a.history.write_to(dir.path(), Some(&a.best)).unwrap();
    for c in &a.history.candidates {
        let d = dir.path().join(format!("iter_{}_cand_{}", c.iteration, c.index));
        for f in ["response.txt", "reward.rwd", "parse.json", "training.csv", "score.json"] {
            assert!(d.join(f).exists(), "{f}");
        }
    }
    let best: BestPointer = serde_json::from_str(&std::fs::read_to_string(dir.path().join("best.json")).unwrap()).unwrap();
    assert_eq!(best, a.best);
}

#[test]
fn all_unparseable_is_an_error() {
    let spec = EnvironmentSpec::builtin(EnvId::SprintCart);
    let pb = Playbook { reward: vec!["nothing".into(); 6], dr: vec![] };
    let e = run_reward_search(&ScriptedSource::new(pb), &spec, &TaskPrompt::builtin(&spec), &tiny(), 0).unwrap_err();
    match e {
        SearchError::NoValidCandidate { last_errors } => assert_eq!(last_errors.len(), 3),
        other => panic!("unexpected {other}"),
    }
}

#[test]
fn source_errors_propagate() {
    let spec = EnvironmentSpec::builtin(EnvId::SprintCart);
    let pb = Playbook { reward: vec![block("component f = vx")], dr: vec![] };
    let e = run_reward_search(&ScriptedSource::new(pb), &spec, &TaskPrompt::builtin(&spec), &tiny(), 0).unwrap_err();
    assert!(matches!(e, SearchError::Source(LlmError::PlaybookExhausted { index: 1, .. })));
    let pb = Playbook { reward: vec!["   ".into(); 6], dr: vec![] };
    let e = run_reward_search(&ScriptedSource::new(pb), &spec, &TaskPrompt::builtin(&spec), &tiny(), 0).unwrap_err();
    assert!(matches!(e, SearchError::Source(LlmError::EmptyCompletion)));
}

#[test]
fn invalid_configs_rejected() {
    let spec = EnvironmentSpec::builtin(EnvId::SprintCart);
    let src = ScriptedSource::new(Playbook::default());
    let p = TaskPrompt::builtin(&spec);
    for cfg in [
        SearchConfig { iterations: 0, ..tiny() },
        SearchConfig { candidates: 0, ..tiny() },
        SearchConfig { eval_episodes: 0, ..tiny() },
    ] {
        assert!(matches!(run_reward_search(&src, &spec, &p, &cfg, 0), Err(SearchError::InvalidConfig(_))));
    }
    let empty = TaskPrompt { l_task: " ".into(), ..p };
    assert!(matches!(run_reward_search(&src, &spec, &empty, &tiny(), 0), Err(SearchError::InvalidConfig(_))));
    assert!(src.requests().is_empty());
}

#[test]
fn spin_summary_names_offset_velocity() {
    let spec = EnvironmentSpec::builtin(EnvId::SpinDisk);
    let s = environment_summary(&spec);
    assert!(s.contains("offset velocity"));
    for f in &spec.feature_catalog {
        assert!(s.contains(f.as_str()));
    }
}
