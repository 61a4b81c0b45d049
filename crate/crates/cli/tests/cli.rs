#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::path::Path;
use std::process::Command;

use serde_json::json;

fn simgap(args: &[&str], envs: &[(&str, &str)]) -> std::process::Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_simgap"));
    c.args(args).env_remove("SIMGAP_API_KEY");
    for (k, v) in envs {
        c.env(k, v);
    }
    c.output().unwrap()
}

fn write_config(dir: &Path, source: serde_json::Value) -> String {
    let cfg = json!({
        "env_id": "sprint_cart",
        "seeds": [0],
        "source": source,
        "eureka": {"iterations": 1, "candidates": 2, "eval_episodes": 1},
        "budgets": {"eureka_stage": {"total_env_steps": 1024}, "final_stage": {"total_env_steps": 1024}},
    });
    let p = dir.join("experiment.json");
    std::fs::write(&p, cfg.to_string()).unwrap();
    p.to_string_lossy().into_owned()
}

fn files_under(dir: &Path, out: &mut Vec<std::path::PathBuf>) {
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            files_under(&p, out);
        } else {
            out.push(p);
        }
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let run = run.to_str().unwrap();

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"env_id": "sprint_cart", "seeds": [], "source": {"kind": "scripted", "playbook": "x.json"}}"#).unwrap();
    let out = simgap(&["eureka", "--config", bad.to_str().unwrap(), "--run-dir", run], &[]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));

    std::fs::write(dir.path().join("pb.json"), r#"{"reward": [], "dr": []}"#).unwrap();
    let cfg = write_config(dir.path(), json!({"kind": "scripted", "playbook": "pb.json"}));
    let out = simgap(&["rapp", "--config", &cfg, "--run-dir", run], &[]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("pi_initial"));

    let empty = dir.path().join("empty");
    let out = simgap(&["report", "--config", &cfg, "--run-dir", empty.to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(3));

    let out = simgap(&["baseline", "--kind", "cem_rapp", "--config", &cfg, "--run-dir", run], &[]);
    assert_eq!(out.status.code(), Some(3));

    let out = simgap(&["baseline", "--kind", "nope", "--config", &cfg, "--run-dir", run], &[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn live_source_run_leaks_no_key_material() {
    let sentinel = "sk-SENTINEL-4b1d6e0c99";
    let reward = "```reward\ncomponent forward = exp(-((vx - 2.0)^2) / 2.0)\n```";
    // First reply is a 500 whose body echoes the authorization header.
    let server = common::serve(3, move |i, req| {
        if i == 0 {
            (500, json!({"error": format!("{:?}", req.headers)}).to_string())
        } else {
            (200, common::chat_body(reward))
        }
    });
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        json!({"kind": "llm_http", "endpoint": server.base_url, "model": "mock", "backoff_ms": 1}),
    );
    let run = dir.path().join("run");
    let out = simgap(
        &["eureka", "--config", &cfg, "--run-dir", run.to_str().unwrap()],
        &[("SIMGAP_API_KEY", sentinel), ("RUST_LOG", "debug")],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let reqs = server.requests();
    assert_eq!(reqs.len(), 3);
    assert!(reqs[0].headers.iter().any(|h| h.contains(sentinel)), "key was not sent");

    let log = std::fs::read_to_string(run.join("logs/simgap.log")).unwrap();
    assert!(log.contains("[REDACTED]"), "echoed key never reached the log");
    let mut files = Vec::new();
    files_under(&run, &mut files);
    assert!(files.len() > 5);
    for f in files {
        let bytes = std::fs::read(&f).unwrap();
        assert!(!String::from_utf8_lossy(&bytes).contains(sentinel), "{} contains the key", f.display());
    }
    assert!(!String::from_utf8_lossy(&out.stderr).contains(sentinel));
}

#[test]
fn shipped_smoke_config_runs_end_to_end() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/sprint_cart_smoke.json");
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let out = simgap(&["run", "--config", root.to_str().unwrap(), "--run-dir", run.to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(run.join("report/summary.csv").exists());
    assert!(run.join("logs/simgap.log").exists());
}
