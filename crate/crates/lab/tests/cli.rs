use std::fs;
use std::process::Command;

use jsq_lab::config::{ExperimentConfig, Kind};
use jsq_lab::report::Summary;
use jsq_lab::{run_experiment, TestReport};

fn lab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_jsq-lab"))
}

#[test]
fn validate_rejects_empty_grid() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, r#"{"kind": "lln", "sizes": []}"#).unwrap();
    let out = lab().args(["validate", "--config"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("empty"));
}

#[test]
fn validate_prints_resolved_config_and_hash() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ok.json");
    fs::write(&path, r#"{"kind": "martingale", "replicas": 10}"#).unwrap();
    let out = lab().args(["validate", "--config"]).arg(&path).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("\"replicas\": 10"));
    assert!(text.contains("config hash:"));
}

#[test]
fn run_then_report_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("m.json");
    fs::write(&cfg, r#"{"kind": "martingale", "replicas": 8, "sizes": [200], "t_end": 5.0}"#).unwrap();
    let out_dir = dir.path().join("run");
    let out = lab()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .args(["--seed", "9"])
        .env("JSQ_LAB_WORKERS", "2")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: TestReport = serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report.seed, 9);
    assert_eq!(report.replica_seeds.len(), 8);
    assert!(out_dir.join("martingale.csv").exists());
    let rendered = lab().arg("report").arg(out_dir.join("report.json")).output().unwrap();
    assert!(String::from_utf8_lossy(&rendered.stdout).contains("fraction_replicas_within_z"));
}

#[test]
fn seed_changes_outputs_and_hash() {
    let mut a = ExperimentConfig::new(Kind::Martingale);
    a.replicas = Some(4);
    a.sizes = Some(vec![100]);
    let mut b = a.clone();
    b.seed = Some(12345);
    let (da, db) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ra = run_experiment(&a, da.path()).unwrap();
    let rb = run_experiment(&b, db.path()).unwrap();
    assert_ne!(ra.config_hash, rb.config_hash);
    assert_ne!(fs::read(da.path().join("martingale.csv")).unwrap(), fs::read(db.path().join("martingale.csv")).unwrap());
}

#[test]
fn failing_kind_leaves_other_outputs_intact() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("stability");
    let first = run_experiment(&ExperimentConfig::new(Kind::Stability), &good).unwrap();
    let before = fs::read(good.join("stability_trials.csv")).unwrap();

    let mut bad = ExperimentConfig::new(Kind::Oracle);
    bad.cap = Some(40);
    assert!(run_experiment(&bad, &dir.path().join("oracle")).is_err());
    assert_eq!(fs::read(good.join("stability_trials.csv")).unwrap(), before);
    assert!(first.passed);
}

/// Full batch with a threshold that the oracle cannot meet: the batch
/// completes, the oracle is marked failed and every other kind keeps its files.
#[test]
fn batch_isolates_failures() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::new(Kind::All);
    cfg.thresholds.tv_max = 0.0;
    let summary = jsq_lab::run_all(&cfg, dir.path()).unwrap();
    let on_disk: Summary = serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(on_disk, summary);
    assert_eq!(summary.kinds.len(), 6);
    let oracle = summary.kinds.iter().find(|k| k.kind == Kind::Oracle).unwrap();
    assert!(!oracle.passed);
    assert_eq!(oracle.failed_checks, ["tv_busy_fraction_marginal", "tv_queue_length_marginal"]);
    for k in &summary.kinds {
        assert!(k.error.is_none(), "{:?}", k);
        for a in &k.artifacts {
            assert!(dir.path().join(a).exists(), "{a}");
        }
    }
}
