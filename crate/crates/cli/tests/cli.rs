use std::path::Path;
use std::process::{Command, Output};

use ncde_core::params::count_params;
use ncde_core::FieldKind;
use serde_json::Value;

fn ncde(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ncde"))
        .args(args)
        .env_remove("NCDE_OUT")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("config.json");
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

const TINY: &str = r#"{
  "dataset": {"kind": "synth", "generator": "sine-freq", "n": 24, "length": 10, "noise": 0.05, "seed": 3},
  "model": {"hidden": 4, "width": 6},
  "training": {"epochs": 2, "batch_size": 8},
  "seeds": [0, 1]
}"#;

#[test]
fn train_writes_per_seed_artifacts_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let out = dir.path().join("out");
    let o = ncde(&["train", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(
        text.contains("acc_mean=") && text.contains("acc_std=") && text.contains("runs=2"),
        "{text}"
    );

    let summary: Value = serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    let hash = summary["config_hash"].as_str().unwrap().to_string();
    assert_eq!(summary["accuracies"].as_array().unwrap().len(), 2);
    for seed in [0u64, 1] {
        let run = out.join(format!("seed-{seed}"));
        let csv = std::fs::read_to_string(run.join("metrics.csv")).unwrap();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "epoch,split,loss,accuracy,seed,config_hash,version"
        );
        for line in lines {
            let cols: Vec<&str> = line.split(',').collect();
            assert_eq!(cols[4], seed.to_string());
            assert_eq!(cols[5], hash);
            assert_eq!(cols[6], ncde_core::VERSION);
        }
        let report: Value = serde_json::from_str(&std::fs::read_to_string(run.join("report.json")).unwrap()).unwrap();
        assert_eq!(report["config_hash"], hash.as_str());
        assert_eq!(report["seed"], seed);
        assert_eq!(report["version"], ncde_core::VERSION);
        let ckpt: Value = serde_json::from_str(&std::fs::read_to_string(run.join("checkpoint.json")).unwrap()).unwrap();
        assert_eq!(ckpt["config_hash"], hash.as_str());
        assert_eq!(ckpt["seed"], seed);
        assert_eq!(ckpt["artifact_version"], ncde_core::VERSION);
    }

    let e = ncde(&[
        "eval",
        "--config",
        &cfg,
        "--checkpoint",
        out.join("seed-1/checkpoint.json").to_str().unwrap(),
    ]);
    assert!(e.status.success(), "{}", String::from_utf8_lossy(&e.stderr));
    let record: Value = serde_json::from_str(&stdout(&e)).unwrap();
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("seed-1/report.json")).unwrap()).unwrap();
    assert_eq!(record["accuracy"], report["report"]["test_accuracy"]);
}

#[test]
fn seed_flag_and_env_output_root() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let root = dir.path().join("from-env");
    let o = Command::new(env!("CARGO_BIN_EXE_ncde"))
        .args(["train", "--config", &cfg, "--seed", "5"])
        .env("NCDE_OUT", &root)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(stdout(&o).contains("runs=1"));
    assert!(root.join("seed-5/metrics.csv").is_file());
    assert!(!root.join("seed-0").exists());
}

#[test]
fn dry_run_prints_plan_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let out = dir.path().join("out");
    let o = ncde(&["train", "--config", &cfg, "--out", out.to_str().unwrap(), "--dry-run"]);
    assert!(o.status.success());
    let plan: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(plan["runs"].as_array().unwrap().len(), 2);
    assert_eq!(plan["config"]["model"]["hidden"], 4);
    assert!(!out.exists());
}

#[test]
fn config_errors_exit_2_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    for body in [
        r#"{"dataset": {"kind": "ts", "train": "/definitely/missing.ts"}}"#.to_string(),
        TINY.replacen('{', r#"{"epochs": 3,"#, 1),
        "not json".to_string(),
    ] {
        let cfg = write_config(dir.path(), &body);
        let o = ncde(&["train", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "{body}");
        assert!(!out.exists());
    }
    let o = ncde(&["train", "--config", "/definitely/missing.json"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn numeric_blow_up_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let body = TINY.replace(r#""batch_size": 8"#, r#""batch_size": 8, "lr": 1e300"#);
    let cfg = write_config(dir.path(), &body);
    let o = ncde(&[
        "train",
        "--config",
        &cfg,
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn compare_reports_both_fields_with_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &TINY.replace(r#""seeds": [0, 1]"#, r#""seeds": [0]"#));
    let out = dir.path().join("out");
    let o = ncde(&["compare", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = std::fs::read_to_string(out.join("compare.txt")).unwrap();
    assert!(table.contains("matrix") && table.contains("jacobian-truncated") && table.contains("# params"));
    let cmp: Value = serde_json::from_str(&std::fs::read_to_string(out.join("compare.json")).unwrap()).unwrap();
    let rows = cmp["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    // sine-freq has one channel plus time.
    for (row, kind) in rows.iter().zip([FieldKind::Matrix, FieldKind::JacobianTruncated]) {
        assert_eq!(row["param_count"], count_params(kind, 2, 4, 6, 2));
        assert!(table.contains(&count_params(kind, 2, 4, 6, 2).to_string()));
    }
    assert!(out.join("matrix/seed-0/metrics.csv").is_file());
    assert!(out.join("jacobian-truncated/seed-0/metrics.csv").is_file());
}

#[test]
fn params_subcommand() {
    let o = ncde(&["params", "-u", "1", "-v", "1", "-d", "1", "-c", "1", "--json"]);
    let r: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(r["rows"][0]["total"], 8);
    assert_eq!(r["rows"][1]["total"], 9);
    let o = ncde(&["params", "-u", "4", "-v", "32", "-d", "128", "-c", "20"]);
    assert!(stdout(&o).contains("ratio (matrix / jacobian): 2.34"));
    let o = ncde(&["params", "--find-ratio", "2.0", "--json"]);
    let m: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let ratio = m["ratio"].as_f64().unwrap();
    assert!((1.9..=2.1).contains(&ratio));
    assert_eq!(ncde(&["params", "-u", "0"]).status.code(), Some(2));
}

#[test]
fn verify_hook_names_the_jacobian_check() {
    let o = ncde(&["verify", "--corrupt-jvp-sign"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("jacobian-jvp"));
    assert!(stdout(&o).contains("FAIL jacobian-jvp"));
}
