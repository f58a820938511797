//! CLI surface: subcommands, flags, exit codes, output formats.

use std::process::Command;

use tempfile::tempdir;

fn masem() -> Command {
    Command::new(env!("CARGO_BIN_EXE_masem"))
}

#[test]
fn list_names_all_problems_and_methods() {
    let out = masem().arg("list").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in [
        "disks-connected",
        "disks-disconnected",
        "seven-lobes",
        "sine",
        "swiss-roll",
        "stress:d=<d>,m=<m>",
        "mp-grid",
        "mp-random",
        "grasping",
        "masem-nhr",
        "cluster-nhr",
        "scmc",
    ] {
        assert!(text.contains(name), "missing {name} in listing");
    }
}

#[test]
fn unknown_method_exits_2() {
    let dir = tempdir().unwrap();
    let out = masem()
        .args(["run", "--problem", "sine", "--method", "bogus"])
        .arg("--out")
        .arg(dir.path().join("x"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_problem_exits_2() {
    let dir = tempdir().unwrap();
    let out = masem()
        .args(["run", "--problem", "nonexistent", "--method", "nhr"])
        .arg("--out")
        .arg(dir.path().join("x"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn ground_truth_without_sampler_exits_2() {
    let dir = tempdir().unwrap();
    let out = masem()
        .args(["ground-truth", "--problem", "mp-grid", "--n", "5"])
        .arg("--out")
        .arg(dir.path().join("gt.csv"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn ground_truth_writes_csv() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("gt.csv");
    let out = masem()
        .args(["ground-truth", "--problem", "sine", "--n", "20", "--seed", "4"])
        .arg("--out")
        .arg(&path)
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 20);
    for line in text.lines() {
        assert_eq!(line.split(',').count(), 2);
        for field in line.split(',') {
            field.parse::<f64>().unwrap();
        }
    }
}

#[test]
fn run_emits_jsonl_and_csv() {
    let dir = tempdir().unwrap();
    let base = dir.path().join("run");
    let out = masem()
        .args([
            "run",
            "--problem",
            "disks-disconnected",
            "--method",
            "nhr",
            "--seed",
            "1",
            "--n",
            "50",
            "--steps",
            "20",
            "--m-steps",
            "5",
            "--metrics",
            "tv_components,mean_max_slack",
        ])
        .arg("--out")
        .arg(&base)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let jsonl = std::fs::read_to_string(base.with_extension("jsonl")).unwrap();
    let record: serde_json::Value = serde_json::from_str(jsonl.lines().last().unwrap()).unwrap();
    assert_eq!(record["schema_version"], 1);
    assert_eq!(record["problem"], "disks-disconnected");
    assert!(record["tv_components"].is_number());
    assert!(record.get("sinkhorn_w22").is_none(), "unrequested metric present");
    let csv = std::fs::read_to_string(base.with_extension("csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.starts_with("schema_version,problem,method,seed,n,steps,"));
}

#[test]
fn meanfield_verify_reports_zero_violations() {
    let out = masem()
        .args(["meanfield-verify", "--instances", "50", "--t-max", "50"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("violations=0"), "{text}");
}

#[test]
fn component_loss_emits_csv_rows() {
    let out = masem()
        .args([
            "component-loss",
            "--tau-list",
            "1.0",
            "--n-list",
            "200",
            "--trials",
            "3",
            "--iterations",
            "3",
            "--init",
            "uniform",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("tau,n,init_mode,mean_covered,ci95,trials"));
    assert!(text.lines().count() >= 2);
    let row = text.lines().nth(1).unwrap();
    assert!(row.starts_with("1,200,uniform,"));
}
