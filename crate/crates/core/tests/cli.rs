mod common;

use std::path::Path;
use std::process::{Command, Output};

use optitree::eval::EvalReport;
use optitree::pipeline::SolveOutcome;
use optitree::tree::{load_tree, save_tree, ModelingTree};

use common::*;

fn optitree(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_optitree"))
        .args(args)
        .env_remove("OPTITREE_BACKEND")
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = optitree(&["stats", "--frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn stats_of_root_only_tree() {
    let dir = tempfile::tempdir().unwrap();
    let tree = dir.path().join("root_only.json");
    std::fs::write(&tree, save_tree(&ModelingTree::new()).unwrap()).unwrap();
    let out = optitree(&["stats", "--tree", s(&tree)]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["nodes"], 1);
    assert_eq!(v["depth"], 0);
}

#[test]
fn synthetic_build_then_verify() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("synthetic.jsonl");
    let mut lines = String::new();
    for (i, f) in ["f01 f02", "f03", "f01 f02 f04", "f01", "f03 f05 f06", "f02 f03"]
        .iter()
        .enumerate()
    {
        lines.push_str(&format!(
            "{{\"id\": \"s{i}\", \"description\": \"features: {f}\", \"answer\": 1}}\n"
        ));
    }
    std::fs::write(&data, lines).unwrap();
    let tree = dir.path().join("tree.json");
    let out = optitree(&[
        "build",
        "--backend",
        "synthetic",
        "--dataset",
        s(&data),
        "--out",
        s(&tree),
        "--json",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["entries"].as_array().unwrap().len(), 6);

    let built = load_tree(&std::fs::read_to_string(&tree).unwrap()).unwrap();
    assert!(built.len() > 1);
    let out = optitree(&["verify", "--tree", s(&tree), "--oracle", "synthetic"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("order-preserving: OK"));

    // Rebuilding from the same inputs gives the same tree.
    let again = dir.path().join("again.json");
    optitree(&[
        "build",
        "--backend",
        "synthetic",
        "--dataset",
        s(&data),
        "--out",
        s(&again),
    ]);
    assert_eq!(std::fs::read(&tree).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn verify_flags_a_broken_order() {
    let dir = tempfile::tempdir().unwrap();
    let mut t = ModelingTree::new();
    let root = t.root().clone();
    let wide = optitree::oracle::feature_schema(
        &optitree::oracle::FeatureProblem::from_features(["f1", "f2"]).unwrap(),
    );
    let narrow =
        optitree::oracle::feature_schema(&optitree::oracle::FeatureProblem::from_features(["f1"]).unwrap());
    let a = t.add_node(&root, wide, &[]).unwrap();
    t.add_node(&a, narrow, &[]).unwrap();
    let tree = dir.path().join("bad.json");
    std::fs::write(&tree, save_tree(&t).unwrap()).unwrap();
    let out = optitree(&["verify", "--tree", s(&tree)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("1 violations"));
}

#[test]
fn live_verify_needs_confirmation() {
    let dir = tempfile::tempdir().unwrap();
    let tree = dir.path().join("t.json");
    std::fs::write(&tree, save_tree(&ModelingTree::new()).unwrap()).unwrap();
    let out = optitree(&["verify", "--tree", s(&tree), "--oracle", "live"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--yes-really"));
}

fn fixture_tree_file(dir: &Path) -> std::path::PathBuf {
    let p = dir.join("fixture_tree.json");
    std::fs::write(&p, save_tree(&fixture_tree()).unwrap()).unwrap();
    p
}

#[test]
fn solve_with_transcript_backend() {
    let dir = tempfile::tempdir().unwrap();
    let tree = fixture_tree_file(dir.path());
    let problem = dir.path().join("cable.json");
    let record = read_fixture("replay/problems.jsonl")
        .lines()
        .next()
        .unwrap()
        .to_string();
    std::fs::write(&problem, record).unwrap();
    let backend = format!("transcript:{}", fixture("replay/cable.jsonl").display());
    let out = optitree(&[
        "solve",
        "--tree",
        s(&tree),
        "--problem",
        s(&problem),
        "--backend",
        &backend,
        "--json",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let o: SolveOutcome = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(o.matched, Some(true));
    assert_eq!(o.trace.depth, 2);
    assert_eq!(o.exec.unwrap().objective, Some(819.0));
}

#[test]
fn eval_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let tree = fixture_tree_file(dir.path());
    let transcript = dir.path().join("all.jsonl");
    let all: String = ["cable", "medicine", "diet_infeasible"]
        .iter()
        .map(|id| read_fixture(&format!("replay/{id}.jsonl")))
        .collect();
    std::fs::write(&transcript, all).unwrap();
    let report = dir.path().join("report.json");
    let backend = format!("transcript:{}", transcript.display());
    let out = optitree(&[
        "eval",
        "--tree",
        s(&tree),
        "--dataset",
        s(&fixture("replay/problems.jsonl")),
        "--report",
        s(&report),
        "--backend",
        &backend,
        "--jobs",
        "1",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let table = String::from_utf8_lossy(&out.stdout);
    assert!(table.lines().any(|l| l.starts_with("fixtures ")), "{table}");
    let r: EvalReport = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!((r.total, r.accuracy, r.code_pass_rate), (3, 1.0, 1.0));
    assert_eq!(r.coverage_rate, 2.0 / 3.0);
    assert_eq!(r.greatest_depth, 2);
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let tree = dir.path().join("t.json");
    let data = dir.path().join("d.jsonl");
    std::fs::write(
        &data,
        "{\"id\": \"a\", \"description\": \"features: f1 f2\", \"answer\": 1}\n",
    )
    .unwrap();
    let cfg = dir.path().join("optitree.toml");
    std::fs::write(
        &cfg,
        format!(
            "backend = \"synthetic\"\ndataset = \"{}\"\nupdate_rounds = 1\n",
            s(&data)
        ),
    )
    .unwrap();
    let out = optitree(&["build", "--config", s(&cfg), "--out", s(&tree)]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let out = optitree(&[
        "build",
        "--config",
        s(&cfg),
        "--out",
        s(&tree),
        "--backend",
        "nonsense",
    ]);
    assert_eq!(out.status.code(), Some(2));
    std::fs::write(&cfg, "colour = \"blue\"\n").unwrap();
    assert_eq!(
        optitree(&["stats", "--config", s(&cfg), "--tree", s(&tree)])
            .status
            .code(),
        Some(2)
    );
}
