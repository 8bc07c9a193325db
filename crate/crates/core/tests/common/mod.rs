#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::sync::Arc;

use optitree::clock::FrozenClock;
use optitree::eval::load_dataset;
use optitree::exec::{ExecStatus, ProcessExecutor};
use optitree::llm::TranscriptBackend;
use optitree::oracle::schema_features;
use optitree::pipeline::{LlmAgent, Pipeline, PipelineConfig, ProblemInstance};
use optitree::schema::{parse_schema, NodeSchema};
use optitree::tree::ModelingTree;

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(rel)
}

pub fn read_fixture(rel: &str) -> String {
    std::fs::read_to_string(fixture(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

pub fn schema_fixture(rel: &str) -> NodeSchema {
    parse_schema(&read_fixture(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

/// root -> Product Mix -> Sales and Inventory, root -> Diet.
pub fn fixture_tree() -> ModelingTree {
    let mut t = ModelingTree::new();
    let root = t.root().clone();
    let pm = t
        .add_node(&root, schema_fixture("product_mix_schema.txt"), &[])
        .unwrap();
    t.add_node(&root, schema_fixture("diet_schema.txt"), &[]).unwrap();
    t.add_node(&pm, schema_fixture("sales_inventory_schema.txt"), &[])
        .unwrap();
    t
}

pub fn replay_problems() -> Vec<ProblemInstance> {
    load_dataset(&read_fixture("replay/problems.jsonl"))
        .unwrap()
        .instances
}

pub fn replay_problem(id: &str) -> ProblemInstance {
    replay_problems().into_iter().find(|p| p.id == id).unwrap()
}

pub type ReplayAgent = LlmAgent<TranscriptBackend>;

/// Transcript-driven pipeline that runs scripts under python3 with a frozen
/// clock.
pub fn transcript_pipeline(transcript: &str) -> (Pipeline, Arc<ReplayAgent>) {
    let backend = TranscriptBackend::from_jsonl(transcript).unwrap();
    let agent = Arc::new(LlmAgent::new(backend));
    let pipeline = Pipeline::new(
        agent.clone(),
        Arc::new(ProcessExecutor::default().with_clock(Arc::new(FrozenClock))),
        PipelineConfig::default(),
    )
    .unwrap()
    .with_clock(Arc::new(FrozenClock));
    (pipeline, agent)
}

pub fn replay_pipeline(id: &str) -> (Pipeline, Arc<ReplayAgent>) {
    transcript_pipeline(&read_fixture(&format!("replay/{id}.jsonl")))
}

/// Exhaustive integer search over the cable problem: maximize 12x + 5y
/// subject to 10x + 7y <= 1000, y >= 5x, x >= 10. Returns (value, x, y).
pub fn cable_optimum() -> (i64, i64, i64) {
    let mut best: Option<(i64, i64, i64)> = None;
    for x in 0..=100 {
        for y in 0..=1000 / 7 {
            if 10 * x + 7 * y <= 1000 && y >= 5 * x && x >= 10 {
                let v = 12 * x + 5 * y;
                if best.is_none_or(|b| v > b.0) {
                    best = Some((v, x, y));
                }
            }
        }
    }
    best.expect("cable problem is feasible")
}

pub fn feature_subset(a: &NodeSchema, d: &NodeSchema) -> bool {
    schema_features(a).is_subset(&schema_features(d))
}

/// (fixture file, expected status, expected objective)
pub const STDOUT_FIXTURES: [(&str, ExecStatus, Option<f64>); 4] = [
    ("stdout/optimal.txt", ExecStatus::Optimal, Some(819.0)),
    ("stdout/infeasible.txt", ExecStatus::Infeasible, None),
    ("stdout/unbounded.txt", ExecStatus::Unbounded, None),
    ("stdout/garbage.txt", ExecStatus::ParseFailure, None),
];

/// A script whose stdout is exactly `text`.
pub fn echo_script(text: &str) -> String {
    format!(
        "import sys\nsys.stdout.write({})\n",
        serde_json::to_string(text).unwrap()
    )
}

pub fn set<'a>(items: impl IntoIterator<Item = &'a str>) -> BTreeSet<String> {
    items.into_iter().map(str::to_string).collect()
}
