//! Solve the cable problem from a recorded transcript. Requires python3.
//!
//! ```bash
//! cargo run --example transcript_replay
//! ```

use std::sync::Arc;

use optitree::clock::FrozenClock;
use optitree::eval::load_dataset;
use optitree::exec::ProcessExecutor;
use optitree::llm::TranscriptBackend;
use optitree::pipeline::{LlmAgent, Pipeline, PipelineConfig};
use optitree::schema::parse_schema;
use optitree::tree::ModelingTree;

fn main() {
    let mut tree = ModelingTree::new();
    let root = tree.root().clone();
    let pm = tree
        .add_node(
            &root,
            parse_schema(include_str!("../tests/fixtures/product_mix_schema.txt")).unwrap(),
            &[],
        )
        .unwrap();
    tree.add_node(
        &root,
        parse_schema(include_str!("../tests/fixtures/diet_schema.txt")).unwrap(),
        &[],
    )
    .unwrap();
    tree.add_node(
        &pm,
        parse_schema(include_str!("../tests/fixtures/sales_inventory_schema.txt")).unwrap(),
        &[],
    )
    .unwrap();

    let problems = load_dataset(include_str!("../tests/fixtures/replay/problems.jsonl")).unwrap();
    let cable = &problems.instances[0];
    let backend =
        TranscriptBackend::from_jsonl(include_str!("../tests/fixtures/replay/cable.jsonl")).unwrap();
    let pipeline = Pipeline::new(
        Arc::new(LlmAgent::new(backend)),
        Arc::new(ProcessExecutor::default()),
        PipelineConfig::default(),
    )
    .unwrap()
    .with_clock(Arc::new(FrozenClock));

    let outcome = pipeline.solve_problem(&tree, cable);
    for step in &outcome.trace.path {
        println!("matched {} ({})", step.problem_type, step.judgment.rationale());
    }
    let exec = outcome.exec.as_ref().expect("script ran");
    print!("{}", exec.stdout);
    println!(
        "status {:?}, ground truth {}, matched {:?}",
        exec.status,
        cable.ground_truth.unwrap(),
        outcome.matched
    );
}
