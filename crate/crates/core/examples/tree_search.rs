//! Descend a small tree with the synthetic judge, with and without a depth
//! limit.
//!
//! ```bash
//! cargo run --example tree_search
//! ```

use optitree::oracle::{feature_schema, FeatureProblem};
use optitree::pipeline::{tree_search, ProblemInstance, SyntheticAgent};
use optitree::tree::ModelingTree;

fn fp(f: &[&str]) -> FeatureProblem {
    FeatureProblem::from_features(f.iter().copied()).unwrap()
}

fn main() {
    let mut tree = ModelingTree::new();
    let root = tree.root().clone();
    let lp = tree
        .add_node(&root, feature_schema(&fp(&["linear"])), &[])
        .unwrap();
    tree.add_node(&root, feature_schema(&fp(&["graph"])), &[])
        .unwrap();
    let mix = tree
        .add_node(&lp, feature_schema(&fp(&["linear", "mix"])), &[])
        .unwrap();
    tree.add_node(&lp, feature_schema(&fp(&["linear", "transport"])), &[])
        .unwrap();
    tree.add_node(
        &mix,
        feature_schema(&fp(&["linear", "mix", "integer", "ratio"])),
        &[],
    )
    .unwrap();
    tree.add_node(&mix, feature_schema(&fp(&["linear", "mix", "integer"])), &[])
        .unwrap();

    let query = ProblemInstance::new("q", "Cable production plan.\nfeatures: linear mix integer ratio");
    for limit in [None, Some(1), Some(2)] {
        let trace = tree_search(&tree, &query, &SyntheticAgent::default(), limit).unwrap();
        let path: Vec<String> = trace
            .path
            .iter()
            .map(|s| format!("{} ({:.2})", s.problem_type, s.judgment.similarity()))
            .collect();
        println!(
            "max_depth {limit:?}: {}",
            if path.is_empty() {
                "(root)".into()
            } else {
                path.join(" > ")
            }
        );
    }

    let unrelated = ProblemInstance::new("u", "features: scheduling");
    let trace = tree_search(&tree, &unrelated, &SyntheticAgent::default(), None).unwrap();
    println!("unrelated query halts at root: {}", trace.halted_at_root);
}
