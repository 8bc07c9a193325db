//! Grow a tree from random feature problems and check subproblem order.
//!
//! ```bash
//! cargo run --release --example synthetic_build -- 500
//! ```

use std::sync::Arc;

use optitree::exec::InlineExecutor;
use optitree::oracle::{schema_features, FeatureUniverse};
use optitree::pipeline::{Pipeline, PipelineConfig, SyntheticAgent};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let n: usize = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(300);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let universe = FeatureUniverse::new(20);
    let problems: Vec<_> = (0..n)
        .map(|i| SyntheticAgent::instance(format!("p{i}"), &universe.sample(&mut rng, 2, 8)))
        .collect();

    let pipeline = Pipeline::new(
        Arc::new(SyntheticAgent::default()),
        Arc::new(InlineExecutor),
        PipelineConfig::default(),
    )
    .unwrap();
    let (tree, report) = pipeline.build_tree_with(&problems, |k, t| {
        if k % 100 == 0 {
            println!("{k:>5} problems  {:>5} nodes  depth {}", t.len(), t.stats().depth);
        }
    });

    let updated = report
        .entries
        .iter()
        .filter(|e| e.update.as_ref().is_some_and(|u| u.updated))
        .count();
    let collisions = report
        .entries
        .iter()
        .filter(|e| e.update.as_ref().is_some_and(|u| u.collision.is_some()))
        .count();
    println!("\n{updated} problems added nodes, {collisions} hit an existing type");
    println!("stats: {}", serde_json::to_string(&report.stats).unwrap());
    let violations = tree.check_order_preserving(|a, d| schema_features(a).is_subset(&schema_features(d)));
    println!("order violations: {}", violations.len());
}
