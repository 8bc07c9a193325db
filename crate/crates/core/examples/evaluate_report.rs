//! Build a synthetic tree, evaluate held-out problems and print the report in
//! all three formats.
//!
//! ```bash
//! cargo run --example evaluate_report
//! ```

use std::sync::Arc;

use optitree::eval::{evaluate, render_report, ReportFormat};
use optitree::exec::InlineExecutor;
use optitree::oracle::FeatureUniverse;
use optitree::pipeline::{Difficulty, Pipeline, PipelineConfig, SyntheticAgent};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let universe = FeatureUniverse::new(10);
    let mut sample = |prefix: &str, n: usize| -> Vec<_> {
        (0..n)
            .map(|i| SyntheticAgent::instance(format!("{prefix}{i}"), &universe.sample(&mut rng, 1, 4)))
            .collect()
    };
    let train = sample("train", 120);
    let mut test = sample("test", 12);
    for (i, p) in test.iter_mut().enumerate() {
        p.dataset = if i % 2 == 0 { "even".into() } else { "odd".into() };
        p.difficulty = Some(if i < 6 { Difficulty::Easy } else { Difficulty::Hard });
    }

    let pipeline = Pipeline::new(
        Arc::new(SyntheticAgent::default()),
        Arc::new(InlineExecutor),
        PipelineConfig::default(),
    )
    .unwrap();
    let (tree, _) = pipeline.build_tree(&train);
    let report = evaluate(&pipeline, &tree, &test).unwrap();

    print!("{}", render_report(&report, ReportFormat::Table));
    println!();
    print!("{}", render_report(&report, ReportFormat::Csv));
    let json = render_report(&report, ReportFormat::Json);
    println!("\njson report: {} bytes", json.len());
}
