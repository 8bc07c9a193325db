//! Parse a loosely formatted node schema, render it canonically and read it
//! back.
//!
//! ```bash
//! cargo run --example schema_roundtrip
//! ```

use optitree::schema::{parse_schema, render_schema, validate_schema};

const DIET: &str = include_str!("../tests/fixtures/diet_schema.txt");

fn main() {
    let schema = parse_schema(DIET).expect("fixture parses");
    println!("problem type: {}", schema.problem_type);
    for t in &schema.statement_thoughts {
        println!("  statement [{}]", t.label);
    }
    for s in &schema.modeling_thoughts.steps {
        println!("  step [{}]", s.tag);
    }
    println!("  {} error tips", schema.modeling_thoughts.error_tips.len());
    assert!(validate_schema(&schema).is_empty());

    let canonical = render_schema(&schema).unwrap();
    let back = parse_schema(&canonical).unwrap();
    assert_eq!(back, schema);
    println!(
        "\ncanonical document is {} bytes and round-trips exactly",
        canonical.len()
    );
}
