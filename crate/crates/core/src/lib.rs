//! Modeling-tree engine for turning natural-language operations-research
//! problems into solver code.
//!
//! The engine keeps a taxonomy of problem schemas in which every ancestor is
//! a subproblem of its descendants ([`tree`]). A new problem is decomposed by
//! descending that taxonomy to its deepest known subproblem ([`pipeline`]),
//! whose modeling thoughts then steer code generation through a chat model
//! ([`llm`]). Generated scripts run in a subprocess ([`exec`]) and the result
//! is compared with the ground truth; failures grow the tree.
//!
//! Every decision point goes through a pluggable judgment oracle ([`oracle`]).
//! The deterministic feature-set oracle and the recorded-transcript chat
//! backend make the whole pipeline reproducible without a live model.
//!
//! Runnable walk-throughs live in `examples/`:
//!
//! ```text
//! cargo run -p optitree --example schema_roundtrip
//! cargo run -p optitree --example node_expansion
//! cargo run -p optitree --example synthetic_build
//! ```

pub mod clock;
pub mod eval;
pub mod exec;
pub mod llm;
pub mod oracle;
pub mod pipeline;
pub mod schema;
pub mod tree;

pub mod cli;

mod sync;

pub use schema::{ModelingThoughts, NodeSchema, StatementThought};
pub use tree::{ModelingTree, NodeId, TreeStats};
