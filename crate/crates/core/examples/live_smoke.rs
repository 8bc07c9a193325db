//! Ask a live chat endpoint to distill one problem. Reads OPTITREE_API_BASE,
//! OPTITREE_API_KEY and OPTITREE_MODEL; does nothing when they are unset.
//!
//! ```bash
//! OPTITREE_API_BASE=https://api.example.com/v1 OPTITREE_MODEL=some-model \
//!     cargo run --example live_smoke
//! ```

use optitree::llm::{LiveBackend, LiveConfig};
use optitree::pipeline::{Agent, LlmAgent, ProblemInstance};

fn main() {
    let config = match LiveConfig::from_env() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("skipping: {e}");
            return;
        }
    };
    println!("endpoint {} model {}", config.base_url, config.model);
    let agent = LlmAgent::new(LiveBackend::new(config).expect("client builds"));
    let problem = ProblemInstance::new(
        "smoke",
        "A bakery makes bread and cake. Bread needs 2 hours of oven time and cake 3; \
         the oven is free 40 hours a week. Bread earns $4 and cake $7. Maximize weekly profit.",
    );
    match agent.extract_statement_thoughts(&problem, None) {
        Ok(d) => {
            println!("problem type: {}", d.problem_type);
            for t in d.statement_thoughts {
                println!("  {}: {}", t.label, t.text);
            }
            for w in d.warnings {
                println!("  warning: {w}");
            }
        }
        Err(e) => eprintln!("request failed: {e}"),
    }
}
