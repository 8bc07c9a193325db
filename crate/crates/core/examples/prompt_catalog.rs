//! List the prompt templates with their placeholders and render one.
//!
//! ```bash
//! cargo run --example prompt_catalog
//! ```

use optitree::llm::{placeholders, ChatRequest, TemplateName};

fn main() {
    for t in TemplateName::ALL {
        println!("{:<26} {}", t.as_str(), placeholders(t).join(", "));
    }

    let req = ChatRequest::new(TemplateName::CodeCorrection)
        .var("user_input", "Maximize 3x + 2y subject to x + y <= 4.")
        .var("code", "print('Objective Value:', obj)")
        .var("error", "NameError: name 'obj' is not defined");
    let text = req.render().unwrap();
    println!("\n--- code_correction, {} chars ---\n{}", text.len(), text);

    let missing = ChatRequest::new(TemplateName::ModelPlain).render();
    println!("--- rendering without user_input: {}", missing.unwrap_err());
}
