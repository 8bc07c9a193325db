use std::collections::BTreeMap;

use super::{LlmError, TemplateName};

pub fn template_text(name: TemplateName) -> &'static str {
    match name {
        TemplateName::SubproblemIdentify => include_str!("../../prompts/subproblem_identify.txt"),
        TemplateName::DistillRoot => include_str!("../../prompts/distill_root.txt"),
        TemplateName::DistillSubtype => include_str!("../../prompts/distill_subtype.txt"),
        TemplateName::DistillModelingThoughts => {
            include_str!("../../prompts/distill_modeling_thoughts.txt")
        }
        TemplateName::AddNewNodes => include_str!("../../prompts/add_new_nodes.txt"),
        TemplateName::ModelWithThoughts => include_str!("../../prompts/model_with_thoughts.txt"),
        TemplateName::CodeCorrection => include_str!("../../prompts/code_correction.txt"),
        TemplateName::ModelPlain => include_str!("../../prompts/model_plain.txt"),
    }
}

enum Piece<'a> {
    Literal(&'a str),
    Placeholder(&'a str),
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_lowercase() || c == '_')
        && chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
}

/// Splits a template into literal runs and `{name}` placeholders. `{{` and
/// `}}` are literal braces; any other brace is kept as-is.
fn pieces(template: &str) -> Vec<Piece<'_>> {
    let mut out = Vec::new();
    let bytes = template.as_bytes();
    let mut lit_start = 0;
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'{' | b'}' if bytes.get(i + 1) == Some(&bytes[i]) => {
                out.push(Piece::Literal(&template[lit_start..i + 1]));
                i += 2;
                lit_start = i;
            }
            b'{' => {
                let close = template[i + 1..].find('}').map(|j| i + 1 + j);
                match close {
                    Some(end) if is_ident(&template[i + 1..end]) => {
                        out.push(Piece::Literal(&template[lit_start..i]));
                        out.push(Piece::Placeholder(&template[i + 1..end]));
                        i = end + 1;
                        lit_start = i;
                    }
                    _ => i += 1,
                }
            }
            _ => i += 1,
        }
    }
    out.push(Piece::Literal(&template[lit_start..]));
    out
}

/// Placeholder names of a template, in first-use order, without repeats.
pub fn placeholders(name: TemplateName) -> Vec<&'static str> {
    let mut out: Vec<&'static str> = Vec::new();
    for p in pieces(template_text(name)) {
        if let Piece::Placeholder(n) = p {
            if !out.contains(&n) {
                out.push(n);
            }
        }
    }
    out
}

/// Substitutes `variables` into the named template. Pure and byte-deterministic.
pub fn render_prompt(name: TemplateName, variables: &BTreeMap<String, String>) -> Result<String, LlmError> {
    let template = template_text(name);
    let mut out = String::with_capacity(template.len() + 256);
    for piece in pieces(template) {
        match piece {
            Piece::Literal(s) => out.push_str(s),
            Piece::Placeholder(n) => match variables.get(n) {
                Some(v) => out.push_str(v),
                None => {
                    return Err(LlmError::UnboundPlaceholder {
                        template: name,
                        name: n.to_string(),
                    })
                }
            },
        }
    }
    Ok(out)
}
