//! Pulling structured records and code blocks out of free-form completions.

use serde_json::Value;

use super::LlmError;

/// Values of `matching_subtype` that mean "no subtype matched".
pub const NOT_FOUND_MARKERS: [&str; 4] = ["subtype not find", "subtype not found", "not found", "none"];

/// Fenced blocks as `(language tag, body)`.
fn fenced_blocks(text: &str) -> Vec<(&str, &str)> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find("```") {
        let after = &rest[open + 3..];
        let (lang, body_start) = match after.find('\n') {
            Some(nl) => (after[..nl].trim(), nl + 1),
            None => break,
        };
        let body = &after[body_start..];
        let Some(close) = body.find("```") else { break };
        out.push((lang, &body[..close]));
        rest = &body[close + 3..];
    }
    out
}

/// Parses a record leniently: strict JSON first, then JSON5 (single quotes,
/// unquoted keys, trailing commas), then JSON5 after inserting commas missing
/// between lines and mapping Python literals.
fn parse_record(text: &str) -> Option<Value> {
    let text = text.trim();
    let candidates = [
        serde_json::from_str::<Value>(text).ok(),
        json5::from_str::<Value>(text).ok(),
        json5::from_str::<Value>(&repair(text)).ok(),
    ];
    candidates.into_iter().flatten().find(Value::is_object)
}

fn repair(text: &str) -> String {
    let text = text
        .replace(": True", ": true")
        .replace(": False", ": false")
        .replace(": None", ": null");
    let lines: Vec<&str> = text.lines().collect();
    let mut out = String::with_capacity(text.len() + 16);
    for (i, line) in lines.iter().enumerate() {
        out.push_str(line);
        let t = line.trim_end();
        let next = lines[i + 1..].iter().map(|l| l.trim()).find(|l| !l.is_empty());
        let ends_value = t.ends_with(['"', '\'', '}', ']'])
            || t.ends_with("true")
            || t.ends_with("false")
            || t.ends_with("null")
            || t.ends_with(|c: char| c.is_ascii_digit())
            || t.ends_with('>');
        let next_is_key = next.is_some_and(|n| {
            !n.starts_with(['}', ']']) && n.contains(':') && !t.ends_with(',') && !t.ends_with(['{', '['])
        });
        if ends_value && next_is_key && !t.trim().is_empty() {
            out.push(',');
        }
        out.push('\n');
    }
    out
}

/// The first fenced structured block, falling back to the largest braced span
/// that parses as a record.
pub fn extract_json_block(text: &str) -> Result<Value, LlmError> {
    let blocks = fenced_blocks(text);
    let mut saw_structured_fence = false;
    for (lang, body) in &blocks {
        let is_json =
            lang.eq_ignore_ascii_case("json") || (lang.is_empty() && body.trim_start().starts_with('{'));
        if is_json {
            saw_structured_fence = true;
            if let Some(v) = parse_record(body) {
                return Ok(v);
            }
        }
    }

    let opens: Vec<usize> = text.match_indices('{').map(|(i, _)| i).collect();
    let closes: Vec<usize> = text.match_indices('}').map(|(i, _)| i).collect();
    if opens.is_empty() || closes.is_empty() {
        return Err(if saw_structured_fence {
            LlmError::MalformedStructure("fenced block is not a record".into())
        } else {
            LlmError::NoStructuredBlock
        });
    }
    let mut spans: Vec<(usize, usize)> = opens
        .iter()
        .flat_map(|&o| closes.iter().filter(move |&&c| c > o).map(move |&c| (o, c)))
        .collect();
    spans.sort_by_key(|&(o, c)| (std::cmp::Reverse(c - o), o));
    for (o, c) in spans.into_iter().take(4096) {
        if let Some(v) = parse_record(&text[o..=c]) {
            return Ok(v);
        }
    }
    Err(LlmError::MalformedStructure(
        "no braced span parses as a record".into(),
    ))
}

/// Bodies of all fenced code blocks.
pub fn extract_code_blocks(text: &str) -> Vec<String> {
    fenced_blocks(text)
        .into_iter()
        .filter(|(lang, _)| !lang.eq_ignore_ascii_case("json"))
        .map(|(_, body)| body.to_string())
        .collect()
}

/// The single code block of a completion.
pub fn single_code_block(text: &str) -> Result<String, LlmError> {
    let mut blocks = extract_code_blocks(text);
    match blocks.len() {
        1 => Ok(blocks.remove(0)),
        0 => Err(LlmError::MalformedStructure(
            "response contains no code block".into(),
        )),
        n => Err(LlmError::MalformedStructure(format!(
            "response contains {n} code blocks"
        ))),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubtypeVerdict {
    pub matching: Option<String>,
    pub belongs: bool,
    pub rationale: String,
}

fn field<'a>(map: &'a serde_json::Map<String, Value>, keys: &[&str]) -> Option<&'a Value> {
    keys.iter().find_map(|k| map.get(*k))
}

/// Reads a subproblem-identification answer. Accepts the subtype-level keys
/// and the root-level aliases (`matching_problem_type`,
/// `belongs_to_problem_types`).
pub fn parse_subtype_response(text: &str) -> Result<SubtypeVerdict, LlmError> {
    let value = extract_json_block(text)?;
    let Value::Object(map) = value else {
        return Err(LlmError::MalformedStructure("expected a record".into()));
    };
    let matching = match field(&map, &["matching_subtype", "matching_problem_type"]) {
        Some(Value::String(s)) => {
            let s = s.trim();
            let lowered = s.to_ascii_lowercase();
            if s.is_empty() || NOT_FOUND_MARKERS.contains(&lowered.as_str()) {
                None
            } else {
                Some(s.to_string())
            }
        }
        Some(Value::Null) | None => None,
        Some(other) => {
            return Err(LlmError::MalformedStructure(format!(
                "matching subtype is not text: {other}"
            )))
        }
    };
    let belongs_flag = match field(&map, &["belongs_to_subtypes", "belongs_to_problem_types"]) {
        Some(Value::Bool(b)) => Some(*b),
        Some(Value::String(s)) if s.eq_ignore_ascii_case("true") => Some(true),
        Some(Value::String(s)) if s.eq_ignore_ascii_case("false") => Some(false),
        Some(Value::Null) | None => None,
        Some(other) => {
            return Err(LlmError::MalformedStructure(format!(
                "belongs flag is not boolean: {other}"
            )))
        }
    };
    let rationale = field(&map, &["reasoning", "rationale"])
        .and_then(Value::as_str)
        .unwrap_or_default()
        .to_string();
    let belongs = belongs_flag.unwrap_or(matching.is_some()) && matching.is_some();
    if belongs_flag == Some(true) && matching.is_none() {
        let named = field(&map, &["matching_subtype", "matching_problem_type"]).is_some();
        if !named {
            return Err(LlmError::MalformedStructure(
                "belongs is true but no subtype is named".into(),
            ));
        }
    }
    Ok(SubtypeVerdict {
        matching,
        belongs,
        rationale,
    })
}
