//! Node schema: the knowledge stored at one modeling-tree node.
//!
//! A schema carries three elements: the problem-type name, the statement
//! thoughts used to recognise the problem, and the modeling thoughts used to
//! write solver code for it. The canonical on-disk form is a JSON record with
//! a fixed key order:
//!
//! ```text
//! {
//!   "problem_type": "...",
//!   "statement_thoughts": [{"label": "...", "text": "..."}],
//!   "modeling_thoughts": {
//!     "steps": [{"tag": "...", "text": "..."}],
//!     "code_template": "...",
//!     "error_tips": ["..."]
//!   },
//!   "meta": {}
//! }
//! ```
//!
//! [`parse_schema`] also accepts the loose prose-like record format
//! (`Problem Type: ...`, `Statement Thoughts: [...]`, `Modeling Thoughts: [...]`)
//! and JSON records that use the display-style keys (`"Problem Type"`, ...).

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

/// Reserved problem type of the tree root.
pub const ROOT_PROBLEM_TYPE: &str = "AbstractOR";

/// Label under which a summary paragraph is stored among the statement thoughts.
pub const SUMMARY_LABEL: &str = "statement";

/// Solver-code skeleton shipped as the global default code template.
pub const DEFAULT_CODE_TEMPLATE: &str = include_str!("../prompts/code_template.py");

#[derive(Debug, Error, PartialEq)]
pub enum SchemaError {
    #[error("malformed schema document: {0}")]
    MalformedDocument(String),
    #[error("schema document is missing required field `{0}`")]
    MissingField(&'static str),
    #[error("schema violates its invariants: {}", join_violations(.0))]
    InvariantViolation(Vec<Violation>),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}

/// One atomic statement about a problem class.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StatementThought {
    pub label: String,
    pub text: String,
}

impl StatementThought {
    pub fn new(label: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            text: text.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelingStep {
    /// Step name without the surrounding brackets, e.g. `Define Decision Variables`.
    pub tag: String,
    pub text: String,
}

impl ModelingStep {
    pub fn new(tag: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            tag: tag.into(),
            text: text.into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelingThoughts {
    pub steps: Vec<ModelingStep>,
    #[serde(default)]
    pub code_template: String,
    #[serde(default)]
    pub error_tips: Vec<String>,
}

impl ModelingThoughts {
    pub fn is_empty(&self) -> bool {
        self.steps.is_empty() && self.code_template.is_empty() && self.error_tips.is_empty()
    }

    /// Text block handed to the modeling prompt.
    pub fn to_prompt_text(&self) -> String {
        let mut out = String::new();
        let mut has_code_step = false;
        for step in &self.steps {
            has_code_step |= step.text.contains("```");
            out.push_str(&format!("[{}] {}\n", step.tag, step.text));
        }
        if !has_code_step && !self.code_template.is_empty() {
            out.push_str("[Gurobi Code]\n```python\n");
            out.push_str(self.code_template.trim_end());
            out.push_str("\n```\n");
        }
        if !self.error_tips.is_empty() {
            out.push_str("[error_tips]\n");
            for tip in &self.error_tips {
                out.push_str(&format!("- {tip}\n"));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSchema {
    pub problem_type: String,
    pub statement_thoughts: Vec<StatementThought>,
    pub modeling_thoughts: ModelingThoughts,
    /// Unknown fields found while parsing, kept verbatim.
    #[serde(default)]
    pub meta: BTreeMap<String, Value>,
}

impl NodeSchema {
    pub fn new(
        problem_type: impl Into<String>,
        statement_thoughts: Vec<StatementThought>,
        modeling_thoughts: ModelingThoughts,
    ) -> Self {
        Self {
            problem_type: problem_type.into(),
            statement_thoughts,
            modeling_thoughts,
            meta: BTreeMap::new(),
        }
    }

    /// The schema of the tree root.
    pub fn root() -> Self {
        Self::new(ROOT_PROBLEM_TYPE, Vec::new(), ModelingThoughts::default())
    }

    pub fn is_root(&self) -> bool {
        self.problem_type == ROOT_PROBLEM_TYPE
    }

    /// Statement thoughts as a readable block for prompts.
    pub fn statement_text(&self) -> String {
        self.statement_thoughts
            .iter()
            .map(|t| format!("{}: {}", t.label, t.text))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// A broken schema rule, naming the field it concerns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub rule: String,
}

impl Violation {
    fn new(field: impl Into<String>, rule: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            rule: rule.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

/// Lists every invariant the schema breaks. An empty list means the schema is valid.
pub fn validate_schema(schema: &NodeSchema) -> Vec<Violation> {
    let mut out = Vec::new();
    if schema.problem_type.trim().is_empty() {
        out.push(Violation::new("problem_type", "must be non-empty"));
    }
    for (i, t) in schema.statement_thoughts.iter().enumerate() {
        if t.label.trim().is_empty() {
            out.push(Violation::new(
                format!("statement_thoughts[{i}].label"),
                "must be non-empty",
            ));
        }
        if t.text.trim().is_empty() {
            out.push(Violation::new(
                format!("statement_thoughts[{i}].text"),
                "must be non-empty",
            ));
        }
    }
    let mt = &schema.modeling_thoughts;
    for (i, s) in mt.steps.iter().enumerate() {
        if s.tag.trim().is_empty() {
            out.push(Violation::new(
                format!("modeling_thoughts.steps[{i}].tag"),
                "must be non-empty",
            ));
        }
    }
    if schema.is_root() {
        if !schema.statement_thoughts.is_empty() {
            out.push(Violation::new(
                "statement_thoughts",
                "root must carry no statement thoughts",
            ));
        }
        if !mt.is_empty() {
            out.push(Violation::new(
                "modeling_thoughts",
                "root must carry no modeling thoughts",
            ));
        }
    } else {
        if mt.steps.is_empty() {
            out.push(Violation::new(
                "modeling_thoughts.steps",
                "must be non-empty on a non-root node",
            ));
        }
        if mt.code_template.trim().is_empty() {
            out.push(Violation::new(
                "modeling_thoughts.code_template",
                "may be empty only on the root",
            ));
        }
    }
    out
}

/// Canonical document for a valid schema. Output is deterministic.
pub fn render_schema(schema: &NodeSchema) -> Result<String, SchemaError> {
    let violations = validate_schema(schema);
    if !violations.is_empty() {
        return Err(SchemaError::InvariantViolation(violations));
    }
    let mut text =
        serde_json::to_string_pretty(schema).map_err(|e| SchemaError::MalformedDocument(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

/// Parses a schema document in canonical JSON, display-key JSON, or the loose
/// record format.
pub fn parse_schema(document: &str) -> Result<NodeSchema, SchemaError> {
    let trimmed = document.trim();
    if trimmed.starts_with('{') {
        let value: Value = serde_json::from_str(trimmed)
            .or_else(|_| json5::from_str(trimmed))
            .map_err(|e| SchemaError::MalformedDocument(e.to_string()))?;
        return schema_from_value(value);
    }
    parse_loose(trimmed)
}

/// Builds a schema from an already-parsed JSON record.
pub fn schema_from_value(value: Value) -> Result<NodeSchema, SchemaError> {
    let Value::Object(mut map) = value else {
        return Err(SchemaError::MalformedDocument("expected a record".into()));
    };

    let problem_type = take_any(&mut map, &["problem_type", "Problem Type", "problem type"])
        .ok_or(SchemaError::MissingField("problem_type"))?;
    let problem_type = problem_type
        .as_str()
        .ok_or_else(|| SchemaError::MalformedDocument("problem_type must be a string".into()))?
        .to_string();

    let statements = take_any(
        &mut map,
        &["statement_thoughts", "Statement Thoughts", "statement thoughts"],
    )
    .ok_or(SchemaError::MissingField("statement_thoughts"))?;
    let statement_thoughts = statements_from_value(statements)?;

    let modeling = take_any(
        &mut map,
        &["modeling_thoughts", "Modeling Thoughts", "modeling thoughts"],
    )
    .ok_or(SchemaError::MissingField("modeling_thoughts"))?;
    let modeling_thoughts = modeling_from_value(modeling)?;

    let mut meta: BTreeMap<String, Value> = BTreeMap::new();
    if let Some(Value::Object(m)) = map.remove("meta") {
        meta.extend(m);
    }
    meta.extend(map);

    Ok(NodeSchema {
        problem_type,
        statement_thoughts,
        modeling_thoughts,
        meta,
    })
}

fn take_any(map: &mut serde_json::Map<String, Value>, keys: &[&str]) -> Option<Value> {
    keys.iter().find_map(|k| map.remove(*k))
}

/// Flattens the statement-thought shapes seen in practice into label/text pairs.
///
/// Accepted: a list of `{label, text}` records, a list of `"Label: text"`
/// strings, a bare summary string, or a record `{"statement thoughts": s,
/// "constraints": {name: text}}`.
pub fn statements_from_value(value: Value) -> Result<Vec<StatementThought>, SchemaError> {
    match value {
        Value::String(s) => Ok(if s.trim().is_empty() {
            Vec::new()
        } else {
            vec![StatementThought::new(SUMMARY_LABEL, s.trim())]
        }),
        Value::Array(items) => items
            .into_iter()
            .map(|item| match item {
                Value::String(s) => Ok(split_labelled(&s)),
                Value::Object(mut o) => {
                    let label = o.remove("label").and_then(as_string);
                    let text = o.remove("text").and_then(as_string);
                    match (label, text) {
                        (Some(label), Some(text)) => Ok(StatementThought { label, text }),
                        _ => Err(SchemaError::MalformedDocument(
                            "statement thought needs `label` and `text`".into(),
                        )),
                    }
                }
                _ => Err(SchemaError::MalformedDocument(
                    "unsupported statement thought".into(),
                )),
            })
            .collect(),
        Value::Object(mut o) => {
            let mut out = Vec::new();
            if let Some(summary) = take_any(
                &mut o,
                &["statement thoughts", "statement_thoughts", "Statement Thoughts"],
            )
            .and_then(as_string)
            {
                out.push(StatementThought::new(SUMMARY_LABEL, summary.trim()));
            }
            if let Some(Value::Object(constraints)) = take_any(&mut o, &["constraints", "Constraints"]) {
                for (k, v) in constraints {
                    out.push(StatementThought::new(k.trim(), value_text(&v).trim()));
                }
            }
            for (k, v) in o {
                out.push(StatementThought::new(k.trim(), value_text(&v).trim()));
            }
            Ok(out)
        }
        Value::Null => Ok(Vec::new()),
        _ => Err(SchemaError::MalformedDocument(
            "unsupported statement thoughts".into(),
        )),
    }
}

/// Accepts canonical `{steps, code_template, error_tips}` or a list of
/// `"[Tag] text"` strings.
pub fn modeling_from_value(value: Value) -> Result<ModelingThoughts, SchemaError> {
    match value {
        Value::Object(_) => serde_json::from_value(value)
            .map_err(|e| SchemaError::MalformedDocument(format!("modeling_thoughts: {e}"))),
        Value::Array(items) => {
            let lines: Vec<String> = items.iter().map(value_text).collect();
            Ok(modeling_from_lines(&lines))
        }
        Value::String(s) => Ok(modeling_from_lines(&[s])),
        Value::Null => Ok(ModelingThoughts::default()),
        _ => Err(SchemaError::MalformedDocument(
            "unsupported modeling thoughts".into(),
        )),
    }
}

fn as_string(v: Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s),
        _ => None,
    }
}

fn value_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn split_labelled(s: &str) -> StatementThought {
    let s = s.trim().trim_end_matches(',').trim();
    match s.split_once(':') {
        Some((label, text)) if !label.trim().is_empty() && !text.trim().is_empty() => {
            let label = label.trim();
            if label.eq_ignore_ascii_case("statement thoughts") {
                StatementThought::new(SUMMARY_LABEL, text.trim())
            } else {
                StatementThought::new(label, text.trim())
            }
        }
        _ => StatementThought::new(SUMMARY_LABEL, s),
    }
}

/// Groups `[Tag] text` fragments into steps. Fragments not starting with a
/// bracket continue the previous step. `[error_tips]` / `[Common Errors to
/// Avoid]` sections become error tips, and the first fenced code block
/// becomes the code template.
pub fn modeling_from_lines(lines: &[String]) -> ModelingThoughts {
    let mut steps: Vec<ModelingStep> = Vec::new();
    let mut tips: Vec<String> = Vec::new();
    let mut in_tips = false;

    for raw in lines {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some((tag, rest)) = bracket_tag(line) {
            if is_tips_tag(&tag) {
                in_tips = true;
                tips.extend(split_tips(rest));
                continue;
            }
            in_tips = false;
            steps.push(ModelingStep::new(tag, strip_item_comma(rest)));
        } else if in_tips {
            tips.extend(split_tips(line));
        } else if let Some(last) = steps.last_mut() {
            if !last.text.is_empty() {
                last.text.push('\n');
            }
            last.text.push_str(strip_item_comma(line));
        } else {
            steps.push(ModelingStep::new(
                format!("Step {}", steps.len() + 1),
                strip_item_comma(line),
            ));
        }
    }

    let code_template = steps
        .iter()
        .find_map(|s| fenced_code(&s.text))
        .unwrap_or_default();
    ModelingThoughts {
        steps,
        code_template,
        error_tips: tips,
    }
}

fn is_tips_tag(tag: &str) -> bool {
    let t = tag.to_ascii_lowercase();
    t == "error_tips" || t.starts_with("common errors")
}

fn split_tips(text: &str) -> Vec<String> {
    text.split('\n')
        .map(|l| strip_item_comma(l.trim()))
        .map(|l| {
            l.trim_start_matches(|c: char| c.is_ascii_digit() || c == '.' || c == '-')
                .trim()
        })
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect()
}

fn bracket_tag(line: &str) -> Option<(String, &str)> {
    let rest = line.strip_prefix('[')?;
    let end = rest.find(']')?;
    let tag = rest[..end].trim();
    if tag.is_empty() {
        return None;
    }
    let after = rest[end + 1..].trim_start_matches(':').trim();
    Some((tag.to_string(), after))
}

fn strip_item_comma(s: &str) -> &str {
    let s = s.trim();
    s.strip_suffix(',').unwrap_or(s).trim_end()
}

/// Contents of the first ``` fenced block in `text`, language tag removed.
fn fenced_code(text: &str) -> Option<String> {
    let start = text.find("```")?;
    let after = &text[start + 3..];
    let body_start = after.find('\n').map(|i| i + 1).unwrap_or(after.len());
    let body = &after[body_start..];
    let end = body.find("```")?;
    let code = body[..end].trim_end();
    (!code.is_empty()).then(|| format!("{code}\n"))
}

fn unescape_loose(s: &str) -> String {
    s.replace("\\n", "\n").replace("\\\"", "\"").replace("\\t", "\t")
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Statements,
    Modeling,
}

fn parse_loose(text: &str) -> Result<NodeSchema, SchemaError> {
    let mut problem_type: Option<String> = None;
    let mut statements: Option<Vec<String>> = None;
    let mut modeling: Option<Vec<String>> = None;
    let mut section = Section::None;
    let mut saw_anything = false;

    for raw in text.lines() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if section != Section::None && (line == "]" || line == "],") {
            section = Section::None;
            continue;
        }
        match section {
            Section::Statements => {
                statements.get_or_insert_with(Vec::new).push(line.to_string());
                continue;
            }
            Section::Modeling => {
                modeling.get_or_insert_with(Vec::new).push(unescape_loose(raw));
                continue;
            }
            Section::None => {}
        }
        let Some((key, value)) = line.split_once(':') else {
            return Err(SchemaError::MalformedDocument(format!(
                "unexpected line `{line}`"
            )));
        };
        saw_anything = true;
        let value = value.trim();
        match key.trim().to_ascii_lowercase().as_str() {
            "problem type" | "problem_type" => {
                problem_type = Some(strip_item_comma(value).to_string());
            }
            "statement thoughts" | "statement_thoughts" => {
                statements = Some(Vec::new());
                if value == "[" {
                    section = Section::Statements;
                } else {
                    statements.as_mut().unwrap().push(value.to_string());
                }
            }
            "modeling thoughts" | "modeling_thoughts" => {
                modeling = Some(Vec::new());
                if value == "[" {
                    section = Section::Modeling;
                } else {
                    modeling.as_mut().unwrap().push(unescape_loose(value));
                }
            }
            _ => {
                return Err(SchemaError::MalformedDocument(format!(
                    "unknown key `{}`",
                    key.trim()
                )));
            }
        }
    }
    if !saw_anything {
        return Err(SchemaError::MalformedDocument("empty document".into()));
    }
    let problem_type = problem_type.ok_or(SchemaError::MissingField("problem_type"))?;
    let statements = statements.ok_or(SchemaError::MissingField("statement_thoughts"))?;
    let modeling = modeling.ok_or(SchemaError::MissingField("modeling_thoughts"))?;

    Ok(NodeSchema {
        problem_type,
        statement_thoughts: statements.iter().map(|s| split_labelled(s)).collect(),
        modeling_thoughts: modeling_from_lines(&modeling),
        meta: BTreeMap::new(),
    })
}
