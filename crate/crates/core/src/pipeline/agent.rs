use serde_json::Value;

use super::{PipelineError, ProblemInstance};
use crate::llm::{extract_json_block, single_code_block, ChatBackend, ChatRequest, LlmError, TemplateName};
use crate::oracle::{
    llm_judge_batch, JudgeBackend, JudgeTarget, OracleError, SubproblemJudgment, DEFAULT_REASKS,
};
use crate::schema::{
    modeling_from_lines, modeling_from_value, statements_from_value, ModelingThoughts, NodeSchema,
    StatementThought, DEFAULT_CODE_TEMPLATE,
};

/// Category names too broad to serve as a problem type.
pub const BROAD_CATEGORIES: [&str; 10] = [
    "linear programming",
    "integer programming",
    "integer linear programming",
    "mixed integer programming",
    "mixed integer linear programming",
    "mixed integer optimization",
    "integer optimization",
    "nonlinear programming",
    "combinatorial optimization",
    "optimization",
];

fn normalize_category(name: &str) -> String {
    let lowered = name.to_lowercase().replace(['-', '_', '(', ')'], " ");
    let mut words: Vec<&str> = lowered.split_whitespace().collect();
    while matches!(
        words.last(),
        Some(&"problem") | Some(&"problems") | Some(&"model")
    ) {
        words.pop();
    }
    words.retain(|w| !matches!(*w, "milp" | "lp" | "ilp" | "mip"));
    words.join(" ")
}

/// A warning when `name` is one of `broad` (case, hyphens and a trailing
/// "problem" ignored).
pub fn broad_category_warning(name: &str, broad: &[String]) -> Option<String> {
    let n = normalize_category(name);
    broad
        .iter()
        .any(|b| normalize_category(b) == n)
        .then(|| format!("`{name}` is a broad category, not a specific problem type"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Distilled {
    pub problem_type: String,
    pub statement_thoughts: Vec<StatementThought>,
    pub warnings: Vec<String>,
}

/// Everything the pipeline asks of a model.
pub trait Agent: JudgeBackend {
    /// Problem type and statement thoughts for `problem`, refining `base`
    /// when the problem sits below a known node.
    fn extract_statement_thoughts(
        &self,
        problem: &ProblemInstance,
        base: Option<&NodeSchema>,
    ) -> Result<Distilled, PipelineError>;

    fn write_code(
        &self,
        problem: &ProblemInstance,
        thoughts: Option<&ModelingThoughts>,
    ) -> Result<String, PipelineError>;

    fn repair_code(
        &self,
        problem: &ProblemInstance,
        code: &str,
        error: &str,
    ) -> Result<String, PipelineError>;

    fn distill_modeling_thoughts(
        &self,
        problem: &ProblemInstance,
        problem_type: &str,
        statements: &[StatementThought],
        solution_step: &str,
    ) -> Result<ModelingThoughts, PipelineError>;

    /// Indices of the candidates that `primary` is a subproblem of.
    fn match_subtypes(
        &self,
        primary: &NodeSchema,
        candidates: &[&NodeSchema],
    ) -> Result<Vec<usize>, PipelineError>;

    /// Pairwise subproblem relation, when the agent can answer it offline.
    fn is_subproblem(&self, _sub: &NodeSchema, _full: &NodeSchema) -> Option<bool> {
        None
    }
}

/// Agent that answers every request through chat prompts.
#[derive(Debug)]
pub struct LlmAgent<B> {
    backend: B,
    reasks: u32,
    broad: Vec<String>,
}

impl<B: ChatBackend> LlmAgent<B> {
    pub fn new(backend: B) -> Self {
        Self {
            backend,
            reasks: DEFAULT_REASKS,
            broad: BROAD_CATEGORIES.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn with_broad_categories(mut self, broad: Vec<String>) -> Self {
        self.broad = broad;
        self
    }

    pub fn with_reasks(mut self, reasks: u32) -> Self {
        self.reasks = reasks;
        self
    }

    pub fn backend(&self) -> &B {
        &self.backend
    }

    /// Sends `request` until `parse` accepts the response, re-asking on
    /// unparseable output.
    fn ask<T>(
        &self,
        request: &ChatRequest,
        mut parse: impl FnMut(&str) -> Result<T, LlmError>,
    ) -> Result<T, PipelineError> {
        let mut last = LlmError::NoStructuredBlock;
        for _ in 0..=self.reasks {
            let response = self.backend.complete(request)?;
            match parse(&response.text) {
                Ok(v) => return Ok(v),
                Err(e @ (LlmError::NoStructuredBlock | LlmError::MalformedStructure(_))) => {
                    log::debug!("re-asking {}: {e}", request.template);
                    last = e;
                }
                Err(e) => return Err(e.into()),
            }
        }
        Err(OracleError::UnparseableResponse {
            attempts: self.reasks + 1,
            last: last.to_string(),
        }
        .into())
    }
}

fn record(text: &str) -> Result<serde_json::Map<String, Value>, LlmError> {
    match extract_json_block(text)? {
        Value::Object(m) => Ok(m),
        _ => Err(LlmError::MalformedStructure("expected a record".into())),
    }
}

fn take<'a>(m: &'a serde_json::Map<String, Value>, keys: &[&str]) -> Option<&'a Value> {
    keys.iter().find_map(|k| m.get(*k))
}

fn parse_distilled(text: &str) -> Result<(String, Vec<StatementThought>), LlmError> {
    let m = record(text)?;
    let name = take(
        &m,
        &[
            "industrial_scene_type",
            "formulated_subtype",
            "problem_type",
            "Problem Type",
        ],
    )
    .and_then(Value::as_str)
    .map(str::trim)
    .filter(|s| !s.is_empty())
    .ok_or_else(|| LlmError::MalformedStructure("no problem type in distillation".into()))?;
    let thoughts = take(
        &m,
        &[
            "statement thoughts_of_type",
            "statement thoughts_of_subtype",
            "statement_thoughts",
            "statement thoughts",
            "Statement Thoughts",
        ],
    )
    .cloned()
    .ok_or_else(|| LlmError::MalformedStructure("no statement thoughts in distillation".into()))?;
    let thoughts =
        statements_from_value(thoughts).map_err(|e| LlmError::MalformedStructure(e.to_string()))?;
    let thoughts: Vec<StatementThought> = thoughts
        .into_iter()
        .filter(|t| !t.label.is_empty() && !t.text.is_empty())
        .collect();
    if thoughts.is_empty() {
        return Err(LlmError::MalformedStructure(
            "distillation has empty statement thoughts".into(),
        ));
    }
    Ok((name.to_string(), thoughts))
}

fn parse_modeling(text: &str) -> Result<ModelingThoughts, LlmError> {
    let m = record(text)?;
    let raw = take(
        &m,
        &[
            "reason_flow",
            "Modeling Thoughts",
            "modeling_thoughts",
            "modeling thoughts",
        ],
    )
    .ok_or_else(|| LlmError::MalformedStructure("no reasoning steps in response".into()))?;
    let mut thoughts = match raw {
        Value::String(s) => modeling_from_lines(&s.lines().map(str::to_string).collect::<Vec<_>>()),
        other => {
            modeling_from_value(other.clone()).map_err(|e| LlmError::MalformedStructure(e.to_string()))?
        }
    };
    if thoughts.steps.is_empty() {
        return Err(LlmError::MalformedStructure(
            "modeling thoughts have no steps".into(),
        ));
    }
    if thoughts.code_template.trim().is_empty() {
        thoughts.code_template = DEFAULT_CODE_TEMPLATE.to_string();
    }
    Ok(thoughts)
}

fn parse_subtypes(text: &str) -> Result<Vec<String>, LlmError> {
    let m = record(text)?;
    match take(&m, &["matching_subtypes"]) {
        Some(Value::Array(items)) => Ok(items
            .iter()
            .filter_map(Value::as_str)
            .map(str::to_string)
            .collect()),
        Some(Value::Null) => Ok(Vec::new()),
        Some(Value::String(s)) if s.trim().is_empty() => Ok(Vec::new()),
        Some(Value::String(s)) => Ok(vec![s.clone()]),
        _ => Err(LlmError::MalformedStructure("no matching_subtypes list".into())),
    }
}

fn name_eq(a: &str, b: &str) -> bool {
    let n = |s: &str| s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
    n(a) == n(b)
}

fn thoughts_block(t: &[StatementThought]) -> String {
    t.iter()
        .map(|t| format!("{}: {}", t.label, t.text))
        .collect::<Vec<_>>()
        .join("\n")
}

impl<B: ChatBackend> JudgeBackend for LlmAgent<B> {
    fn judge_batch(
        &self,
        candidates: &[&NodeSchema],
        target: &JudgeTarget,
    ) -> Result<Vec<SubproblemJudgment>, OracleError> {
        llm_judge_batch(&self.backend, self.reasks, candidates, target)
    }
}

impl<B: ChatBackend> Agent for LlmAgent<B> {
    fn extract_statement_thoughts(
        &self,
        problem: &ProblemInstance,
        base: Option<&NodeSchema>,
    ) -> Result<Distilled, PipelineError> {
        let request = match base {
            Some(b) => ChatRequest::new(TemplateName::DistillSubtype)
                .var("specific_problem", problem.description.clone())
                .var("current_basic_problem_type", b.problem_type.clone())
                .var("basic_statement_thoughts", b.statement_text()),
            None => ChatRequest::new(TemplateName::DistillRoot)
                .var("specific_problem", problem.description.clone()),
        };
        let (problem_type, statement_thoughts) = self.ask(&request, parse_distilled)?;
        let warnings: Vec<String> = broad_category_warning(&problem_type, &self.broad)
            .into_iter()
            .collect();
        for w in &warnings {
            log::warn!("{}: {w}", problem.id);
        }
        Ok(Distilled {
            problem_type,
            statement_thoughts,
            warnings,
        })
    }

    fn write_code(
        &self,
        problem: &ProblemInstance,
        thoughts: Option<&ModelingThoughts>,
    ) -> Result<String, PipelineError> {
        let request = match thoughts {
            Some(t) => ChatRequest::new(TemplateName::ModelWithThoughts)
                .var("user_input", problem.description.clone())
                .var("modeling_thought", t.to_prompt_text()),
            None => ChatRequest::new(TemplateName::ModelPlain).var("user_input", problem.description.clone()),
        };
        let response = self.backend.complete(&request)?;
        Ok(single_code_block(&response.text)?)
    }

    fn repair_code(
        &self,
        problem: &ProblemInstance,
        code: &str,
        error: &str,
    ) -> Result<String, PipelineError> {
        let request = ChatRequest::new(TemplateName::CodeCorrection)
            .var("user_input", problem.description.clone())
            .var("code", code.trim_end())
            .var("error", error);
        let response = self.backend.complete(&request)?;
        Ok(single_code_block(&response.text)?)
    }

    fn distill_modeling_thoughts(
        &self,
        problem: &ProblemInstance,
        problem_type: &str,
        statements: &[StatementThought],
        solution_step: &str,
    ) -> Result<ModelingThoughts, PipelineError> {
        let request = ChatRequest::new(TemplateName::DistillModelingThoughts)
            .var("problem_type", problem_type)
            .var("statement_thoughts", thoughts_block(statements))
            .var("specific_problem", problem.description.clone())
            .var("solution_step", solution_step);
        self.ask(&request, parse_modeling)
    }

    fn match_subtypes(
        &self,
        primary: &NodeSchema,
        candidates: &[&NodeSchema],
    ) -> Result<Vec<usize>, PipelineError> {
        let list: Vec<String> = candidates
            .iter()
            .map(|c| format!("- {}: {}", c.problem_type, c.statement_text().replace('\n', "; ")))
            .collect();
        let request = ChatRequest::new(TemplateName::AddNewNodes)
            .var("primary_problem_type", primary.problem_type.clone())
            .var("primary_statement_thoughts", primary.statement_text())
            .var("list_of_problem_types", list.join("\n"));
        let names = self.ask(&request, parse_subtypes)?;
        let mut picked = Vec::new();
        for name in names {
            match candidates.iter().position(|c| name_eq(&c.problem_type, &name)) {
                Some(i) if !picked.contains(&i) => picked.push(i),
                Some(_) => {}
                None => log::warn!("add_new_nodes named `{name}`, which is not a candidate; ignored"),
            }
        }
        picked.sort_unstable();
        Ok(picked)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{Transcript, TranscriptBackend};

    fn agent(entries: &[(TemplateName, &str)]) -> LlmAgent<TranscriptBackend> {
        let mut t = Transcript::new();
        for (n, r) in entries {
            t.push(*n, *r);
        }
        LlmAgent::new(TranscriptBackend::new(t))
    }

    const MAX_FLOW: &str = r#"{
    'industrial_scene_type': 'Maximum Flow Problem',
    'statement thoughts_of_type': {
    'statement thoughts': 'Route as much flow as possible from source to sink.',
    'constraints': {
        'Directed Graph': 'Flow can only travel along edge direction.',
        'Capacity Constraints': 'Edge flow is non-negative and within capacity.',
        'Flow Conservation': 'Inflow equals outflow at intermediate nodes.'
    },
}
}"#;

    #[test]
    fn distills_root_level_thoughts() {
        let a = agent(&[(TemplateName::DistillRoot, MAX_FLOW)]);
        let d = a
            .extract_statement_thoughts(&ProblemInstance::new("p", "pipes"), None)
            .unwrap();
        assert_eq!(d.problem_type, "Maximum Flow Problem");
        let labels: Vec<&str> = d.statement_thoughts.iter().map(|t| t.label.as_str()).collect();
        assert_eq!(
            labels,
            [
                "statement",
                "Directed Graph",
                "Capacity Constraints",
                "Flow Conservation"
            ]
        );
        assert!(d.warnings.is_empty());
    }

    #[test]
    fn broad_names_are_flagged() {
        let resp =
            r#"{"industrial_scene_type": "Linear Programming", "statement thoughts_of_type": "generic"}"#;
        let a = agent(&[(TemplateName::DistillRoot, resp)]);
        let d = a
            .extract_statement_thoughts(&ProblemInstance::new("p", "x"), None)
            .unwrap();
        assert_eq!(d.warnings.len(), 1);
        let broad: Vec<String> = BROAD_CATEGORIES.iter().map(|s| s.to_string()).collect();
        assert!(broad_category_warning("Mixed-Integer Linear Programming Problem", &broad).is_some());
        assert!(broad_category_warning("Maximum Flow Problem", &broad).is_none());
    }

    #[test]
    fn subtype_distillation_uses_the_base() {
        let resp = r#"```json
{"current_basic_problem_type": "Diet", "formulated_subtype": "Diet with Integer Servings",
 "statement thoughts_of_subtype": {"statement thoughts": "s", "constraints": {"Integer": "whole servings"}}}
```"#;
        let a = agent(&[(TemplateName::DistillSubtype, resp)]);
        let base =
            crate::oracle::feature_schema(&crate::oracle::FeatureProblem::from_features(["x"]).unwrap());
        let d = a
            .extract_statement_thoughts(&ProblemInstance::new("p", "x"), Some(&base))
            .unwrap();
        assert_eq!(d.problem_type, "Diet with Integer Servings");
    }

    #[test]
    fn code_blocks_must_be_single() {
        let a = agent(&[(TemplateName::ModelPlain, "```python\na\n```\n```python\nb\n```")]);
        assert!(matches!(
            a.write_code(&ProblemInstance::new("p", "x"), None),
            Err(PipelineError::Llm(LlmError::MalformedStructure(_)))
        ));
    }

    #[test]
    fn modeling_thoughts_get_the_default_template() {
        let resp = r#"{"problem_type": "T", "reason_flow": ["[Define Decision Variables] x", "[Define Objective Function] max"], "increment": []}"#;
        let a = agent(&[
            (TemplateName::DistillModelingThoughts, "nothing"),
            (TemplateName::DistillModelingThoughts, resp),
        ]);
        let m = a
            .distill_modeling_thoughts(&ProblemInstance::new("p", "x"), "T", &[], "")
            .unwrap();
        assert_eq!(m.steps.len(), 2);
        assert_eq!(m.code_template, DEFAULT_CODE_TEMPLATE);
    }

    #[test]
    fn subtype_matching_maps_names() {
        let s = |n: &str| {
            let mut s =
                crate::oracle::feature_schema(&crate::oracle::FeatureProblem::from_features([n]).unwrap());
            s.problem_type = n.to_string();
            s
        };
        let (p, c1, c2) = (s("CVRP"), s("CVRPTW"), s("Knapsack"));
        let a = agent(&[(
            TemplateName::AddNewNodes,
            r#"{"primary_problem_type": "CVRP", "matching_subtypes": ["cvrptw", "Ghost"]}"#,
        )]);
        assert_eq!(a.match_subtypes(&p, &[&c2, &c1]).unwrap(), vec![1]);
    }
}
