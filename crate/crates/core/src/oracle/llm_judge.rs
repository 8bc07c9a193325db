use super::{JudgeBackend, JudgeTarget, OracleError, SubproblemJudgment};
use crate::llm::{parse_subtype_response, ChatBackend, ChatRequest, LlmError, TemplateName};
use crate::schema::NodeSchema;

/// Extra asks after an unparseable judge response.
pub const DEFAULT_REASKS: u32 = 2;

/// Judges through the subproblem-identification prompt. The model picks at
/// most one candidate; that candidate gets similarity 1, all others 0.
#[derive(Debug)]
pub struct LlmJudge<B> {
    backend: B,
    reasks: u32,
}

impl<B: ChatBackend> LlmJudge<B> {
    pub fn new(backend: B) -> Self {
        Self {
            backend,
            reasks: DEFAULT_REASKS,
        }
    }

    pub fn with_reasks(mut self, reasks: u32) -> Self {
        self.reasks = reasks;
        self
    }

    pub fn backend(&self) -> &B {
        &self.backend
    }
}

fn candidate_info(candidates: &[&NodeSchema]) -> String {
    let items: Vec<String> = candidates
        .iter()
        .map(|c| format!("{{\"{}\": {:?}}}", c.problem_type, c.statement_text()))
        .collect();
    format!("[{}]", items.join(", "))
}

fn target_text(target: &JudgeTarget) -> String {
    match &target.thoughts {
        Some(t) if !t.is_empty() => {
            let lines: Vec<String> = t.iter().map(|t| format!("{}: {}", t.label, t.text)).collect();
            format!(
                "{}\nStatement thoughts:\n{}",
                target.text.trim_end(),
                lines.join("\n")
            )
        }
        _ => target.text.clone(),
    }
}

fn same_name(a: &str, b: &str) -> bool {
    let norm = |s: &str| {
        s.trim()
            .trim_matches(|c| c == '"' || c == '\'')
            .split_whitespace()
            .collect::<Vec<_>>()
            .join(" ")
    };
    norm(a).eq_ignore_ascii_case(&norm(b))
}

pub fn llm_judge_batch<B: ChatBackend + ?Sized>(
    backend: &B,
    reasks: u32,
    candidates: &[&NodeSchema],
    target: &JudgeTarget,
) -> Result<Vec<SubproblemJudgment>, OracleError> {
    if candidates.is_empty() {
        return Ok(Vec::new());
    }
    let request = ChatRequest::new(TemplateName::SubproblemIdentify)
        .var("input_problem", target_text(target))
        .var("basic_type", target.basic_type.clone())
        .var("statement_thought_info", candidate_info(candidates));

    let attempts = reasks + 1;
    let mut last = String::new();
    for _ in 0..attempts {
        let response = backend.complete(&request)?;
        let verdict = match parse_subtype_response(&response.text) {
            Ok(v) => v,
            Err(e @ (LlmError::NoStructuredBlock | LlmError::MalformedStructure(_))) => {
                log::debug!("unparseable judge response: {e}");
                last = e.to_string();
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let Some(name) = verdict.matching.filter(|_| verdict.belongs) else {
            return Ok(candidates
                .iter()
                .map(|_| SubproblemJudgment::reject(verdict.rationale.clone()))
                .collect());
        };
        let winner = candidates
            .iter()
            .position(|c| c.problem_type == name)
            .or_else(|| candidates.iter().position(|c| same_name(&c.problem_type, &name)))
            .ok_or_else(|| OracleError::UnknownSubtypeName(name.clone()))?;
        return Ok(candidates
            .iter()
            .enumerate()
            .map(|(i, _)| {
                if i == winner {
                    SubproblemJudgment::accept(1.0, verdict.rationale.clone())
                } else {
                    SubproblemJudgment::reject(format!("not chosen; `{name}` matched"))
                }
            })
            .collect());
    }
    Err(OracleError::UnparseableResponse { attempts, last })
}

impl<B: ChatBackend> JudgeBackend for LlmJudge<B> {
    fn judge_batch(
        &self,
        candidates: &[&NodeSchema],
        target: &JudgeTarget,
    ) -> Result<Vec<SubproblemJudgment>, OracleError> {
        llm_judge_batch(&self.backend, self.reasks, candidates, target)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{Transcript, TranscriptBackend};
    use crate::oracle::{feature_schema, FeatureProblem};

    fn schema(name: &str) -> NodeSchema {
        let mut s = feature_schema(&FeatureProblem::from_features([name]).unwrap());
        s.problem_type = name.to_string();
        s
    }

    fn target() -> JudgeTarget {
        JudgeTarget {
            text: "There is 1000 mg of gold available ...".into(),
            thoughts: None,
            basic_type: "Product Mix Optimization".into(),
        }
    }

    fn judge(responses: &[&str]) -> LlmJudge<TranscriptBackend> {
        let mut t = Transcript::new();
        for r in responses {
            t.push(TemplateName::SubproblemIdentify, *r);
        }
        LlmJudge::new(TranscriptBackend::new(t))
    }

    #[test]
    fn single_winner() {
        let a = schema("Sales and Inventory Optimization with Profit Maximization");
        let b = schema("Multi-Period Production Planning");
        let j = judge(&[r#"```json
{"matching_subtype": "Sales and Inventory Optimization with Profit Maximization", "reasoning": "profit", "belongs_to_subtypes": true}
```"#]);
        let out = j.judge_batch(&[&b, &a], &target()).unwrap();
        assert!(!out[0].is_subproblem() && out[0].similarity() == 0.0);
        assert!(out[1].is_subproblem() && out[1].similarity() == 1.0);
    }

    #[test]
    fn not_found_rejects_all() {
        let a = schema("Single-Period Inventory Optimization with Capacity Constraints");
        let j = judge(&[
            r#"{"matching_subtype": "subtype not find", "reasoning": "no", "belongs_to_subtypes": false}"#,
        ]);
        let out = j.judge_batch(&[&a], &target()).unwrap();
        assert!(!out[0].is_subproblem());
    }

    #[test]
    fn unknown_name_is_an_error() {
        let a = schema("Knapsack");
        let j = judge(&[r#"{"matching_subtype": "Bin Packing", "belongs_to_subtypes": true}"#]);
        assert_eq!(
            j.judge_batch(&[&a], &target()),
            Err(OracleError::UnknownSubtypeName("Bin Packing".into()))
        );
    }

    #[test]
    fn reasks_then_gives_up() {
        let a = schema("Knapsack");
        let j = judge(&[
            "no json",
            "still none",
            r#"{"matching_subtype": "Knapsack", "belongs_to_subtypes": true}"#,
        ]);
        assert!(j.judge_batch(&[&a], &target()).unwrap()[0].is_subproblem());

        let j = judge(&["a", "b", "c"]);
        assert!(matches!(
            j.judge_batch(&[&a], &target()),
            Err(OracleError::UnparseableResponse { attempts: 3, .. })
        ));
    }

    #[test]
    fn empty_candidates_skip_the_backend() {
        let j = judge(&[]);
        assert!(j.judge_batch(&[], &target()).unwrap().is_empty());
    }
}
