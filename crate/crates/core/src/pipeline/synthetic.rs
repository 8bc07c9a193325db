use std::collections::BTreeSet;

use super::{Agent, Distilled, PipelineError, ProblemInstance};
use crate::exec::GroundTruth;
use crate::oracle::{
    feature_schema, problem_features, schema_features, FeatureProblem, JudgeBackend, JudgeTarget,
    OracleError, SubproblemJudgment, SyntheticJudge,
};
use crate::schema::{ModelingThoughts, NodeSchema, StatementThought};

/// Offline agent over feature problems.
///
/// Code "written" for a problem is the line the script would print: the
/// objective is 1 when the guiding thoughts cover exactly the problem's
/// features (within `slack` missing features) and 0 otherwise. Every
/// synthetic instance has ground truth 1, so a problem is solved once the
/// search reaches a node with its own feature set.
#[derive(Debug, Clone, Copy, Default)]
pub struct SyntheticAgent {
    pub slack: usize,
}

impl SyntheticAgent {
    pub fn instance(id: impl Into<String>, problem: &FeatureProblem) -> ProblemInstance {
        let mut p = ProblemInstance::new(id, problem.description());
        p.ground_truth = Some(GroundTruth::Value(1.0));
        p.dataset = "synthetic".into();
        p
    }

    fn features(problem: &ProblemInstance) -> BTreeSet<String> {
        problem_features(&problem.description, problem.thoughts.as_deref())
    }
}

fn step_features(thoughts: &ModelingThoughts) -> BTreeSet<String> {
    thoughts.steps.iter().map(|s| s.tag.clone()).collect()
}

impl JudgeBackend for SyntheticAgent {
    fn judge_batch(
        &self,
        candidates: &[&NodeSchema],
        target: &JudgeTarget,
    ) -> Result<Vec<SubproblemJudgment>, OracleError> {
        SyntheticJudge.judge_batch(candidates, target)
    }
}

impl Agent for SyntheticAgent {
    fn extract_statement_thoughts(
        &self,
        problem: &ProblemInstance,
        _base: Option<&NodeSchema>,
    ) -> Result<Distilled, PipelineError> {
        let fp = FeatureProblem::from_features(Self::features(problem))?;
        let schema = feature_schema(&fp);
        Ok(Distilled {
            problem_type: schema.problem_type,
            statement_thoughts: schema.statement_thoughts,
            warnings: Vec::new(),
        })
    }

    fn write_code(
        &self,
        problem: &ProblemInstance,
        thoughts: Option<&ModelingThoughts>,
    ) -> Result<String, PipelineError> {
        let want = Self::features(problem);
        let solved = thoughts.is_some_and(|t| {
            let have = step_features(t);
            have.is_subset(&want) && want.difference(&have).count() <= self.slack
        });
        Ok(format!("Objective Value: {}\n", if solved { 1 } else { 0 }))
    }

    fn repair_code(
        &self,
        _problem: &ProblemInstance,
        code: &str,
        _error: &str,
    ) -> Result<String, PipelineError> {
        Ok(code.to_string())
    }

    fn distill_modeling_thoughts(
        &self,
        _problem: &ProblemInstance,
        problem_type: &str,
        statements: &[StatementThought],
        _solution_step: &str,
    ) -> Result<ModelingThoughts, PipelineError> {
        let fp = FeatureProblem::new(problem_type, statements.iter().map(|t| t.label.clone()))?;
        Ok(feature_schema(&fp).modeling_thoughts)
    }

    fn match_subtypes(
        &self,
        primary: &NodeSchema,
        candidates: &[&NodeSchema],
    ) -> Result<Vec<usize>, PipelineError> {
        let p = schema_features(primary);
        Ok(candidates
            .iter()
            .enumerate()
            .filter(|(_, c)| p.is_subset(&schema_features(c)))
            .map(|(i, _)| i)
            .collect())
    }

    fn is_subproblem(&self, sub: &NodeSchema, full: &NodeSchema) -> Option<bool> {
        Some(schema_features(sub).is_subset(&schema_features(full)))
    }
}
