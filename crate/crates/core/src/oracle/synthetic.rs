//! Feature-set model of the subproblem relation: `a` is a subproblem of `b`
//! iff every feature of `a` is a feature of `b`.

use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::Rng;

use super::{JudgeBackend, JudgeTarget, OracleError, SubproblemJudgment};
use crate::schema::{ModelingStep, ModelingThoughts, NodeSchema, StatementThought, SUMMARY_LABEL};

/// Code template carried by synthetic schemas.
pub const SYNTHETIC_CODE_TEMPLATE: &str = "print(\"Objective Value:\", obj_val)\n";

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FeatureProblem {
    name: String,
    features: BTreeSet<String>,
}

impl FeatureProblem {
    pub fn new<I, S>(name: impl Into<String>, features: I) -> Result<Self, OracleError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let name = name.into();
        let features: BTreeSet<String> = features.into_iter().map(Into::into).collect();
        if features.is_empty() {
            return Err(OracleError::EmptyFeatures(name));
        }
        Ok(Self { name, features })
    }

    /// Named after its sorted features, so equal sets get equal names.
    pub fn from_features<I, S>(features: I) -> Result<Self, OracleError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let features: BTreeSet<String> = features.into_iter().map(Into::into).collect();
        let name = features.iter().cloned().collect::<Vec<_>>().join("+");
        Self::new(name, features)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn features(&self) -> &BTreeSet<String> {
        &self.features
    }

    /// Description text that [`text_features`] reads back.
    pub fn description(&self) -> String {
        let list: Vec<&str> = self.features.iter().map(String::as_str).collect();
        format!("Synthetic problem {}.\nfeatures: {}", self.name, list.join(" "))
    }
}

pub fn synthetic_judge(candidate: &FeatureProblem, target: &FeatureProblem) -> SubproblemJudgment {
    judge_sets(&candidate.features, &target.features)
}

fn judge_sets(candidate: &BTreeSet<String>, target: &BTreeSet<String>) -> SubproblemJudgment {
    let missing: Vec<&str> = candidate.difference(target).map(String::as_str).collect();
    if missing.is_empty() && !target.is_empty() {
        let shared: Vec<&str> = candidate.iter().map(String::as_str).collect();
        SubproblemJudgment::accept(
            candidate.len() as f64 / target.len() as f64,
            format!("target has all of {{{}}}", shared.join(", ")),
        )
    } else if missing.is_empty() {
        SubproblemJudgment::reject("target has no features")
    } else {
        SubproblemJudgment::reject(format!("target lacks {{{}}}", missing.join(", ")))
    }
}

/// Features of a schema: its statement-thought labels, summary excluded.
pub fn schema_features(schema: &NodeSchema) -> BTreeSet<String> {
    schema
        .statement_thoughts
        .iter()
        .filter(|t| t.label != SUMMARY_LABEL)
        .map(|t| t.label.clone())
        .collect()
}

/// Tokens after the last `features:` marker, or every token when there is none.
pub fn text_features(text: &str) -> BTreeSet<String> {
    let tail = match text.rfind("features:") {
        Some(i) => &text[i + "features:".len()..],
        None => text,
    };
    tail.split(|c: char| !(c.is_alphanumeric() || c == '_' || c == '-'))
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Features of a problem: thought labels when given, else the description.
pub fn problem_features(text: &str, thoughts: Option<&[StatementThought]>) -> BTreeSet<String> {
    match thoughts {
        Some(t) if !t.is_empty() => t
            .iter()
            .filter(|t| t.label != SUMMARY_LABEL)
            .map(|t| t.label.clone())
            .collect(),
        _ => text_features(text),
    }
}

/// A valid non-root schema encoding `problem`: one statement thought and one
/// modeling step per feature.
pub fn feature_schema(problem: &FeatureProblem) -> NodeSchema {
    let statements = problem
        .features
        .iter()
        .map(|f| StatementThought::new(f.clone(), format!("requires {f}")))
        .collect();
    let steps = problem
        .features
        .iter()
        .map(|f| ModelingStep::new(f.clone(), format!("model {f}")))
        .collect();
    NodeSchema::new(
        problem.name.clone(),
        statements,
        ModelingThoughts {
            steps,
            code_template: SYNTHETIC_CODE_TEMPLATE.to_string(),
            error_tips: Vec::new(),
        },
    )
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SyntheticJudge;

impl JudgeBackend for SyntheticJudge {
    fn judge_batch(
        &self,
        candidates: &[&NodeSchema],
        target: &JudgeTarget,
    ) -> Result<Vec<SubproblemJudgment>, OracleError> {
        let target = problem_features(&target.text, target.thoughts.as_deref());
        Ok(candidates
            .iter()
            .map(|c| judge_sets(&schema_features(c), &target))
            .collect())
    }
}

/// A fixed pool of opaque tokens to draw random feature problems from.
#[derive(Debug, Clone)]
pub struct FeatureUniverse {
    tokens: Vec<String>,
}

impl FeatureUniverse {
    pub fn new(size: usize) -> Self {
        let width = size.saturating_sub(1).to_string().len().max(2);
        Self {
            tokens: (0..size).map(|i| format!("f{i:0width$}")).collect(),
        }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// A problem with between `min` and `max` distinct features, inclusive.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, min: usize, max: usize) -> FeatureProblem {
        let max = max.min(self.tokens.len());
        let min = min.clamp(1, max);
        let k = rng.gen_range(min..=max);
        let picked = sample(rng, self.tokens.len(), k)
            .into_iter()
            .map(|i| self.tokens[i].clone());
        FeatureProblem::from_features(picked).expect("k >= 1")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fp(fs: &[&str]) -> FeatureProblem {
        FeatureProblem::from_features(fs.iter().copied()).unwrap()
    }

    #[test]
    fn judge_examples() {
        let j = synthetic_judge(&fp(&["a", "b"]), &fp(&["a", "b", "c"]));
        assert!(j.is_subproblem());
        assert!((j.similarity() - 2.0 / 3.0).abs() < 1e-12);

        let j = synthetic_judge(&fp(&["a", "b", "c"]), &fp(&["a", "b", "c"]));
        assert!(j.is_subproblem());
        assert_eq!(j.similarity(), 1.0);

        let j = synthetic_judge(&fp(&["a", "d"]), &fp(&["a", "b", "c"]));
        assert!(!j.is_subproblem());
        assert_eq!(j.similarity(), 0.0);
        assert!(j.rationale().contains('d'));
    }

    #[test]
    fn empty_features_rejected() {
        assert!(matches!(
            FeatureProblem::new("x", Vec::<String>::new()),
            Err(OracleError::EmptyFeatures(_))
        ));
    }

    #[test]
    fn schema_and_description_round_trip_features() {
        let p = fp(&["f03", "f11"]);
        let s = feature_schema(&p);
        assert!(crate::schema::validate_schema(&s).is_empty());
        assert_eq!(&schema_features(&s), p.features());
        assert_eq!(&text_features(&p.description()), p.features());
    }

    #[test]
    fn judge_backend_uses_thoughts_when_given() {
        let s = feature_schema(&fp(&["a"]));
        let target = JudgeTarget {
            text: "features: b".into(),
            thoughts: Some(vec![StatementThought::new("a", "x")]),
            basic_type: "AbstractOR".into(),
        };
        let out = SyntheticJudge.judge_batch(&[&s], &target).unwrap();
        assert!(out[0].is_subproblem());
    }

    #[test]
    fn universe_sampling_respects_bounds() {
        let u = FeatureUniverse::new(20);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let p = u.sample(&mut rng, 2, 8);
            assert!((2..=8).contains(&p.features().len()));
            assert!(p.features().iter().all(|f| u.tokens().contains(f)));
        }
    }
}
