//! Subproblem judgments.
//!
//! A [`JudgeBackend`] decides, for each candidate schema, whether it is a
//! subproblem of a target problem and how similar the two are. Two backends
//! ship: [`SyntheticJudge`] (feature-set containment, deterministic) and
//! [`LlmJudge`] (the subproblem-identification prompt). [`structural`] holds
//! the model-level submodel check used to sanity-check taxonomies.

mod llm_judge;
pub mod structural;
mod synthetic;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm::LlmError;
use crate::schema::{NodeSchema, StatementThought};

pub use llm_judge::{llm_judge_batch, LlmJudge, DEFAULT_REASKS};
pub use structural::{is_structural_submodel, StructuralModel};
pub use synthetic::{
    feature_schema, problem_features, schema_features, synthetic_judge, text_features, FeatureProblem,
    FeatureUniverse, SyntheticJudge, SYNTHETIC_CODE_TEMPLATE,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("judge response could not be parsed after {attempts} attempts: {last}")]
    UnparseableResponse { attempts: u32, last: String },
    #[error("judge named `{0}`, which is not among the candidates")]
    UnknownSubtypeName(String),
    #[error("feature problem `{0}` has no features")]
    EmptyFeatures(String),
}

/// Verdict for one candidate. A rejected candidate always has similarity 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "RawJudgment")]
pub struct SubproblemJudgment {
    is_subproblem: bool,
    similarity: f64,
    rationale: String,
}

#[derive(Deserialize)]
struct RawJudgment {
    is_subproblem: bool,
    similarity: f64,
    #[serde(default)]
    rationale: String,
}

impl From<RawJudgment> for SubproblemJudgment {
    fn from(r: RawJudgment) -> Self {
        if r.is_subproblem {
            Self::accept(r.similarity, r.rationale)
        } else {
            Self::reject(r.rationale)
        }
    }
}

impl SubproblemJudgment {
    /// Similarity is clamped to `[0, 1]`; NaN becomes 0.
    pub fn accept(similarity: f64, rationale: impl Into<String>) -> Self {
        let similarity = if similarity.is_nan() {
            0.0
        } else {
            similarity.clamp(0.0, 1.0)
        };
        Self {
            is_subproblem: true,
            similarity,
            rationale: rationale.into(),
        }
    }

    pub fn reject(rationale: impl Into<String>) -> Self {
        Self {
            is_subproblem: false,
            similarity: 0.0,
            rationale: rationale.into(),
        }
    }

    pub fn is_subproblem(&self) -> bool {
        self.is_subproblem
    }

    pub fn similarity(&self) -> f64 {
        self.similarity
    }

    pub fn rationale(&self) -> &str {
        &self.rationale
    }
}

/// The problem being placed in the tree, as seen by a judge at one level.
#[derive(Debug, Clone, PartialEq)]
pub struct JudgeTarget {
    pub text: String,
    pub thoughts: Option<Vec<StatementThought>>,
    /// Problem type of the node whose children are being judged.
    pub basic_type: String,
}

pub trait JudgeBackend: Send + Sync {
    /// One judgment per candidate, in candidate order.
    fn judge_batch(
        &self,
        candidates: &[&NodeSchema],
        target: &JudgeTarget,
    ) -> Result<Vec<SubproblemJudgment>, OracleError>;
}

impl<J: JudgeBackend + ?Sized> JudgeBackend for std::sync::Arc<J> {
    fn judge_batch(
        &self,
        candidates: &[&NodeSchema],
        target: &JudgeTarget,
    ) -> Result<Vec<SubproblemJudgment>, OracleError> {
        (**self).judge_batch(candidates, target)
    }
}
