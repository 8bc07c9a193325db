//! Search, modeling, execution and tree growth.
//!
//! [`Pipeline::solve_problem`] descends the tree to the deepest node the
//! judge accepts, hands that node's modeling thoughts to the code writer,
//! runs the script (repairing it on errors) and compares the answer with the
//! ground truth. [`Pipeline::update_tree`] adds a node whenever that answer
//! is wrong, and [`Pipeline::build_tree`] folds it over a dataset.

mod agent;
mod synthetic;

use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::{Clock, SystemClock};
use crate::exec::{
    answers_match, ExecError, ExecResult, ExecStatus, GroundTruth, MatchPolicy, ScriptExecutor,
};
use crate::llm::LlmError;
use crate::oracle::{JudgeBackend, JudgeTarget, OracleError, SubproblemJudgment};
use crate::schema::{ModelingThoughts, NodeSchema, SchemaError, StatementThought};
use crate::tree::{ModelingTree, NodeId, TreeError, TreeStats};

pub use agent::{broad_category_warning, Agent, Distilled, LlmAgent, BROAD_CATEGORIES};
pub use synthetic::SyntheticAgent;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error("invalid pipeline config: {0}")]
    InvalidConfig(String),
    #[error("problem `{0}` has no ground truth")]
    MissingGroundTruth(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Difficulty {
    #[serde(alias = "easy")]
    Easy,
    #[serde(alias = "medium")]
    Medium,
    #[serde(alias = "hard")]
    Hard,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemInstance {
    pub id: String,
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<GroundTruth>,
    #[serde(default)]
    pub dataset: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub difficulty: Option<Difficulty>,
    /// Statement thoughts distilled earlier, passed to the judge with the text.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thoughts: Option<Vec<StatementThought>>,
}

impl ProblemInstance {
    pub fn new(id: impl Into<String>, description: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            description: description.into(),
            ground_truth: None,
            dataset: String::new(),
            difficulty: None,
            thoughts: None,
        }
    }

    pub fn with_ground_truth(mut self, gt: GroundTruth) -> Self {
        self.ground_truth = Some(gt);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Deepest level the search may reach. `None` means unlimited.
    pub max_depth: Option<usize>,
    pub repair_budget: u32,
    pub update_rounds: u32,
    pub match_policy: MatchPolicy,
    pub exec_timeout_s: f64,
    pub jobs: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            max_depth: None,
            repair_budget: 2,
            update_rounds: 3,
            match_policy: MatchPolicy::default(),
            exec_timeout_s: 60.0,
            jobs: 4,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: &str| Err(PipelineError::InvalidConfig(m.to_string()));
        if self.max_depth == Some(0) {
            return bad("max_depth must be at least 1 when set");
        }
        if self.update_rounds == 0 {
            return bad("update_rounds must be at least 1");
        }
        if self.jobs == 0 {
            return bad("jobs must be at least 1");
        }
        if self.exec_timeout_s.is_nan() || self.exec_timeout_s <= 0.0 {
            return bad("exec_timeout_s must be positive");
        }
        let p = &self.match_policy;
        if !(p.rel_tol >= 0.0 && p.abs_tol >= 0.0) {
            return bad("match tolerances must be non-negative");
        }
        Ok(())
    }

    pub fn exec_timeout(&self) -> Duration {
        Duration::from_secs_f64(self.exec_timeout_s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchStep {
    pub node: NodeId,
    pub problem_type: String,
    pub judgment: SubproblemJudgment,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchTrace {
    /// Accepted nodes from the first level down.
    pub path: Vec<SearchStep>,
    /// Deepest accepted node.
    pub maximal: Option<NodeId>,
    pub depth: usize,
    pub halted_at_root: bool,
}

impl SearchTrace {
    fn from_path(path: Vec<SearchStep>) -> Self {
        let maximal = path.last().map(|s| s.node.clone());
        Self {
            depth: path.len(),
            halted_at_root: path.is_empty(),
            maximal,
            path,
        }
    }
}

#[derive(Debug, Error)]
#[error("search failed after {} accepted levels: {error}", .trace.depth)]
pub struct SearchError {
    pub trace: SearchTrace,
    pub error: OracleError,
}

/// Descends from the root, at each level moving to the accepted child with
/// the highest similarity. Equal similarities go to the lowest child index.
pub fn tree_search<J: JudgeBackend + ?Sized>(
    tree: &ModelingTree,
    problem: &ProblemInstance,
    judge: &J,
    max_depth: Option<usize>,
) -> Result<SearchTrace, SearchError> {
    let mut path: Vec<SearchStep> = Vec::new();
    let mut current = tree.root().clone();
    loop {
        if max_depth.is_some_and(|m| path.len() >= m) {
            break;
        }
        let children = tree.children(&current);
        if children.is_empty() {
            break;
        }
        let candidates: Vec<&NodeSchema> = children
            .iter()
            .map(|c| tree.schema(c).expect("child exists"))
            .collect();
        let target = JudgeTarget {
            text: problem.description.clone(),
            thoughts: problem.thoughts.clone(),
            basic_type: tree.schema(&current).expect("node exists").problem_type.clone(),
        };
        let judgments = match judge.judge_batch(&candidates, &target) {
            Ok(j) if j.len() == candidates.len() => j,
            Ok(j) => {
                let error = OracleError::Llm(LlmError::MalformedStructure(format!(
                    "judge returned {} verdicts for {} candidates",
                    j.len(),
                    candidates.len()
                )));
                return Err(SearchError {
                    trace: SearchTrace::from_path(path),
                    error,
                });
            }
            Err(error) => {
                return Err(SearchError {
                    trace: SearchTrace::from_path(path),
                    error,
                })
            }
        };
        let mut best: Option<usize> = None;
        for (i, j) in judgments.iter().enumerate() {
            if j.is_subproblem() && best.is_none_or(|b| j.similarity() > judgments[b].similarity()) {
                best = Some(i);
            }
        }
        let Some(b) = best else { break };
        current = children[b].clone();
        path.push(SearchStep {
            node: current.clone(),
            problem_type: candidates[b].problem_type.clone(),
            judgment: judgments[b].clone(),
        });
    }
    Ok(SearchTrace::from_path(path))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub search_s: f64,
    /// Code generation and repair requests.
    pub modeling_s: f64,
    pub exec_s: f64,
    pub total_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOutcome {
    pub problem_id: String,
    pub trace: SearchTrace,
    pub thoughts_used: Option<ModelingThoughts>,
    pub generated_code: String,
    pub repair_rounds: u32,
    pub exec: Option<ExecResult>,
    /// Present iff the problem has a ground truth.
    pub matched: Option<bool>,
    /// First error that stopped the run early.
    pub failure: Option<String>,
    pub timings: Timings,
}

impl SolveOutcome {
    pub fn exec_status(&self) -> Option<ExecStatus> {
        self.exec.as_ref().map(|e| e.status)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateOutcome {
    pub updated: bool,
    /// Last node inserted for this problem.
    pub new_node: Option<NodeId>,
    pub rounds: u32,
    /// The final solve matched the ground truth.
    pub integrated: bool,
    /// Distilled problem type that already existed in the tree.
    pub collision: Option<String>,
    /// Errors that aborted individual rounds.
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildEntry {
    pub problem_id: String,
    pub update: Option<UpdateOutcome>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildReport {
    pub entries: Vec<BuildEntry>,
    pub stats: TreeStats,
    /// `None` when the structural invariants hold.
    pub invariant_error: Option<String>,
    /// Order violations under the agent's pairwise oracle, when it has one.
    pub order_violations: Option<Vec<(NodeId, NodeId)>>,
}

impl BuildReport {
    pub fn unintegrated(&self) -> impl Iterator<Item = &BuildEntry> {
        self.entries
            .iter()
            .filter(|e| !e.update.as_ref().is_some_and(|u| u.integrated))
    }
}

pub struct Pipeline {
    agent: Arc<dyn Agent>,
    executor: Arc<dyn ScriptExecutor>,
    clock: Arc<dyn Clock>,
    config: PipelineConfig,
}

impl std::fmt::Debug for Pipeline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Pipeline")
            .field("config", &self.config)
            .finish_non_exhaustive()
    }
}

impl Pipeline {
    pub fn new(
        agent: Arc<dyn Agent>,
        executor: Arc<dyn ScriptExecutor>,
        config: PipelineConfig,
    ) -> Result<Self, PipelineError> {
        config.validate()?;
        Ok(Self {
            agent,
            executor,
            clock: Arc::new(SystemClock::default()),
            config,
        })
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn agent(&self) -> &dyn Agent {
        &*self.agent
    }

    pub fn tree_search(
        &self,
        tree: &ModelingTree,
        problem: &ProblemInstance,
    ) -> Result<SearchTrace, SearchError> {
        tree_search(tree, problem, &*self.agent, self.config.max_depth)
    }

    /// Code for `problem` guided by the thoughts of the trace's deepest node,
    /// or by the plain prompt when the search stopped at the root.
    pub fn synthesize_and_model(
        &self,
        tree: &ModelingTree,
        problem: &ProblemInstance,
        trace: &SearchTrace,
    ) -> Result<(Option<ModelingThoughts>, String), PipelineError> {
        let thoughts = trace
            .maximal
            .as_ref()
            .and_then(|id| tree.schema(id))
            .map(|s| s.modeling_thoughts.clone());
        let code = self.agent.write_code(problem, thoughts.as_ref())?;
        Ok((thoughts, code))
    }

    pub fn solve_problem(&self, tree: &ModelingTree, problem: &ProblemInstance) -> SolveOutcome {
        let clock = &*self.clock;
        let t0 = clock.now();
        let mut out = SolveOutcome {
            problem_id: problem.id.clone(),
            trace: SearchTrace::default(),
            thoughts_used: None,
            generated_code: String::new(),
            repair_rounds: 0,
            exec: None,
            matched: problem.ground_truth.map(|_| false),
            failure: None,
            timings: Timings::default(),
        };
        let finish = |mut out: SolveOutcome| {
            out.timings.total_s = clock.since(t0).as_secs_f64();
            out
        };

        match self.tree_search(tree, problem) {
            Ok(trace) => out.trace = trace,
            Err(e) => {
                out.failure = Some(e.to_string());
                out.trace = e.trace;
                out.timings.search_s = clock.since(t0).as_secs_f64();
                return finish(out);
            }
        }
        let t1 = clock.now();
        out.timings.search_s = (t1 - t0).as_secs_f64();

        match self.synthesize_and_model(tree, problem, &out.trace) {
            Ok((thoughts, code)) => {
                out.thoughts_used = thoughts;
                out.generated_code = code;
            }
            Err(e) => {
                out.failure = Some(e.to_string());
                out.timings.modeling_s = clock.since(t1).as_secs_f64();
                return finish(out);
            }
        }
        out.timings.modeling_s = clock.since(t1).as_secs_f64();

        let timeout = self.config.exec_timeout();
        loop {
            let te = clock.now();
            let result = self.executor.run_script(&out.generated_code, timeout);
            out.timings.exec_s += clock.since(te).as_secs_f64();
            let result = match result {
                Ok(r) => r,
                Err(e) => {
                    out.failure = Some(e.to_string());
                    break;
                }
            };
            let needs_repair = matches!(
                result.status,
                ExecStatus::RuntimeError | ExecStatus::Timeout | ExecStatus::ParseFailure
            );
            let error_text = result.error_text();
            out.exec = Some(result);
            if !needs_repair || out.repair_rounds >= self.config.repair_budget {
                break;
            }
            let tr = clock.now();
            let repaired = self.agent.repair_code(problem, &out.generated_code, &error_text);
            out.timings.modeling_s += clock.since(tr).as_secs_f64();
            match repaired {
                Ok(code) => {
                    out.generated_code = code;
                    out.repair_rounds += 1;
                }
                Err(e) => {
                    out.failure = Some(e.to_string());
                    break;
                }
            }
        }

        if let (Some(gt), Some(exec)) = (&problem.ground_truth, &out.exec) {
            out.matched = Some(answers_match(exec, gt, &self.config.match_policy));
        }
        finish(out)
    }

    /// Solves `problem` and, while the answer is wrong, adds a node distilled
    /// from it and tries again, for at most `update_rounds` rounds.
    pub fn update_tree(
        &self,
        tree: &mut ModelingTree,
        problem: &ProblemInstance,
    ) -> Result<UpdateOutcome, PipelineError> {
        if problem.ground_truth.is_none() {
            return Err(PipelineError::MissingGroundTruth(problem.id.clone()));
        }
        let mut out = UpdateOutcome {
            updated: false,
            new_node: None,
            rounds: 0,
            integrated: false,
            collision: None,
            errors: Vec::new(),
        };
        for round in 1..=self.config.update_rounds {
            out.rounds = round;
            let solved = self.solve_problem(tree, problem);
            if solved.matched == Some(true) {
                out.integrated = true;
                return Ok(out);
            }
            match self.expand(tree, problem, &solved) {
                Ok(id) => {
                    out.updated = true;
                    out.new_node = Some(id);
                }
                Err(PipelineError::Tree(TreeError::DuplicateType(name))) => {
                    out.collision = Some(name);
                    break;
                }
                Err(e) => out.errors.push(e.to_string()),
            }
        }
        Ok(out)
    }

    /// Adds a node for `problem` under the deepest node of `solved`'s trace.
    /// Nothing is written unless every request succeeds.
    fn expand(
        &self,
        tree: &mut ModelingTree,
        problem: &ProblemInstance,
        solved: &SolveOutcome,
    ) -> Result<NodeId, PipelineError> {
        let parent = solved
            .trace
            .maximal
            .clone()
            .unwrap_or_else(|| tree.root().clone());
        let base = tree.schema(&parent).filter(|s| !s.is_root());
        let distilled = self.agent.extract_statement_thoughts(problem, base)?;
        if tree.find_by_type(&distilled.problem_type).is_some() {
            return Err(TreeError::DuplicateType(distilled.problem_type).into());
        }
        let solution_step = solution_step(solved);
        let modeling = self.agent.distill_modeling_thoughts(
            problem,
            &distilled.problem_type,
            &distilled.statement_thoughts,
            &solution_step,
        )?;
        let mut schema = NodeSchema::new(distilled.problem_type, distilled.statement_thoughts, modeling);
        schema
            .meta
            .insert("source_problem".into(), problem.id.clone().into());
        if !distilled.warnings.is_empty() {
            schema
                .meta
                .insert("warnings".into(), distilled.warnings.clone().into());
        }

        let children = tree.children(&parent).to_vec();
        let reparent: Vec<NodeId> = if children.is_empty() {
            Vec::new()
        } else {
            let candidates: Vec<&NodeSchema> = children
                .iter()
                .map(|c| tree.schema(c).expect("child exists"))
                .collect();
            let picked = self.agent.match_subtypes(&schema, &candidates)?;
            picked
                .into_iter()
                .filter_map(|i| children.get(i).cloned())
                .collect()
        };
        Ok(tree.add_node(&parent, schema, &reparent)?)
    }

    pub fn build_tree(&self, dataset: &[ProblemInstance]) -> (ModelingTree, BuildReport) {
        self.build_tree_with(dataset, |_, _| {})
    }

    /// Like [`Pipeline::build_tree`], calling `progress(k, tree)` after the
    /// k-th problem.
    pub fn build_tree_with(
        &self,
        dataset: &[ProblemInstance],
        mut progress: impl FnMut(usize, &ModelingTree),
    ) -> (ModelingTree, BuildReport) {
        let mut tree = ModelingTree::new();
        let mut entries = Vec::with_capacity(dataset.len());
        for (i, problem) in dataset.iter().enumerate() {
            let entry = match self.update_tree(&mut tree, problem) {
                Ok(u) => BuildEntry {
                    problem_id: problem.id.clone(),
                    update: Some(u),
                    error: None,
                },
                Err(e) => BuildEntry {
                    problem_id: problem.id.clone(),
                    update: None,
                    error: Some(e.to_string()),
                },
            };
            entries.push(entry);
            progress(i + 1, &tree);
        }
        let report = self.report_for(&tree, entries);
        (tree, report)
    }

    fn report_for(&self, tree: &ModelingTree, entries: Vec<BuildEntry>) -> BuildReport {
        let invariant_error = tree.check_invariants().err().map(|e| e.to_string());
        let agent = &*self.agent;
        let pairwise_known = tree
            .ids()
            .find(|id| *id != tree.root())
            .and_then(|id| tree.schema(id))
            .is_none_or(|s| agent.is_subproblem(s, s).is_some());
        let order_violations = pairwise_known
            .then(|| tree.check_order_preserving(|a, d| agent.is_subproblem(a, d).unwrap_or(false)));
        BuildReport {
            entries,
            stats: tree.stats(),
            invariant_error,
            order_violations,
        }
    }
}

/// Context for distilling modeling thoughts from a failed run.
fn solution_step(solved: &SolveOutcome) -> String {
    let mut s = String::new();
    if !solved.generated_code.is_empty() {
        s.push_str("```python\n");
        s.push_str(solved.generated_code.trim_end());
        s.push_str("\n```\n");
    }
    match (&solved.exec, &solved.failure) {
        (Some(e), _) => {
            s.push_str(&format!("Execution status: {:?}", e.status));
            if let Some(v) = e.objective {
                s.push_str(&format!(", objective {v}"));
            }
        }
        (None, Some(f)) => s.push_str(&format!("Run failed: {f}")),
        (None, None) => s.push_str("No solution was produced."),
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::InlineExecutor;
    use crate::oracle::{feature_schema, FeatureProblem};

    fn fp(fs: &[&str]) -> FeatureProblem {
        FeatureProblem::from_features(fs.iter().copied()).unwrap()
    }

    fn synthetic(config: PipelineConfig) -> Pipeline {
        Pipeline::new(
            Arc::new(SyntheticAgent::default()),
            Arc::new(InlineExecutor),
            config,
        )
        .unwrap()
    }

    /// root -> {A{a}, B{b}}, A -> {C{a,c}}
    fn abc_tree() -> (ModelingTree, NodeId, NodeId) {
        let mut t = ModelingTree::new();
        let root = t.root().clone();
        let a = t.add_node(&root, feature_schema(&fp(&["a"])), &[]).unwrap();
        t.add_node(&root, feature_schema(&fp(&["b"])), &[]).unwrap();
        let c = t.add_node(&a, feature_schema(&fp(&["a", "c"])), &[]).unwrap();
        (t, a, c)
    }

    #[test]
    fn search_examples() {
        let p = synthetic(PipelineConfig::default());
        let q = SyntheticAgent::instance("q", &fp(&["a", "c", "d"]));

        let trace = p.tree_search(&ModelingTree::new(), &q).unwrap();
        assert!(trace.halted_at_root && trace.depth == 0 && trace.maximal.is_none());

        let (tree, a, c) = abc_tree();
        let trace = p.tree_search(&tree, &q).unwrap();
        let ids: Vec<&NodeId> = trace.path.iter().map(|s| &s.node).collect();
        assert_eq!(ids, [&a, &c]);
        assert_eq!(trace.depth, 2);

        let p1 = synthetic(PipelineConfig {
            max_depth: Some(1),
            ..Default::default()
        });
        let trace = p1.tree_search(&tree, &q).unwrap();
        assert_eq!(trace.maximal, Some(a));
        assert_eq!(trace.depth, 1);
    }

    #[test]
    fn ties_go_to_the_lowest_index() {
        let mut t = ModelingTree::new();
        let root = t.root().clone();
        let first = t.add_node(&root, feature_schema(&fp(&["a"])), &[]).unwrap();
        t.add_node(&root, feature_schema(&fp(&["b"])), &[]).unwrap();
        let p = synthetic(PipelineConfig::default());
        let trace = p
            .tree_search(&t, &SyntheticAgent::instance("q", &fp(&["a", "b"])))
            .unwrap();
        assert_eq!(trace.maximal, Some(first));
    }

    #[test]
    fn update_semantics() {
        let p = synthetic(PipelineConfig::default());
        let mut tree = ModelingTree::new();
        let q = SyntheticAgent::instance("q", &fp(&["a", "b"]));
        let u = p.update_tree(&mut tree, &q).unwrap();
        assert!(u.updated && u.integrated);
        assert_eq!(u.rounds, 2);
        assert_eq!(tree.len(), 2);

        let before = tree.clone();
        let u = p.update_tree(&mut tree, &q).unwrap();
        assert_eq!((u.updated, u.new_node, u.rounds), (false, None, 1));
        assert_eq!(tree, before);
    }

    #[test]
    fn expansion_reparents_supersets() {
        let p = synthetic(PipelineConfig::default());
        let mut tree = ModelingTree::new();
        p.update_tree(&mut tree, &SyntheticAgent::instance("1", &fp(&["a", "b"])))
            .unwrap();
        let u = p
            .update_tree(&mut tree, &SyntheticAgent::instance("2", &fp(&["a"])))
            .unwrap();
        let a = u.new_node.unwrap();
        assert_eq!(tree.parent(&a), Some(tree.root()));
        let ab = tree.find_by_type("a+b").unwrap();
        assert_eq!(tree.parent(ab), Some(&a));
    }

    #[test]
    fn missing_ground_truth_is_refused() {
        let p = synthetic(PipelineConfig::default());
        let q = ProblemInstance::new("x", "features: a");
        assert!(matches!(
            p.update_tree(&mut ModelingTree::new(), &q),
            Err(PipelineError::MissingGroundTruth(_))
        ));
    }

    #[test]
    fn config_validation() {
        assert!(PipelineConfig::default().validate().is_ok());
        for bad in [
            PipelineConfig {
                max_depth: Some(0),
                ..Default::default()
            },
            PipelineConfig {
                update_rounds: 0,
                ..Default::default()
            },
            PipelineConfig {
                jobs: 0,
                ..Default::default()
            },
        ] {
            assert!(matches!(bad.validate(), Err(PipelineError::InvalidConfig(_))));
        }
    }
}
