//! Dataset loading, batch evaluation and reports.
//!
//! Datasets are line-delimited records:
//!
//! ```text
//! {"id": "nl4opt-17", "description": "...", "answer": 819, "dataset": "NL4Opt", "difficulty": "Easy"}
//! ```
//!
//! `question` / `en_question` are accepted for `description`, `en_answer` for
//! `answer`. An answer may be a number, a numeric string, `infeasible` or
//! `unbounded`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::exec::{ExecStatus, GroundTruth};
use crate::pipeline::{Difficulty, Pipeline, ProblemInstance, SolveOutcome};
use crate::schema::statements_from_value;
use crate::tree::ModelingTree;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("dataset has no valid records ({malformed} malformed lines)")]
    EmptyDataset { malformed: usize },
    #[error("could not start worker pool: {0}")]
    WorkerPool(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MalformedLine {
    /// 1-based.
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub instances: Vec<ProblemInstance>,
    pub malformed: Vec<MalformedLine>,
}

fn text_field(m: &serde_json::Map<String, Value>, keys: &[&str]) -> Option<String> {
    keys.iter().find_map(|k| match m.get(*k)? {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    })
}

fn parse_record(line: &str, lineno: usize) -> Result<ProblemInstance, String> {
    let value: Value = serde_json::from_str(line).map_err(|e| format!("not JSON: {e}"))?;
    problem_from_value(value, &format!("line-{lineno}"))
}

/// Reads one dataset record. `fallback_id` is used when the record has none.
pub fn problem_from_value(value: Value, fallback_id: &str) -> Result<ProblemInstance, String> {
    let Value::Object(m) = value else {
        return Err("not a record".into());
    };
    let description = text_field(&m, &["description", "question", "en_question"])
        .filter(|d| !d.trim().is_empty())
        .ok_or("missing description")?;
    let id = text_field(&m, &["id"]).unwrap_or_else(|| fallback_id.to_string());
    let ground_truth = match ["answer", "en_answer", "ground_truth"]
        .iter()
        .find_map(|k| m.get(*k))
    {
        None | Some(Value::Null) => None,
        Some(v) => Some(GroundTruth::from_value(v).ok_or_else(|| format!("unreadable answer {v}"))?),
    };
    let difficulty = match m.get("difficulty") {
        None | Some(Value::Null) => None,
        Some(v) => Some(
            serde_json::from_value::<Difficulty>(v.clone()).map_err(|_| format!("unknown difficulty {v}"))?,
        ),
    };
    let thoughts = match m.get("thoughts").or_else(|| m.get("statement_thoughts")) {
        None | Some(Value::Null) => None,
        Some(v) => Some(statements_from_value(v.clone()).map_err(|e| e.to_string())?),
    };
    Ok(ProblemInstance {
        id,
        description,
        ground_truth,
        dataset: text_field(&m, &["dataset"]).unwrap_or_default(),
        difficulty,
        thoughts,
    })
}

/// Parses every line; bad lines are collected rather than fatal.
pub fn load_dataset(document: &str) -> Result<Dataset, EvalError> {
    let mut instances = Vec::new();
    let mut malformed = Vec::new();
    for (i, line) in document.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match parse_record(line.trim(), i + 1) {
            Ok(p) => instances.push(p),
            Err(reason) => malformed.push(MalformedLine { line: i + 1, reason }),
        }
    }
    if instances.is_empty() {
        return Err(EvalError::EmptyDataset {
            malformed: malformed.len(),
        });
    }
    Ok(Dataset { instances, malformed })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSummary {
    pub id: String,
    pub dataset: String,
    pub difficulty: Option<Difficulty>,
    pub matched: Option<bool>,
    pub status: Option<ExecStatus>,
    pub depth: usize,
    pub halted_at_root: bool,
    pub maximal: Option<String>,
    pub repair_rounds: u32,
    pub search_s: f64,
    pub modeling_s: f64,
    pub exec_s: f64,
    pub failure: Option<String>,
}

impl ProblemSummary {
    pub fn from_outcome(problem: &ProblemInstance, o: &SolveOutcome) -> Self {
        Self {
            id: problem.id.clone(),
            dataset: problem.dataset.clone(),
            difficulty: problem.difficulty,
            matched: o.matched,
            status: o.exec_status(),
            depth: o.trace.depth,
            halted_at_root: o.trace.halted_at_root,
            maximal: o.trace.path.last().map(|s| s.problem_type.clone()),
            repair_rounds: o.repair_rounds,
            search_s: o.timings.search_s,
            modeling_s: o.timings.modeling_s,
            exec_s: o.timings.exec_s,
            failure: o.failure.clone(),
        }
    }

    /// Executed without a runtime error or timeout. A clean run that printed
    /// no objective still passes.
    pub fn code_passed(&self) -> bool {
        self.status.is_some_and(ExecStatus::executed_cleanly)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Breakdown {
    pub key: String,
    pub total: usize,
    pub accuracy: f64,
    pub code_pass_rate: f64,
    pub coverage_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub total: usize,
    pub accuracy: f64,
    pub code_pass_rate: f64,
    /// Share of problems whose search got past the root.
    pub coverage_rate: f64,
    pub greatest_depth: usize,
    pub mean_search_s: f64,
    pub mean_modeling_s: f64,
    pub mean_exec_s: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_difficulty: Vec<Breakdown>,
    pub per_dataset: Vec<Breakdown>,
    pub per_problem: Vec<ProblemSummary>,
}

fn fraction(n: usize, d: usize) -> f64 {
    if d == 0 {
        0.0
    } else {
        n as f64 / d as f64
    }
}

/// Mean that does not depend on input order.
fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.collect();
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    v.iter().sum::<f64>() / v.len() as f64
}

fn breakdown(key: String, rows: &[&ProblemSummary]) -> Breakdown {
    let n = rows.len();
    Breakdown {
        key,
        total: n,
        accuracy: fraction(rows.iter().filter(|r| r.matched == Some(true)).count(), n),
        code_pass_rate: fraction(rows.iter().filter(|r| r.code_passed()).count(), n),
        coverage_rate: fraction(rows.iter().filter(|r| !r.halted_at_root).count(), n),
    }
}

impl EvalReport {
    /// Aggregates are a pure function of the multiset of summaries.
    pub fn from_summaries(per_problem: Vec<ProblemSummary>) -> Self {
        let all: Vec<&ProblemSummary> = per_problem.iter().collect();
        let overall = breakdown(String::new(), &all);

        let mut by_dataset: BTreeMap<String, Vec<&ProblemSummary>> = BTreeMap::new();
        let mut by_difficulty: BTreeMap<Difficulty, Vec<&ProblemSummary>> = BTreeMap::new();
        for r in &per_problem {
            by_dataset.entry(r.dataset.clone()).or_default().push(r);
            if let Some(d) = r.difficulty {
                by_difficulty.entry(d).or_default().push(r);
            }
        }
        let per_dataset = by_dataset
            .into_iter()
            .map(|(k, rows)| breakdown(k, &rows))
            .collect();
        let per_difficulty = by_difficulty
            .into_iter()
            .map(|(k, rows)| breakdown(format!("{k:?}"), &rows))
            .collect();

        Self {
            total: per_problem.len(),
            accuracy: overall.accuracy,
            code_pass_rate: overall.code_pass_rate,
            coverage_rate: overall.coverage_rate,
            greatest_depth: per_problem.iter().map(|r| r.depth).max().unwrap_or(0),
            mean_search_s: mean(per_problem.iter().map(|r| r.search_s)),
            mean_modeling_s: mean(per_problem.iter().map(|r| r.modeling_s)),
            mean_exec_s: mean(per_problem.iter().map(|r| r.exec_s)),
            per_difficulty,
            per_dataset,
            per_problem,
        }
    }

    pub fn from_outcomes(problems: &[ProblemInstance], outcomes: &[SolveOutcome]) -> Self {
        Self::from_summaries(
            problems
                .iter()
                .zip(outcomes)
                .map(|(p, o)| ProblemSummary::from_outcome(p, o))
                .collect(),
        )
    }
}

/// Solves every problem against `tree` on `jobs` worker threads. Output order
/// follows input order.
pub fn solve_all(
    pipeline: &Pipeline,
    tree: &ModelingTree,
    problems: &[ProblemInstance],
    jobs: usize,
) -> Result<Vec<SolveOutcome>, EvalError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| EvalError::WorkerPool(e.to_string()))?;
    Ok(pool.install(|| {
        problems
            .par_iter()
            .map(|p| pipeline.solve_problem(tree, p))
            .collect()
    }))
}

pub fn evaluate(
    pipeline: &Pipeline,
    tree: &ModelingTree,
    problems: &[ProblemInstance],
) -> Result<EvalReport, EvalError> {
    if problems.is_empty() {
        return Err(EvalError::EmptyDataset { malformed: 0 });
    }
    let outcomes = solve_all(pipeline, tree, problems, pipeline.config().jobs)?;
    Ok(EvalReport::from_outcomes(problems, &outcomes))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Table,
    Json,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "table" => Ok(Self::Table),
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            _ => Err(format!("unknown report format `{s}` (table, json, csv)")),
        }
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn opt<T: std::fmt::Debug>(v: &Option<T>) -> String {
    v.as_ref().map(|v| format!("{v:?}")).unwrap_or_default()
}

pub fn render_report(report: &EvalReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("report serializes");
            s.push('\n');
            s
        }
        ReportFormat::Csv => {
            let mut s = String::from(
                "id,dataset,difficulty,matched,status,depth,halted_at_root,maximal,repair_rounds,search_s,modeling_s,exec_s\n",
            );
            for r in &report.per_problem {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{},{},{},{},{},{}",
                    csv_field(&r.id),
                    csv_field(&r.dataset),
                    opt(&r.difficulty),
                    r.matched.map(|m| m.to_string()).unwrap_or_default(),
                    opt(&r.status),
                    r.depth,
                    r.halted_at_root,
                    csv_field(r.maximal.as_deref().unwrap_or("")),
                    r.repair_rounds,
                    r.search_s,
                    r.modeling_s,
                    r.exec_s
                );
            }
            s
        }
        ReportFormat::Table => {
            let mut s = String::new();
            let _ = writeln!(
                s,
                "{:<24} {:>6} {:>9} {:>10} {:>9}",
                "split", "n", "accuracy", "code pass", "coverage"
            );
            let row = |s: &mut String, b: &Breakdown| {
                let name = if b.key.is_empty() { "(none)" } else { &b.key };
                let _ = writeln!(
                    s,
                    "{:<24} {:>6} {:>9.4} {:>10.4} {:>9.4}",
                    name, b.total, b.accuracy, b.code_pass_rate, b.coverage_rate
                );
            };
            for b in &report.per_dataset {
                row(&mut s, b);
            }
            for b in &report.per_difficulty {
                row(&mut s, b);
            }
            let _ = writeln!(
                s,
                "{:<24} {:>6} {:>9.4} {:>10.4} {:>9.4}",
                "all", report.total, report.accuracy, report.code_pass_rate, report.coverage_rate
            );
            let _ = writeln!(s, "greatest depth {}", report.greatest_depth);
            let _ = writeln!(
                s,
                "mean time (s): search {:.3}, modeling {:.3}, exec {:.3}",
                report.mean_search_s, report.mean_modeling_s, report.mean_exec_s
            );
            s
        }
    }
}
