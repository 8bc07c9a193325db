//! Running generated solver scripts and judging their answers.
//!
//! Scripts report through the `Objective Value:` marker line of the code
//! template. A runner shim can wrap execution and emit one JSON line:
//!
//! ```text
//! <runner-cmd> --script <path> --timeout <seconds>
//! {"status": "optimal", "objective": 819.0, "stdout": "...", "error": ""}
//! ```
//!
//! Without a runner, or when the runner output is not a protocol line, the
//! raw script stdout is scanned for the marker instead.

mod process;

use std::fmt;
use std::time::Duration;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;
use thiserror::Error;

pub use process::{ExecConfig, ProcessExecutor, KILL_GRACE};

/// Marker the code template prints before the objective value.
pub const OBJECTIVE_MARKER: &str = "Objective Value:";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecStatus {
    Optimal,
    Infeasible,
    Unbounded,
    RuntimeError,
    Timeout,
    ParseFailure,
}

impl ExecStatus {
    /// The script ran to completion without an error or a timeout.
    pub fn executed_cleanly(self) -> bool {
        !matches!(self, ExecStatus::RuntimeError | ExecStatus::Timeout)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecResult {
    pub status: ExecStatus,
    pub objective: Option<f64>,
    pub stdout: String,
    pub stderr: String,
    /// Seconds.
    pub wall_time: f64,
    /// Classified by scanning raw stdout rather than from a runner line.
    #[serde(default)]
    pub fallback: bool,
}

impl ExecResult {
    /// Builds a result whose status and objective come from `stdout`.
    pub fn from_stdout(stdout: String, stderr: String, wall_time: f64) -> Self {
        let (status, objective) = parse_objective(&stdout);
        Self {
            status,
            objective,
            stdout,
            stderr,
            wall_time,
            fallback: true,
        }
    }

    /// Text handed to the code-correction prompt.
    pub fn error_text(&self) -> String {
        match self.status {
            ExecStatus::Timeout => format!("execution timed out after {:.1} s", self.wall_time),
            ExecStatus::ParseFailure => format!(
                "the script finished but printed no `{OBJECTIVE_MARKER}` line.\nstdout:\n{}",
                tail(&self.stdout, 2000)
            ),
            _ => tail(&self.stderr, 4000).to_string(),
        }
    }
}

fn tail(s: &str, max: usize) -> &str {
    if s.len() <= max {
        return s;
    }
    let mut start = s.len() - max;
    while !s.is_char_boundary(start) {
        start += 1;
    }
    &s[start..]
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExecError {
    #[error("runner command not found: {0}")]
    RunnerMissing(String),
    #[error("runner failed: {0}")]
    HarnessFailure(String),
    #[error("i/o error while running script: {0}")]
    Io(String),
}

/// Scans for the last marker line. Total: every input gets exactly one status.
pub fn parse_objective(stdout: &str) -> (ExecStatus, Option<f64>) {
    let Some(line) = stdout.lines().rev().find(|l| l.contains(OBJECTIVE_MARKER)) else {
        return (ExecStatus::ParseFailure, None);
    };
    let value = line.rsplit(OBJECTIVE_MARKER).next().unwrap_or("").trim();
    let token = value
        .trim_matches(|c: char| c == '"' || c == '\'' || c == ',')
        .trim();
    match token.to_ascii_lowercase().as_str() {
        "infeasible" => (ExecStatus::Infeasible, None),
        "unbounded" => (ExecStatus::Unbounded, None),
        _ => match token.parse::<f64>() {
            Ok(v) if v.is_finite() => (ExecStatus::Optimal, Some(v)),
            _ => (ExecStatus::ParseFailure, None),
        },
    }
}

/// Expected outcome of a problem: a value or a solver status.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GroundTruth {
    Value(f64),
    Infeasible,
    Unbounded,
}

impl GroundTruth {
    /// Accepts a number, a numeric string, or `infeasible` / `unbounded`.
    pub fn from_value(v: &Value) -> Option<Self> {
        match v {
            Value::Number(n) => n.as_f64().filter(|f| f.is_finite()).map(GroundTruth::Value),
            Value::String(s) => s.parse().ok(),
            _ => None,
        }
    }
}

impl std::str::FromStr for GroundTruth {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        match t.to_ascii_lowercase().as_str() {
            "infeasible" => Ok(GroundTruth::Infeasible),
            "unbounded" => Ok(GroundTruth::Unbounded),
            _ => t
                .replace(',', "")
                .parse::<f64>()
                .ok()
                .filter(|f| f.is_finite())
                .map(GroundTruth::Value)
                .ok_or_else(|| format!("not a ground truth: `{s}`")),
        }
    }
}

impl fmt::Display for GroundTruth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroundTruth::Value(v) => write!(f, "{v}"),
            GroundTruth::Infeasible => f.write_str("infeasible"),
            GroundTruth::Unbounded => f.write_str("unbounded"),
        }
    }
}

impl Serialize for GroundTruth {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            GroundTruth::Value(v) => s.serialize_f64(*v),
            GroundTruth::Infeasible => s.serialize_str("infeasible"),
            GroundTruth::Unbounded => s.serialize_str("unbounded"),
        }
    }
}

impl<'de> Deserialize<'de> for GroundTruth {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Value::deserialize(d)?;
        GroundTruth::from_value(&v).ok_or_else(|| D::Error::custom(format!("not a ground truth: {v}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatchPolicy {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Round both values to the nearest integer before comparing.
    pub integer_round: bool,
}

impl Default for MatchPolicy {
    fn default() -> Self {
        Self {
            rel_tol: 1e-4,
            abs_tol: 1e-6,
            integer_round: false,
        }
    }
}

pub fn answers_match(got: &ExecResult, expected: &GroundTruth, policy: &MatchPolicy) -> bool {
    match (got.status, expected) {
        (ExecStatus::Infeasible, GroundTruth::Infeasible) => true,
        (ExecStatus::Unbounded, GroundTruth::Unbounded) => true,
        (ExecStatus::Optimal, GroundTruth::Value(exp)) => match got.objective {
            Some(v) => values_match(v, *exp, policy),
            None => false,
        },
        _ => false,
    }
}

pub fn values_match(got: f64, expected: f64, policy: &MatchPolicy) -> bool {
    let (g, e) = if policy.integer_round {
        (got.round(), expected.round())
    } else {
        (got, expected)
    };
    (g - e).abs() <= policy.abs_tol.max(policy.rel_tol * e.abs())
}

/// One line of runner output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunnerReport {
    pub status: String,
    pub objective: Option<f64>,
    #[serde(default)]
    pub stdout: String,
    #[serde(default)]
    pub error: String,
}

impl RunnerReport {
    /// Reads the protocol line; `None` when the output does not conform.
    pub fn parse(output: &str) -> Option<Self> {
        let mut lines = output.lines().filter(|l| !l.trim().is_empty());
        let line = lines.next()?;
        if lines.next().is_some() {
            return None;
        }
        let report: RunnerReport = serde_json::from_str(line.trim()).ok()?;
        let known = ["optimal", "infeasible", "unbounded", "error", "timeout"];
        if !known.contains(&report.status.as_str()) {
            return None;
        }
        if (report.status == "optimal") != report.objective.is_some() {
            return None;
        }
        Some(report)
    }

    pub fn into_result(self, wall_time: f64) -> ExecResult {
        let (status, objective) = match self.status.as_str() {
            "optimal" => (ExecStatus::Optimal, self.objective),
            "infeasible" => (ExecStatus::Infeasible, None),
            "unbounded" => (ExecStatus::Unbounded, None),
            "timeout" => (ExecStatus::Timeout, None),
            _ if self.error.is_empty() => (ExecStatus::ParseFailure, None),
            _ => (ExecStatus::RuntimeError, None),
        };
        ExecResult {
            status,
            objective,
            stdout: self.stdout,
            stderr: self.error,
            wall_time,
            fallback: false,
        }
    }
}

pub trait ScriptExecutor: Send + Sync {
    fn run_script(&self, code: &str, timeout: Duration) -> Result<ExecResult, ExecError>;
}

impl<E: ScriptExecutor + ?Sized> ScriptExecutor for std::sync::Arc<E> {
    fn run_script(&self, code: &str, timeout: Duration) -> Result<ExecResult, ExecError> {
        (**self).run_script(code, timeout)
    }
}

/// Treats the script text as its own stdout. Used by synthetic runs, where
/// "code" is just the line the script would print.
#[derive(Debug, Clone, Copy, Default)]
pub struct InlineExecutor;

impl ScriptExecutor for InlineExecutor {
    fn run_script(&self, code: &str, _timeout: Duration) -> Result<ExecResult, ExecError> {
        if let Some(msg) = code.strip_prefix("raise ") {
            return Ok(ExecResult {
                status: ExecStatus::RuntimeError,
                objective: None,
                stdout: String::new(),
                stderr: msg.trim().to_string(),
                wall_time: 0.0,
                fallback: true,
            });
        }
        Ok(ExecResult::from_stdout(code.to_string(), String::new(), 0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn optimal(v: f64) -> ExecResult {
        ExecResult {
            status: ExecStatus::Optimal,
            objective: Some(v),
            stdout: String::new(),
            stderr: String::new(),
            wall_time: 0.0,
            fallback: false,
        }
    }

    #[test]
    fn objective_lines() {
        assert_eq!(
            parse_objective("Timecost: 0.0\nObjective Value: 760.0"),
            (ExecStatus::Optimal, Some(760.0))
        );
        assert_eq!(
            parse_objective("Objective Value: infeasible"),
            (ExecStatus::Infeasible, None)
        );
        assert_eq!(
            parse_objective("Objective Value: unbounded\n"),
            (ExecStatus::Unbounded, None)
        );
        assert_eq!(parse_objective("hello world"), (ExecStatus::ParseFailure, None));
        assert_eq!(
            parse_objective("Objective Value: None"),
            (ExecStatus::ParseFailure, None)
        );
        assert_eq!(
            parse_objective("Objective Value: nan"),
            (ExecStatus::ParseFailure, None)
        );
        assert_eq!(
            parse_objective("Objective Value: 1\nObjective Value: 2.5e2\n"),
            (ExecStatus::Optimal, Some(250.0))
        );
    }

    #[test]
    fn matching() {
        let p = MatchPolicy::default();
        assert!(answers_match(&optimal(819.0), &GroundTruth::Value(819.0), &p));
        assert!(answers_match(&optimal(99.99995), &GroundTruth::Value(100.0), &p));
        assert!(!answers_match(&optimal(99.9), &GroundTruth::Value(100.0), &p));
        let mut inf = optimal(0.0);
        inf.status = ExecStatus::Infeasible;
        inf.objective = None;
        assert!(!answers_match(&inf, &GroundTruth::Value(5.0), &p));
        assert!(answers_match(&inf, &GroundTruth::Infeasible, &p));
        let round = MatchPolicy {
            integer_round: true,
            ..p
        };
        assert!(answers_match(&optimal(818.6), &GroundTruth::Value(819.0), &round));
        assert!(answers_match(&optimal(0.0), &GroundTruth::Value(0.0), &p));
    }

    #[test]
    fn ground_truth_serde() {
        let g: Vec<GroundTruth> =
            serde_json::from_str(r#"[819, "infeasible", "Unbounded", "1,500.5"]"#).unwrap();
        assert_eq!(
            g,
            [
                GroundTruth::Value(819.0),
                GroundTruth::Infeasible,
                GroundTruth::Unbounded,
                GroundTruth::Value(1500.5)
            ]
        );
        assert_eq!(serde_json::to_string(&g[1]).unwrap(), "\"infeasible\"");
        assert!(serde_json::from_str::<GroundTruth>("\"maybe\"").is_err());
    }

    #[test]
    fn runner_lines() {
        let r =
            RunnerReport::parse(r#"{"status": "optimal", "objective": 819.0, "stdout": "x", "error": ""}"#)
                .unwrap();
        assert_eq!(r.into_result(0.1).objective, Some(819.0));
        let r =
            RunnerReport::parse(r#"{"status": "error", "objective": null, "stdout": "", "error": "boom"}"#)
                .unwrap();
        assert_eq!(r.into_result(0.0).status, ExecStatus::RuntimeError);
        assert!(RunnerReport::parse("Objective Value: 3").is_none());
        assert!(RunnerReport::parse(r#"{"status": "optimal", "objective": null}"#).is_none());
        assert!(RunnerReport::parse("{\"status\": \"timeout\", \"objective\": null}\n{}").is_none());
    }

    #[test]
    fn inline_executor() {
        let r = InlineExecutor
            .run_script("Objective Value: 4", Duration::from_secs(1))
            .unwrap();
        assert_eq!((r.status, r.objective), (ExecStatus::Optimal, Some(4.0)));
        let r = InlineExecutor
            .run_script("raise ValueError", Duration::from_secs(1))
            .unwrap();
        assert_eq!(r.status, ExecStatus::RuntimeError);
    }
}
