//! Command-line entry point.
//!
//! Settings resolve as flag, then config file (`--config`, TOML), then
//! environment, then built-in default. Exit codes: 0 success, 1 operational
//! failure, 2 usage error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::eval::{evaluate, load_dataset, problem_from_value, render_report, ReportFormat};
use crate::exec::{ExecConfig, InlineExecutor, MatchPolicy, ProcessExecutor, ScriptExecutor};
use crate::llm::{LiveBackend, LiveConfig, TranscriptBackend, ENV_API_BASE, ENV_API_KEY, ENV_MODEL};
use crate::oracle::{schema_features, JudgeBackend, JudgeTarget, LlmJudge};
use crate::pipeline::{Agent, LlmAgent, Pipeline, PipelineConfig, ProblemInstance, SyntheticAgent};
use crate::schema::NodeSchema;
use crate::tree::{load_tree, save_tree, ModelingTree};

#[derive(Debug, Parser)]
#[command(
    name = "optitree",
    version,
    about = "Build, search and evaluate modeling trees"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Default, Clone, Args)]
struct GlobalArgs {
    /// TOML settings file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// live, synthetic or transcript:<path>
    #[arg(long, global = true)]
    backend: Option<String>,
    /// Runner command; without one scripts run under python3 directly.
    #[arg(long, global = true)]
    runner: Option<String>,
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true)]
    max_depth: Option<usize>,
    #[arg(long, global = true)]
    repair_budget: Option<u32>,
    #[arg(long, global = true)]
    update_rounds: Option<u32>,
    /// Seconds per script run.
    #[arg(long, global = true)]
    timeout: Option<f64>,
    #[arg(long, global = true)]
    rel_tol: Option<f64>,
    #[arg(long, global = true)]
    abs_tol: Option<f64>,
    #[arg(long, global = true)]
    model: Option<String>,
    #[arg(long, global = true)]
    api_base: Option<String>,
    /// Print results as JSON.
    #[arg(long, global = true)]
    json: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Grow a tree over a dataset.
    Build {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve one problem against a tree.
    Solve {
        #[arg(long)]
        tree: Option<PathBuf>,
        /// A dataset record (JSON) or plain problem text.
        #[arg(long)]
        problem: PathBuf,
    },
    /// Solve a dataset and report accuracy.
    Eval {
        #[arg(long)]
        tree: Option<PathBuf>,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
        /// table, json or csv; defaults from the report extension.
        #[arg(long)]
        format: Option<String>,
    },
    /// Node count, depth and mean branching of a tree.
    Stats {
        #[arg(long)]
        tree: Option<PathBuf>,
    },
    /// Check tree invariants and subproblem order.
    Verify {
        #[arg(long)]
        tree: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = VerifyOracle::Synthetic)]
        oracle: VerifyOracle,
        /// Required with `--oracle live`: one judge call per ancestor pair.
        #[arg(long)]
        yes_really: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VerifyOracle {
    Synthetic,
    Live,
}

/// Settings file contents. Every field is optional.
#[derive(Debug, Default, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    pub backend: Option<String>,
    pub tree: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub runner: Option<String>,
    pub jobs: Option<usize>,
    pub max_depth: Option<usize>,
    pub repair_budget: Option<u32>,
    pub update_rounds: Option<u32>,
    pub exec_timeout_s: Option<f64>,
    pub rel_tol: Option<f64>,
    pub abs_tol: Option<f64>,
    pub integer_round: Option<bool>,
    pub report_format: Option<String>,
    pub api_base: Option<String>,
    pub api_key: Option<String>,
    pub model: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BackendChoice {
    Live,
    Synthetic,
    Transcript(PathBuf),
}

impl std::str::FromStr for BackendChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "live" => Ok(Self::Live),
            "synthetic" => Ok(Self::Synthetic),
            _ => match s.strip_prefix("transcript:") {
                Some(p) if !p.is_empty() => Ok(Self::Transcript(PathBuf::from(p))),
                _ => Err(format!(
                    "unknown backend `{s}` (live, synthetic, transcript:<path>)"
                )),
            },
        }
    }
}

enum Failure {
    Usage(String),
    Operational(String),
}

type CmdResult = Result<(), Failure>;

fn op(e: impl std::fmt::Display) -> Failure {
    Failure::Operational(e.to_string())
}

struct Env<'a> {
    flags: GlobalArgs,
    file: CliConfig,
    out: &'a mut dyn Write,
}

impl Env<'_> {
    fn backend(&self) -> Result<BackendChoice, Failure> {
        let raw = self
            .flags
            .backend
            .clone()
            .or_else(|| self.file.backend.clone())
            .or_else(|| std::env::var("OPTITREE_BACKEND").ok())
            .ok_or_else(|| Failure::Usage("no backend selected; pass --backend".into()))?;
        raw.parse().map_err(Failure::Usage)
    }

    fn pipeline_config(&self) -> Result<PipelineConfig, Failure> {
        let (f, c) = (&self.flags, &self.file);
        let d = PipelineConfig::default();
        let dp = MatchPolicy::default();
        let cfg = PipelineConfig {
            max_depth: f.max_depth.or(c.max_depth),
            repair_budget: f.repair_budget.or(c.repair_budget).unwrap_or(d.repair_budget),
            update_rounds: f.update_rounds.or(c.update_rounds).unwrap_or(d.update_rounds),
            match_policy: MatchPolicy {
                rel_tol: f.rel_tol.or(c.rel_tol).unwrap_or(dp.rel_tol),
                abs_tol: f.abs_tol.or(c.abs_tol).unwrap_or(dp.abs_tol),
                integer_round: c.integer_round.unwrap_or(dp.integer_round),
            },
            exec_timeout_s: f.timeout.or(c.exec_timeout_s).unwrap_or(d.exec_timeout_s),
            jobs: f.jobs.or(c.jobs).unwrap_or(d.jobs),
        };
        cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
        Ok(cfg)
    }

    fn live_config(&self) -> Result<LiveConfig, Failure> {
        let env = |k: &str| std::env::var(k).ok().filter(|v| !v.is_empty());
        let base = self
            .flags
            .api_base
            .clone()
            .or_else(|| self.file.api_base.clone())
            .or_else(|| env(ENV_API_BASE));
        let model = self
            .flags
            .model
            .clone()
            .or_else(|| self.file.model.clone())
            .or_else(|| env(ENV_MODEL));
        let (Some(base), Some(model)) = (base, model) else {
            return Err(Failure::Usage(format!(
                "live backend needs an endpoint and model (--api-base/--model or {ENV_API_BASE}/{ENV_MODEL})"
            )));
        };
        let mut cfg = LiveConfig::new(base, model);
        cfg.api_key = self.file.api_key.clone().or_else(|| env(ENV_API_KEY));
        Ok(cfg)
    }

    fn agent(&self) -> Result<(Arc<dyn Agent>, bool), Failure> {
        Ok(match self.backend()? {
            BackendChoice::Synthetic => (Arc::new(SyntheticAgent::default()), true),
            BackendChoice::Transcript(path) => {
                let text = read(&path)?;
                let backend = TranscriptBackend::from_jsonl(&text)
                    .map_err(|e| op(format!("{}: {e}", path.display())))?;
                (Arc::new(LlmAgent::new(backend)), false)
            }
            BackendChoice::Live => {
                let backend = LiveBackend::new(self.live_config()?).map_err(op)?;
                (Arc::new(LlmAgent::new(backend)), false)
            }
        })
    }

    fn pipeline(&self) -> Result<Pipeline, Failure> {
        let config = self.pipeline_config()?;
        let (agent, synthetic) = self.agent()?;
        // Synthetic "code" is the stdout itself and is never run.
        let executor: Arc<dyn ScriptExecutor> = if synthetic {
            Arc::new(InlineExecutor)
        } else {
            let mut ec = ExecConfig {
                max_concurrent: config.jobs,
                ..ExecConfig::default()
            };
            if let Some(r) = self.flags.runner.as_ref().or(self.file.runner.as_ref()) {
                ec = ec.with_runner(r);
            }
            Arc::new(ProcessExecutor::new(ec))
        };
        Pipeline::new(agent, executor, config).map_err(|e| Failure::Usage(e.to_string()))
    }

    fn path(&self, flag: Option<PathBuf>, file: Option<&PathBuf>, what: &str) -> Result<PathBuf, Failure> {
        flag.or_else(|| file.cloned())
            .ok_or_else(|| Failure::Usage(format!("missing --{what}")))
    }

    fn tree(&self, flag: Option<PathBuf>) -> Result<ModelingTree, Failure> {
        let path = self.path(flag, self.file.tree.as_ref(), "tree")?;
        load_tree(&read(&path)?).map_err(|e| op(format!("{}: {e}", path.display())))
    }

    fn emit(&mut self, text: &str) -> CmdResult {
        self.out.write_all(text.as_bytes()).map_err(op)
    }

    fn emit_json<T: Serialize>(&mut self, value: &T) -> CmdResult {
        let s = serde_json::to_string_pretty(value).map_err(op)?;
        self.emit(&format!("{s}\n"))
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| op(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> CmdResult {
    std::fs::write(path, text).map_err(|e| op(format!("{}: {e}", path.display())))
}

fn read_problem(path: &Path) -> Result<ProblemInstance, Failure> {
    let text = read(path)?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    match serde_json::from_str::<serde_json::Value>(&text) {
        Ok(v @ serde_json::Value::Object(_)) => {
            problem_from_value(v, &stem).map_err(|e| op(format!("{}: {e}", path.display())))
        }
        _ => Ok(ProblemInstance::new(stem, text.trim())),
    }
}

fn build(env: &mut Env, dataset: Option<PathBuf>, out: Option<PathBuf>) -> CmdResult {
    let dataset = env.path(dataset, env.file.dataset.as_ref(), "dataset")?;
    let out = env.path(out, env.file.tree.as_ref(), "out")?;
    let pipeline = env.pipeline()?;
    let data = load_dataset(&read(&dataset)?).map_err(op)?;
    for m in &data.malformed {
        log::warn!("{}:{}: {}", dataset.display(), m.line, m.reason);
    }
    let (tree, report) = pipeline.build_tree_with(&data.instances, |k, t| {
        log::info!("{k}/{} problems, {} nodes", data.instances.len(), t.len());
    });
    write(&out, &save_tree(&tree).map_err(op)?)?;
    if env.flags.json {
        env.emit_json(&report)?;
    } else {
        let updated = report
            .entries
            .iter()
            .filter(|e| e.update.as_ref().is_some_and(|u| u.updated))
            .count();
        let failed = report.entries.iter().filter(|e| e.error.is_some()).count();
        env.emit(&format!(
            "{} problems, {updated} updates, {failed} errors\nnodes {} depth {} avg_degree {:.3}\nwrote {}\n",
            report.entries.len(),
            report.stats.node_count,
            report.stats.depth,
            report.stats.avg_degree,
            out.display()
        ))?;
    }
    match &report.invariant_error {
        Some(e) => Err(op(format!("built tree violates invariants: {e}"))),
        None => Ok(()),
    }
}

fn solve(env: &mut Env, tree: Option<PathBuf>, problem: PathBuf) -> CmdResult {
    let tree = env.tree(tree)?;
    let problem = read_problem(&problem)?;
    let pipeline = env.pipeline()?;
    let outcome = pipeline.solve_problem(&tree, &problem);
    if env.flags.json {
        env.emit_json(&outcome)?;
    } else {
        let path: Vec<&str> = outcome
            .trace
            .path
            .iter()
            .map(|s| s.problem_type.as_str())
            .collect();
        let mut s = format!(
            "path: {}\n",
            if path.is_empty() {
                "(root)".into()
            } else {
                path.join(" > ")
            }
        );
        if let Some(e) = &outcome.exec {
            s.push_str(&format!("status: {:?}\n", e.status));
            if let Some(v) = e.objective {
                s.push_str(&format!("objective: {v}\n"));
            }
        }
        if let Some(m) = outcome.matched {
            s.push_str(&format!("matched: {m}\n"));
        }
        env.emit(&s)?;
    }
    match outcome.failure {
        Some(f) => Err(op(f)),
        None => Ok(()),
    }
}

fn eval(
    env: &mut Env,
    tree: Option<PathBuf>,
    dataset: Option<PathBuf>,
    report_path: Option<PathBuf>,
    format: Option<String>,
) -> CmdResult {
    let tree = env.tree(tree)?;
    let dataset = env.path(dataset, env.file.dataset.as_ref(), "dataset")?;
    let format: ReportFormat = match format.or_else(|| env.file.report_format.clone()) {
        Some(f) => f.parse().map_err(Failure::Usage)?,
        None => match report_path
            .as_ref()
            .and_then(|p| p.extension())
            .and_then(|e| e.to_str())
        {
            Some("json") => ReportFormat::Json,
            Some("csv") => ReportFormat::Csv,
            _ => ReportFormat::Table,
        },
    };
    let pipeline = env.pipeline()?;
    let data = load_dataset(&read(&dataset)?).map_err(op)?;
    for m in &data.malformed {
        log::warn!("{}:{}: {}", dataset.display(), m.line, m.reason);
    }
    let report = evaluate(&pipeline, &tree, &data.instances).map_err(op)?;
    if let Some(p) = &report_path {
        write(p, &render_report(&report, format))?;
    }
    if env.flags.json {
        env.emit_json(&report)
    } else {
        env.emit(&render_report(&report, ReportFormat::Table))
    }
}

fn stats(env: &mut Env, tree: Option<PathBuf>) -> CmdResult {
    let s = env.tree(tree)?.stats();
    let v = json!({"nodes": s.node_count, "depth": s.depth, "avg_degree": s.avg_degree});
    if env.flags.json {
        env.emit_json(&v)
    } else {
        env.emit(&format!("{v}\n"))
    }
}

fn feature_subset(a: &NodeSchema, d: &NodeSchema) -> bool {
    schema_features(a).is_subset(&schema_features(d))
}

fn verify(env: &mut Env, tree: Option<PathBuf>, oracle: VerifyOracle, yes_really: bool) -> CmdResult {
    let tree = env.tree(tree)?;
    let invariants = tree.check_invariants().err().map(|e| e.to_string());
    let violations = match oracle {
        VerifyOracle::Synthetic => tree.check_order_preserving(feature_subset),
        VerifyOracle::Live => {
            if !yes_really {
                return Err(Failure::Usage(
                    "--oracle live makes one paid call per ancestor pair; add --yes-really".into(),
                ));
            }
            let judge = LlmJudge::new(LiveBackend::new(env.live_config()?).map_err(op)?);
            tree.check_order_preserving(|a, d| {
                let target = JudgeTarget {
                    text: d
                        .statement_thoughts
                        .iter()
                        .map(|t| format!("{}: {}", t.label, t.text))
                        .collect::<Vec<_>>()
                        .join("\n"),
                    thoughts: Some(d.statement_thoughts.clone()),
                    basic_type: d.problem_type.clone(),
                };
                match judge.judge_batch(&[a], &target) {
                    Ok(j) => j.first().is_some_and(|j| j.is_subproblem()),
                    Err(e) => {
                        log::warn!("judge failed on {} / {}: {e}", a.problem_type, d.problem_type);
                        false
                    }
                }
            })
        }
    };
    if env.flags.json {
        let pairs: Vec<(&str, &str)> = violations.iter().map(|(a, d)| (a.as_str(), d.as_str())).collect();
        env.emit_json(&json!({"invariants": invariants, "order_violations": pairs}))?;
    } else {
        let mut s = format!("invariants: {}\n", invariants.as_deref().unwrap_or("OK"));
        if violations.is_empty() {
            s.push_str("order-preserving: OK\n");
        } else {
            s.push_str(&format!("order-preserving: {} violations\n", violations.len()));
            for (a, d) in &violations {
                s.push_str(&format!("  {a} is not a subproblem of descendant {d}\n"));
            }
        }
        env.emit(&s)?;
    }
    if invariants.is_some() || !violations.is_empty() {
        return Err(op("verification failed"));
    }
    Ok(())
}

/// Parses `argv` (program name first) and runs the command, writing results
/// to `out` and diagnostics to `err`. Returns the process exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let file = match &cli.global.config {
        None => Ok(CliConfig::default()),
        Some(p) => std::fs::read_to_string(p)
            .map_err(|e| format!("{}: {e}", p.display()))
            .and_then(|t| toml::from_str::<CliConfig>(&t).map_err(|e| format!("{}: {e}", p.display()))),
    };
    let file = match file {
        Ok(f) => f,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return 2;
        }
    };
    let mut env = Env {
        flags: cli.global,
        file,
        out,
    };
    let result = match cli.command {
        Command::Build { dataset, out } => build(&mut env, dataset, out),
        Command::Solve { tree, problem } => solve(&mut env, tree, problem),
        Command::Eval {
            tree,
            dataset,
            report,
            format,
        } => eval(&mut env, tree, dataset, report, format),
        Command::Stats { tree } => stats(&mut env, tree),
        Command::Verify {
            tree,
            oracle,
            yes_really,
        } => verify(&mut env, tree, oracle, yes_really),
    };
    match result {
        Ok(()) => 0,
        Err(Failure::Usage(m)) => {
            let _ = writeln!(
                err,
                "error: {m}\n\nusage: optitree <build|solve|eval|stats|verify> [options]; see --help"
            );
            2
        }
        Err(Failure::Operational(m)) => {
            let _ = writeln!(err, "error: {m}");
            1
        }
    }
}

/// [`run`] against the process's standard streams.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(argv, &mut stdout.lock(), &mut stderr.lock())
}
