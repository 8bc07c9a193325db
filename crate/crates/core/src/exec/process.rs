use std::io::{ErrorKind, Read};
use std::path::Path;
use std::process::{Child, Command, Stdio};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use super::{ExecError, ExecResult, ExecStatus, RunnerReport, ScriptExecutor};
use crate::clock::{Clock, SystemClock};
use crate::sync::Semaphore;

/// Extra time granted past the timeout before the process group is killed.
pub const KILL_GRACE: Duration = Duration::from_secs(1);

const POLL: Duration = Duration::from_millis(5);

#[derive(Debug, Clone, PartialEq)]
pub struct ExecConfig {
    /// Runner command and leading arguments. `None` runs the interpreter
    /// directly and classifies raw stdout.
    pub runner: Option<Vec<String>>,
    pub python: String,
    /// Bytes kept per stream; the rest is drained and dropped.
    pub max_output_bytes: usize,
    pub max_concurrent: usize,
}

impl Default for ExecConfig {
    fn default() -> Self {
        Self {
            runner: None,
            python: "python3".into(),
            max_output_bytes: 1 << 20,
            max_concurrent: std::thread::available_parallelism().map_or(4, |n| n.get()),
        }
    }
}

impl ExecConfig {
    /// Splits a runner command line on whitespace.
    pub fn with_runner(mut self, command: &str) -> Self {
        let parts: Vec<String> = command.split_whitespace().map(str::to_string).collect();
        self.runner = if parts.is_empty() { None } else { Some(parts) };
        self
    }
}

/// Runs each script in its own temp directory and process group.
pub struct ProcessExecutor {
    config: ExecConfig,
    slots: Semaphore,
    clock: Arc<dyn Clock>,
}

impl std::fmt::Debug for ProcessExecutor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProcessExecutor")
            .field("config", &self.config)
            .finish_non_exhaustive()
    }
}

impl Default for ProcessExecutor {
    fn default() -> Self {
        Self::new(ExecConfig::default())
    }
}

struct Captured {
    stdout: String,
    stderr: String,
    code: Option<i32>,
    timed_out: bool,
}

impl ProcessExecutor {
    pub fn new(config: ExecConfig) -> Self {
        let slots = Semaphore::new(config.max_concurrent);
        Self {
            config,
            slots,
            clock: Arc::new(SystemClock::default()),
        }
    }

    /// Clock used for the reported wall time. Deadlines always use real time.
    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn config(&self) -> &ExecConfig {
        &self.config
    }

    fn command(&self, script: &Path, dir: &Path, timeout: Duration) -> (Command, String) {
        let (mut cmd, program) = match &self.config.runner {
            Some(parts) => {
                let mut cmd = Command::new(&parts[0]);
                cmd.args(&parts[1..])
                    .arg("--script")
                    .arg(script)
                    .arg("--timeout")
                    .arg(format!("{}", timeout.as_secs_f64()));
                (cmd, parts[0].clone())
            }
            None => {
                let mut cmd = Command::new(&self.config.python);
                cmd.arg(script);
                (cmd, self.config.python.clone())
            }
        };
        cmd.current_dir(dir)
            .env("PYTHONDONTWRITEBYTECODE", "1")
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped());
        (cmd, program)
    }

    fn run(&self, mut cmd: Command, program: &str, deadline: Duration) -> Result<Captured, ExecError> {
        #[cfg(unix)]
        {
            use std::os::unix::process::CommandExt;
            cmd.process_group(0);
        }
        let mut child = cmd.spawn().map_err(|e| match e.kind() {
            ErrorKind::NotFound => ExecError::RunnerMissing(program.to_string()),
            _ => ExecError::Io(format!("spawn {program}: {e}")),
        })?;
        let cap = self.config.max_output_bytes;
        let out = drain(child.stdout.take().expect("piped"), cap);
        let err = drain(child.stderr.take().expect("piped"), cap);

        let started = Instant::now();
        let mut timed_out = false;
        let status = loop {
            match child.try_wait().map_err(|e| ExecError::Io(e.to_string()))? {
                Some(status) => {
                    // Reap stragglers still holding the pipes open.
                    kill_group(&mut child);
                    break status;
                }
                None if started.elapsed() >= deadline => {
                    timed_out = true;
                    kill_group(&mut child);
                    break child.wait().map_err(|e| ExecError::Io(e.to_string()))?;
                }
                None => std::thread::sleep(POLL),
            }
        };
        // The group is gone, so the pipes close and the readers finish.
        let stdout = out.join().unwrap_or_default();
        let stderr = err.join().unwrap_or_default();
        Ok(Captured {
            stdout,
            stderr,
            code: status.code(),
            timed_out,
        })
    }
}

fn drain<R: Read + Send + 'static>(mut reader: R, cap: usize) -> JoinHandle<String> {
    std::thread::spawn(move || {
        let mut kept = Vec::new();
        let mut buf = [0u8; 8192];
        loop {
            match reader.read(&mut buf) {
                Ok(0) | Err(_) => break,
                Ok(n) => {
                    let room = cap.saturating_sub(kept.len());
                    kept.extend_from_slice(&buf[..n.min(room)]);
                }
            }
        }
        String::from_utf8_lossy(&kept).into_owned()
    })
}

fn kill_group(child: &mut Child) {
    #[cfg(unix)]
    {
        // The child leads its own group; signal the whole group so that
        // grandchildren die too.
        let pgid = child.id() as libc::pid_t;
        unsafe {
            libc::kill(-pgid, libc::SIGKILL);
        }
    }
    let _ = child.kill();
}

impl ScriptExecutor for ProcessExecutor {
    fn run_script(&self, code: &str, timeout: Duration) -> Result<ExecResult, ExecError> {
        let _slot = self.slots.acquire();
        let dir = tempfile::tempdir().map_err(|e| ExecError::Io(e.to_string()))?;
        let script = dir.path().join("script.py");
        std::fs::write(&script, code).map_err(|e| ExecError::Io(e.to_string()))?;

        let with_runner = self.config.runner.is_some();
        let deadline = if with_runner {
            timeout + 2 * KILL_GRACE
        } else {
            timeout
        };
        let (cmd, program) = self.command(&script, dir.path(), timeout);
        let start = self.clock.now();
        let cap = self.run(cmd, &program, deadline)?;
        let wall_time = self.clock.since(start).as_secs_f64();

        if cap.timed_out {
            return Ok(ExecResult {
                status: ExecStatus::Timeout,
                objective: None,
                stdout: cap.stdout,
                stderr: cap.stderr,
                wall_time,
                fallback: !with_runner,
            });
        }
        if with_runner {
            if cap.code != Some(0) {
                return Err(ExecError::HarnessFailure(format!(
                    "exit {:?}: {}",
                    cap.code,
                    cap.stderr.trim()
                )));
            }
            return Ok(match RunnerReport::parse(&cap.stdout) {
                Some(report) => report.into_result(wall_time),
                None => {
                    log::warn!("runner output is not a protocol line; scanning raw stdout");
                    ExecResult::from_stdout(cap.stdout, cap.stderr, wall_time)
                }
            });
        }
        if cap.code == Some(0) {
            Ok(ExecResult::from_stdout(cap.stdout, cap.stderr, wall_time))
        } else {
            Ok(ExecResult {
                status: ExecStatus::RuntimeError,
                objective: None,
                stdout: cap.stdout,
                stderr: cap.stderr,
                wall_time,
                fallback: true,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(code: &str, secs: f64) -> ExecResult {
        ProcessExecutor::default()
            .run_script(code, Duration::from_secs_f64(secs))
            .unwrap()
    }

    #[test]
    fn direct_mode_statuses() {
        let r = run(
            "print('Timecost:', 0.0)\nprint('Objective Value:', 819.0)\n",
            10.0,
        );
        assert_eq!((r.status, r.objective), (ExecStatus::Optimal, Some(819.0)));
        assert!(r.fallback);

        let r = run("raise ValueError('bad coefficient')\n", 10.0);
        assert_eq!(r.status, ExecStatus::RuntimeError);
        assert!(r.stderr.contains("bad coefficient"));

        let r = run("print('done')\n", 10.0);
        assert_eq!(r.status, ExecStatus::ParseFailure);
    }

    #[test]
    fn timeout_kills_the_group() {
        let started = Instant::now();
        let r = run("import subprocess, sys\nsubprocess.Popen([sys.executable, '-c', 'while True: pass'])\nwhile True:\n    pass\n", 1.0);
        assert_eq!(r.status, ExecStatus::Timeout);
        assert!(
            r.wall_time >= 0.9 && r.wall_time <= 1.0 + KILL_GRACE.as_secs_f64(),
            "{}",
            r.wall_time
        );
        assert!(started.elapsed() < Duration::from_secs(5));
    }

    #[test]
    fn output_is_capped() {
        let exec = ProcessExecutor::new(ExecConfig {
            max_output_bytes: 100,
            ..ExecConfig::default()
        });
        let r = exec
            .run_script("print('x' * 100000)\n", Duration::from_secs(10))
            .unwrap();
        assert_eq!(r.stdout.len(), 100);
    }

    #[test]
    fn missing_runner() {
        let exec = ProcessExecutor::new(ExecConfig::default().with_runner("/nonexistent/optitree-runner"));
        assert!(matches!(
            exec.run_script("print(1)", Duration::from_secs(1)),
            Err(ExecError::RunnerMissing(_))
        ));
    }
}
