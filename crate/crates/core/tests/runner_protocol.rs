mod common;

use std::time::Duration;

use optitree::exec::{ExecConfig, ExecStatus, ProcessExecutor, ScriptExecutor, KILL_GRACE};

use common::*;

fn runner() -> ProcessExecutor {
    let cmd = format!("python3 {}", fixture("fake_runner.py").display());
    ProcessExecutor::new(ExecConfig::default().with_runner(&cmd))
}

#[test]
fn four_outcomes_without_fallback() {
    let exec = runner();
    let cases = [
        (
            "print('Objective Value:', 819.0)\n",
            ExecStatus::Optimal,
            Some(819.0),
        ),
        (
            "print('Objective Value: infeasible')\n",
            ExecStatus::Infeasible,
            None,
        ),
        ("while True:\n    pass\n", ExecStatus::Timeout, None),
        (
            "raise RuntimeError('solver crashed')\n",
            ExecStatus::RuntimeError,
            None,
        ),
    ];
    for (code, status, objective) in cases {
        let r = exec.run_script(code, Duration::from_secs(1)).unwrap();
        assert_eq!((r.status, r.objective), (status, objective), "{code}");
        assert!(!r.fallback, "{code}");
        assert!(r.wall_time < 1.0 + 2.0 * KILL_GRACE.as_secs_f64());
    }
    let r = exec
        .run_script("raise RuntimeError('solver crashed')\n", Duration::from_secs(5))
        .unwrap();
    assert!(r.error_text().contains("solver crashed"), "{}", r.error_text());
}

#[test]
fn clean_run_without_objective_is_a_parse_failure() {
    let r = runner()
        .run_script("print('no marker')\n", Duration::from_secs(5))
        .unwrap();
    assert_eq!(r.status, ExecStatus::ParseFailure);
    assert!(!r.fallback);
}

#[test]
fn nonconforming_runner_output_falls_back_to_stdout() {
    // A runner that ignores the protocol and prints solver-style text.
    let dir = tempfile::tempdir().unwrap();
    let sh = dir.path().join("loose_runner.sh");
    std::fs::write(&sh, "#!/bin/sh\necho 'warming up'\necho 'Objective Value: 42'\n").unwrap();
    let exec = ProcessExecutor::new(ExecConfig::default().with_runner(&format!("sh {}", sh.display())));
    let r = exec.run_script("ignored", Duration::from_secs(5)).unwrap();
    assert_eq!(
        (r.status, r.objective, r.fallback),
        (ExecStatus::Optimal, Some(42.0), true)
    );
}

#[test]
fn failing_runner_is_a_harness_failure() {
    let exec = ProcessExecutor::new(ExecConfig::default().with_runner("sh -c 'exit 3' --"));
    assert!(matches!(
        exec.run_script("print(1)", Duration::from_secs(5)),
        Err(optitree::exec::ExecError::HarnessFailure(_))
    ));
}
