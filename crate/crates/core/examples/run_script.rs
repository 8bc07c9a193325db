//! Run scripts in a subprocess: a normal run, a crash and a timeout.
//! Requires python3.
//!
//! ```bash
//! cargo run --example run_script
//! ```

use std::time::Duration;

use optitree::exec::{ProcessExecutor, ScriptExecutor};

fn main() {
    let exec = ProcessExecutor::default();
    let scripts = [
        (
            "optimal",
            "x, y = 22, 111\nprint('Objective Value:', 12 * x + 5 * y)\n",
        ),
        ("infeasible", "print('Objective Value: infeasible')\n"),
        ("crash", "import missing_solver_module\n"),
        ("no marker", "print('solved')\n"),
        ("hang", "import time\ntime.sleep(60)\n"),
    ];
    for (name, code) in scripts {
        let r = exec
            .run_script(code, Duration::from_secs(2))
            .expect("python3 available");
        println!(
            "{name:<11} {:<14} objective {:<8} {:.2}s",
            format!("{:?}", r.status),
            format!("{:?}", r.objective),
            r.wall_time
        );
        if !r.stderr.is_empty() {
            println!("            {}", r.stderr.lines().last().unwrap_or_default());
        }
    }
}
