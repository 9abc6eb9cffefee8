//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Failures are reported but only turn the exit status nonzero when
//! `EDGESPIN_ACCEPTANCE_STRICT=1`.

use std::io::Write;
use std::process::ExitCode;

use edgespin_cli::checks::{run_level, Level, VerifyOptions};

fn main() -> ExitCode {
    let strict = std::env::var("EDGESPIN_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let outcomes = run_level(Level::Full, &VerifyOptions::default(), |o| {
        println!("{}", o.line());
        let _ = std::io::stdout().flush();
    });
    let failed: Vec<_> = outcomes
        .iter()
        .filter(|o| !o.passed)
        .map(|o| o.id)
        .collect();
    println!(
        "acceptance: {} passed, {} failed {:?}",
        outcomes.len() - failed.len(),
        failed.len(),
        failed
    );
    if strict && !failed.is_empty() {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
