//! Randomized self-check of the dual solvers against the independent
//! oracles. Same report as `doro verify`.

use doro::verify::{run, VerifyOptions};

fn main() {
    let report = run(&VerifyOptions {
        trials: 50,
        ..VerifyOptions::default()
    });
    print!("{report}");
    std::process::exit(if report.passed() { 0 } else { 1 });
}
