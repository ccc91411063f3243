//! Acceptance criteria 1-9, one pass/fail line each. Runs without the
//! libtest harness so that every line reaches the output.

use std::process::ExitCode;

use symld::verify::{self, reproducibility, CriterionReport, VerifyOptions};

const SEED: u64 = 20_240_917;

fn show(report: &CriterionReport) -> bool {
    println!("{}", report.line());
    for m in &report.measured {
        println!("    {} = {}", m.name, m.value);
    }
    report.pass
}

fn main() -> ExitCode {
    let opts = VerifyOptions::seeded(SEED);
    let singles = [
        verify::criterion_1(&opts),
        verify::criterion_2(&opts),
        verify::criterion_3a(&opts),
        verify::criterion_3b(&opts),
        verify::criterion_4(&opts),
        verify::criterion_5(&opts),
        verify::criterion_6(&opts),
        verify::criterion_7(&opts),
        verify::criterion_8(&opts),
    ];
    let (reports, c9) = reproducibility(&opts);
    for r in &reports {
        println!("suite {} fingerprint {} ({} ms)", r.suite.name(), r.fingerprint, r.elapsed_ms);
    }
    let mut failed: Vec<String> = Vec::new();
    for c in singles.iter().chain(std::iter::once(&c9)) {
        if !show(c) {
            failed.push(c.id.clone());
        }
    }
    println!();
    println!("acceptance summary:");
    for c in singles.iter().chain(std::iter::once(&c9)) {
        println!("  {:<3} {}", c.id, if c.pass { "pass" } else { "FAIL" });
    }
    if failed.is_empty() {
        println!("acceptance: all criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failing criteria {failed:?}");
        ExitCode::FAILURE
    }
}
