//! Run the acceptance suites programmatically and print one line per check.

use symld::verify::{verify, Suite, VerifyOptions};

fn main() {
    let suite = std::env::args()
        .nth(1)
        .map(|s| s.parse().expect("suite name"))
        .unwrap_or(Suite::Oracle);
    let report = verify(suite, &VerifyOptions::seeded(1));
    for c in &report.criteria {
        println!("{}", c.line());
    }
    println!("suite {} fingerprint {}", suite.name(), report.fingerprint);
}
