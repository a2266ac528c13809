//! Runs every verification harness and prints its report.
//!
//! cargo run --release --example verify_suites

use shapecart::verify::{run_suite, Suite};

fn main() {
    for suite in [Suite::Lemma1, Suite::Theorem2, Suite::Oracle, Suite::Complexity] {
        let r = run_suite(suite, 0, false);
        println!("== {suite:?}: {}", if r.passed { "passed" } else { "FAILED" });
        print!("{}", r.text);
    }
}
