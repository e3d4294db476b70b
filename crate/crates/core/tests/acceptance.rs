//! Acceptance suite: one PASS/FAIL line per numbered criterion at full budgets.
//!
//! `WINDTREE_ACCEPTANCE_SEED` overrides the seed; `WINDTREE_ACCEPTANCE_ONLY`
//! takes a comma-separated list of criterion ids.

use std::process::ExitCode;

use windtree::report::{Budgets, Suite, CRITERIA};

const DEFAULT_SEED: u64 = 20240601;

fn main() -> ExitCode {
    let seed = std::env::var("WINDTREE_ACCEPTANCE_SEED")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(DEFAULT_SEED);
    let ids: Vec<u32> = match std::env::var("WINDTREE_ACCEPTANCE_ONLY") {
        Ok(s) => s.split(',').filter_map(|x| x.trim().parse().ok()).collect(),
        Err(_) => CRITERIA.collect(),
    };
    let suite = Suite::new(Budgets::acceptance(), seed);
    println!("acceptance suite, seed {seed}");
    let mut failed = Vec::new();
    for id in ids {
        let o = suite.run(id);
        println!("{}", o.line());
        if !o.pass {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        ExitCode::FAILURE
    }
}
