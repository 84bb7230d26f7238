//! Acceptance gate: one line per criterion, nonzero exit if any fails.

#[path = "../common/mod.rs"]
mod common;
mod util;

mod apps;
mod calculus;
mod conjugates;
mod determinism;
mod duality;
mod linear;
mod stopping;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use util::Outcome;

fn main() {
    let criteria: Vec<(u32, &str, fn() -> Outcome)> = vec![
        (1, "weak duality on feasible pairs", duality::run),
        (2, "conjugates against brute force", conjugates::run),
        (3, "optimal stopping against enumeration", stopping::run),
        (4, "linear programs against vertex enumeration", linear::run),
        (5, "hedging fixture", apps::hedging),
        (6, "control: reduced dual and maximum principle", apps::control),
        (7, "exact filtration calculus", calculus::run),
        (8, "linearity condition against no-arbitrage", apps::linearity_vs_arbitrage),
        (9, "deterministic certificates", determinism::run),
    ];
    let mut failed = 0;
    for (n, what, check) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("acceptance {n}: PASS {what} ({secs:.2}s): {detail}"),
            Err(why) => {
                failed += 1;
                println!("acceptance {n}: FAIL {what} ({secs:.2}s): {why}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
