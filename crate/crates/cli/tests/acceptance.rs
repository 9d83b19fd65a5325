//! The eleven acceptance criteria, each timed against its budget.
//!
//! Lines go straight to stderr so they show without `--nocapture`.

use std::io::Write;
use std::process::Command;
use std::time::{Duration, Instant};

use ualg_core::selftest::{run_criterion, DETERMINISM_WORKERS, TITLES};

/// Runtime budget per criterion; `None` where only correctness is required.
fn budget(id: usize) -> Option<Duration> {
    let secs = match id {
        1 => 10,
        2 => 5,
        3 => 30,
        4 => 10,
        5 => 60,
        10 => 120,
        _ => return None,
    };
    Some(Duration::from_secs(secs))
}

fn report(id: usize, passed: bool, elapsed: Duration, detail: &str) {
    let verdict = if passed { "pass" } else { "FAIL" };
    let line = format!("{verdict} {id:>2} {} [{:.2}s]: {detail}\n", TITLES[id - 1], elapsed.as_secs_f64());
    let _ = std::io::stderr().write_all(line.as_bytes());
}

fn selftest_bytes(workers: usize) -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_ualg"))
        .args(["selftest", "--only", "1,2,3,4,5,6,7,8,9,10"])
        .env("UALG_WORKERS", workers.to_string())
        .output()
        .expect("ualg runs");
    out.stdout
}

#[test]
fn acceptance_criteria() {
    let mut failures = Vec::new();
    for id in 1..=10 {
        let start = Instant::now();
        let outcome = run_criterion(id).expect("criteria 1 to 10 run in process");
        let elapsed = start.elapsed();
        let in_time = budget(id).is_none_or(|b| elapsed <= b);
        let mut detail = outcome.detail.clone();
        if !in_time {
            detail.push_str(&format!("; over the {:?} budget", budget(id).unwrap()));
        }
        let passed = outcome.passed && in_time;
        report(id, passed, elapsed, &detail);
        if !passed {
            failures.push(id);
        }
    }

    let start = Instant::now();
    let runs: Vec<Vec<u8>> = DETERMINISM_WORKERS.iter().map(|&w| selftest_bytes(w)).collect();
    let identical = runs.windows(2).all(|p| p[0] == p[1]) && !runs[0].is_empty();
    let detail = format!(
        "selftest under {:?} workers printed {} bytes, {}",
        DETERMINISM_WORKERS,
        runs[0].len(),
        if identical { "identical" } else { "different" }
    );
    report(11, identical, start.elapsed(), &detail);
    if !identical {
        failures.push(11);
    }

    assert!(failures.is_empty(), "failed criteria: {failures:?}");
}
