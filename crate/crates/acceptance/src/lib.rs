//! Reporting for the acceptance suite in `tests/acceptance.rs`.
//!
//! Each check prints one `PASS` or `FAIL` line; the run exits non-zero if
//! any check failed.

use std::time::{Duration, Instant};

#[derive(Debug)]
pub struct Outcome {
    pub pass: bool,
    pub detail: String,
}

impl Outcome {
    pub fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Default)]
pub struct Suite {
    failed: Vec<String>,
    total: usize,
}

impl Suite {
    pub fn new() -> Self {
        Self::default()
    }

    /// Run `check`, enforcing `budget` on its wall time.
    pub fn check(
        &mut self,
        id: &str,
        title: &str,
        budget: Option<Duration>,
        check: impl FnOnce() -> Outcome,
    ) {
        let start = Instant::now();
        let mut outcome = check();
        let elapsed = start.elapsed();
        if let Some(limit) = budget {
            if elapsed > limit {
                outcome.pass = false;
                outcome
                    .detail
                    .push_str(&format!("; over time budget {limit:?}"));
            }
        }
        let tag = if outcome.pass { "PASS" } else { "FAIL" };
        println!(
            "{tag} [{id}] {title}: {} ({:.1}s)",
            outcome.detail,
            elapsed.as_secs_f64()
        );
        self.total += 1;
        if !outcome.pass {
            self.failed.push(id.to_string());
        }
    }

    /// Print the summary and exit with status 1 on any failure.
    pub fn finish(self) {
        println!(
            "\nacceptance: {} passed, {} failed{}",
            self.total - self.failed.len(),
            self.failed.len(),
            if self.failed.is_empty() {
                String::new()
            } else {
                format!(" ({})", self.failed.join(", "))
            }
        );
        if !self.failed.is_empty() {
            std::process::exit(1);
        }
    }
}
