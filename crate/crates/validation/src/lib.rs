//! Scorecard for acceptance runs: each criterion collects named checks and
//! reports a single pass/fail line.

use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub label: String,
    pub pass: bool,
    pub detail: String,
}

/// Checks gathered for one numbered criterion.
#[derive(Debug)]
pub struct Criterion {
    pub id: u32,
    pub title: String,
    pub checks: Vec<Check>,
    started: Instant,
}

impl Criterion {
    pub fn new(id: u32, title: impl Into<String>) -> Self {
        Criterion { id, title: title.into(), checks: Vec::new(), started: Instant::now() }
    }

    pub fn check(&mut self, label: impl Into<String>, pass: bool, detail: impl Into<String>) -> bool {
        self.checks.push(Check { label: label.into(), pass, detail: detail.into() });
        pass
    }

    /// `value <= limit`; NaN fails.
    pub fn at_most(&mut self, label: impl Into<String>, value: f64, limit: f64) -> bool {
        self.check(label, value <= limit, format!("{value:.4e} <= {limit:.1e}"))
    }

    /// `value >= limit`; NaN fails.
    pub fn at_least(&mut self, label: impl Into<String>, value: f64, limit: f64) -> bool {
        self.check(label, value >= limit, format!("{value:.4e} >= {limit:.1e}"))
    }

    /// `|value - target| <= tol`.
    pub fn near(&mut self, label: impl Into<String>, value: f64, target: f64, tol: f64) -> bool {
        self.check(label, (value - target).abs() <= tol, format!("{value:.10e} vs {target:.10e} +- {tol:.1e}"))
    }

    pub fn elapsed(&self) -> Duration {
        self.started.elapsed()
    }

    /// Wall time since the criterion started, against a budget.
    pub fn within_budget(&mut self, budget: Duration) -> bool {
        let t = self.elapsed();
        self.check("runtime", t <= budget, format!("{:.1} s <= {} s", t.as_secs_f64(), budget.as_secs()))
    }

    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.pass)
    }

    pub fn line(&self) -> String {
        let body: Vec<String> = self
            .checks
            .iter()
            .map(|c| format!("{} {} [{}]", c.label, c.detail, if c.pass { "ok" } else { "FAILED" }))
            .collect();
        format!(
            "[{}] criterion {} ({}, {:.1} s): {}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.elapsed().as_secs_f64(),
            body.join("; ")
        )
    }
}

/// Runs criteria in order and keeps their verdicts.
#[derive(Debug, Default)]
pub struct Scorecard {
    pub verdicts: Vec<(u32, bool)>,
    selected: Vec<u32>,
}

impl Scorecard {
    /// Only criteria whose ids appear in `selected` run; all run when empty.
    pub fn new(selected: Vec<u32>) -> Self {
        Scorecard { verdicts: Vec::new(), selected }
    }

    /// Run one criterion; a panic inside `body` counts as a failed check.
    pub fn run(&mut self, id: u32, title: &str, body: impl FnOnce(&mut Criterion)) {
        if !self.selected.is_empty() && !self.selected.contains(&id) {
            return;
        }
        let mut c = Criterion::new(id, title);
        let outcome = panic::catch_unwind(AssertUnwindSafe(|| body(&mut c)));
        if let Err(e) = outcome {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            c.check("panic", false, msg);
        }
        println!("{}", c.line());
        self.verdicts.push((id, c.passed()));
    }

    pub fn all_passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.1)
    }

    pub fn summary(&self) -> String {
        let passed = self.verdicts.iter().filter(|v| v.1).count();
        let failed: Vec<String> = self.verdicts.iter().filter(|v| !v.1).map(|v| v.0.to_string()).collect();
        if failed.is_empty() {
            format!("acceptance: {passed}/{} criteria passed", self.verdicts.len())
        } else {
            format!("acceptance: {passed}/{} criteria passed; failed: {}", self.verdicts.len(), failed.join(", "))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_needs_every_check() {
        let mut c = Criterion::new(1, "demo");
        assert!(!c.passed());
        c.at_most("a", 1.0, 2.0);
        assert!(c.passed());
        c.at_least("b", f64::NAN, 0.0);
        assert!(!c.passed());
        assert!(c.line().starts_with("[FAIL] criterion 1 (demo"));
    }

    #[test]
    fn panics_become_failures() {
        let mut s = Scorecard::new(Vec::new());
        s.run(2, "boom", |_| panic!("broken"));
        s.run(3, "fine", |c| {
            c.near("x", 1.0, 1.0, 0.0);
        });
        assert_eq!(s.verdicts, vec![(2, false), (3, true)]);
        assert!(s.summary().contains("failed: 2"));
    }

    #[test]
    fn selection_skips_others() {
        let mut s = Scorecard::new(vec![3]);
        s.run(1, "skipped", |c| {
            c.check("x", false, "");
        });
        s.run(3, "kept", |c| {
            c.check("x", true, "");
        });
        assert_eq!(s.verdicts, vec![(3, true)]);
    }
}
