//! Invariant suites run by the `check` command. Every module listed in
//! [`REQUIRED_MODULES`] must contribute at least one suite; the registry
//! refuses to run otherwise.

mod bco;
mod control;
mod geometry;
mod harness;
mod losses;

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const REQUIRED_MODULES: [&str; 5] = ["geometry", "losses", "bco", "control", "harness"];

/// `Ok(detail)` on success, `Err(detail)` on failure.
pub type CheckFn = fn(u64) -> std::result::Result<String, String>;

pub trait InvariantSuite: Send + Sync {
    fn module(&self) -> &'static str;
    fn name(&self) -> &'static str;
    fn checks(&self) -> Vec<(&'static str, CheckFn)>;
}

/// Suite made of plain functions.
pub struct FnSuite {
    pub module: &'static str,
    pub name: &'static str,
    pub checks: Vec<(&'static str, CheckFn)>,
}

impl InvariantSuite for FnSuite {
    fn module(&self) -> &'static str {
        self.module
    }
    fn name(&self) -> &'static str {
        self.name
    }
    fn checks(&self) -> Vec<(&'static str, CheckFn)> {
        self.checks.clone()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub module: String,
    pub suite: String,
    pub check: String,
    pub passed: bool,
    pub detail: String,
    /// Not serialized, so reports stay reproducible.
    #[serde(skip)]
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub seed: u64,
    pub outcomes: Vec<CheckOutcome>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.passed)
    }

    pub fn failures(&self) -> usize {
        self.outcomes.iter().filter(|o| !o.passed).count()
    }

    /// One row per check.
    pub fn table(&self) -> String {
        let width = self
            .outcomes
            .iter()
            .map(|o| o.module.len() + o.check.len() + 1)
            .max()
            .unwrap_or(0);
        let mut out = String::new();
        for o in &self.outcomes {
            let label = format!("{}/{}", o.module, o.check);
            let _ = writeln!(
                out,
                "{} {label:<width$}  {:>7.2}s  {}",
                if o.passed { "PASS" } else { "FAIL" },
                o.seconds,
                o.detail
            );
        }
        let _ = writeln!(out, "{} of {} checks passed", self.outcomes.len() - self.failures(), self.outcomes.len());
        out
    }
}

pub struct SuiteRegistry {
    suites: Vec<Box<dyn InvariantSuite>>,
}

impl Default for SuiteRegistry {
    fn default() -> Self {
        let mut r = SuiteRegistry::empty();
        r.register(Box::new(geometry::suite()));
        r.register(Box::new(losses::suite()));
        r.register(Box::new(bco::suite()));
        r.register(Box::new(control::suite()));
        r.register(Box::new(harness::suite()));
        r
    }
}

impl SuiteRegistry {
    pub fn empty() -> Self {
        SuiteRegistry { suites: Vec::new() }
    }

    pub fn register(&mut self, suite: Box<dyn InvariantSuite>) {
        self.suites.push(suite);
    }

    pub fn suites(&self) -> &[Box<dyn InvariantSuite>] {
        &self.suites
    }

    pub fn missing_modules(&self) -> Vec<&'static str> {
        REQUIRED_MODULES
            .into_iter()
            .filter(|m| !self.suites.iter().any(|s| s.module() == *m))
            .collect()
    }

    /// Runs every check; fails up front when a required module has no suite.
    pub fn run_all(&self, seed: u64) -> Result<CheckReport> {
        let missing = self.missing_modules();
        if !missing.is_empty() {
            return Err(Error::config("check", format!("no invariant suite registered for {}", missing.join(", "))));
        }
        let mut outcomes = Vec::new();
        for suite in &self.suites {
            for (name, check) in suite.checks() {
                let start = Instant::now();
                let result = check(seed);
                let (passed, detail) = match result {
                    Ok(d) => (true, d),
                    Err(d) => (false, d),
                };
                outcomes.push(CheckOutcome {
                    module: suite.module().to_string(),
                    suite: suite.name().to_string(),
                    check: name.to_string(),
                    passed,
                    detail,
                    seconds: start.elapsed().as_secs_f64(),
                });
            }
        }
        Ok(CheckReport { seed, outcomes })
    }
}

/// Turns a library error into a failed check.
pub(crate) fn fail<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}
