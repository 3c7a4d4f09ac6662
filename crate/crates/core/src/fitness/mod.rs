//! Fitness: the syntax gate, the test gate, workload measurement and the
//! ordering that ranks the resulting reports.

mod harness;
mod runner;

pub use harness::{median, EvalLimits, Evaluation, Harness, HarnessConfig, HarnessError, TestResult};
pub use runner::{ExitKind, ProcessRunner, RunOutcome, RunnerError, SystemRunner};

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::digest::ContentHash;
use crate::objective::Objective;

/// One correctness check: run the entry point with `args`, compare stdout.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestCase {
    pub id: String,
    #[serde(default)]
    pub args: Vec<String>,
    /// Compared exactly after trimming trailing newlines. `None` only checks
    /// for a clean exit (used for the measurement workload).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_stdout: Option<String>,
    /// Explicit limit; when absent it is derived from the baseline run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timeout_ms: Option<u64>,
}

impl TestCase {
    pub fn new(id: &str, args: &[&str], expected: &str) -> Self {
        Self {
            id: id.to_string(),
            args: args.iter().map(|a| a.to_string()).collect(),
            expected_stdout: Some(expected.to_string()),
            timeout_ms: None,
        }
    }

    pub fn workload(args: &[&str]) -> Self {
        Self {
            id: "workload".to_string(),
            args: args.iter().map(|a| a.to_string()).collect(),
            expected_stdout: None,
            timeout_ms: None,
        }
    }

    pub fn matches(&self, stdout: &str) -> bool {
        match &self.expected_stdout {
            Some(expected) => normalize(stdout) == normalize(expected),
            None => true,
        }
    }
}

fn normalize(s: &str) -> &str {
    s.trim_end_matches(['\n', '\r'])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestStatus {
    Pass,
    Fail,
    Timeout,
    Crash,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub id: String,
    pub status: TestStatus,
}

/// Result of evaluating one variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitnessReport {
    /// Passed the syntax gate.
    pub valid: bool,
    pub tests_passed: usize,
    pub tests_total: usize,
    /// Median net wall-clock milliseconds on the workload.
    pub time_ms: Option<f64>,
    pub peak_mem_bytes: Option<u64>,
    pub measurement_method: String,
    pub variant_hash: ContentHash,
    #[serde(default)]
    pub test_outcomes: Vec<TestOutcome>,
}

impl FitnessReport {
    pub fn invalid(variant_hash: ContentHash, tests_total: usize, reason: &str) -> Self {
        Self {
            valid: false,
            tests_passed: 0,
            tests_total,
            time_ms: None,
            peak_mem_bytes: None,
            measurement_method: reason.to_string(),
            variant_hash,
            test_outcomes: Vec::new(),
        }
    }

    pub fn all_passed(&self) -> bool {
        self.valid && self.tests_passed == self.tests_total
    }

    /// Measured value for `objective`, if any.
    pub fn metric(&self, objective: Objective) -> Option<f64> {
        match objective {
            Objective::Time => self.time_ms,
            Objective::Memory => self.peak_mem_bytes.map(|b| b as f64),
        }
    }

    /// Strictly better objective value than `baseline` (raw values).
    pub fn improves_on(&self, baseline: &FitnessReport, objective: Objective) -> bool {
        if !self.all_passed() {
            return false;
        }
        match (self.metric(objective), baseline.metric(objective)) {
            (Some(v), Some(b)) => v < b,
            (Some(_), None) => true,
            _ => false,
        }
    }
}

/// Ranks reports: valid first, then passing every test, then more tests
/// passed, then the smaller objective value, then the shorter patch, then the
/// variant hash.
///
/// With a tolerance, objective values are compared in log-scale buckets
/// centred on a reference value, so measurements that differ by noise fall
/// into the same bucket and the comparison moves on to patch length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitnessOrder {
    pub objective: Objective,
    scale: Option<(f64, f64)>,
}

impl FitnessOrder {
    /// Raw metric comparison.
    pub fn exact(objective: Objective) -> Self {
        Self {
            objective,
            scale: None,
        }
    }

    /// Bucketed comparison relative to `reference` with relative width `tolerance`.
    pub fn bucketed(objective: Objective, reference: Option<f64>, tolerance: f64) -> Self {
        if tolerance <= 0.0 {
            return Self::exact(objective);
        }
        let reference = reference.filter(|r| *r > 0.0).unwrap_or(1.0);
        Self {
            objective,
            scale: Some((reference, (1.0 + tolerance).ln())),
        }
    }

    /// Comparable objective key; missing measurements sort last.
    pub fn metric_key(&self, report: &FitnessReport) -> f64 {
        let Some(value) = report.metric(self.objective) else {
            return f64::INFINITY;
        };
        match self.scale {
            None => value,
            Some(_) if value <= 0.0 => f64::NEG_INFINITY,
            Some((reference, step)) => ((value / reference).ln() / step).round(),
        }
    }

    /// Compares everything except patch length and hash. `Less` means `a` is better.
    pub fn compare_fitness(&self, a: &FitnessReport, b: &FitnessReport) -> Ordering {
        b.valid
            .cmp(&a.valid)
            .then(b.all_passed().cmp(&a.all_passed()))
            .then(b.tests_passed.cmp(&a.tests_passed))
            .then(self.metric_key(a).total_cmp(&self.metric_key(b)))
    }

    /// Full total preorder. `Less` means `a` is preferred.
    pub fn compare(&self, a: &FitnessReport, b: &FitnessReport, len_a: usize, len_b: usize) -> Ordering {
        self.compare_fitness(a, b)
            .then(len_a.cmp(&len_b))
            .then(a.variant_hash.cmp(&b.variant_hash))
    }
}

/// Exact-metric ordering; `Less` means `a` is preferred.
pub fn compare(
    a: &FitnessReport,
    b: &FitnessReport,
    objective: Objective,
    patch_len_a: usize,
    patch_len_b: usize,
) -> Ordering {
    FitnessOrder::exact(objective).compare(a, b, patch_len_a, patch_len_b)
}
