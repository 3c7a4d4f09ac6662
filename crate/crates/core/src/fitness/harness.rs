//! Evaluation of materialized variants: every run gets its own temporary
//! directory, reports are cached by variant hash.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use tempfile::TempDir;

use super::runner::{ExitKind, ProcessRunner, RunOutcome, RunnerError, SystemRunner};
use super::{FitnessReport, TestCase, TestOutcome, TestStatus};
use crate::digest::ContentHash;
use crate::objective::Objective;
use crate::profile::ToolchainProfile;

const BASELINE_TEST_TIMEOUT_MS: u64 = 30_000;
const BASELINE_WORKLOAD_TIMEOUT_MS: u64 = 120_000;
const MIN_TIMEOUT_MS: u64 = 1_000;

#[derive(Debug, Clone)]
pub struct HarnessConfig {
    pub profile: ToolchainProfile,
    /// Function the driver calls.
    pub entry: String,
    pub tests: Vec<TestCase>,
    /// Input on which time and memory are measured.
    pub workload: TestCase,
    pub objective: Objective,
    pub time_repeats: usize,
    pub memory_repeats: usize,
    pub workers: usize,
    /// Parent directory for per-run temp dirs; system temp dir if unset.
    pub temp_root: Option<PathBuf>,
}

impl HarnessConfig {
    pub fn new(profile: ToolchainProfile, entry: &str, tests: Vec<TestCase>, workload: TestCase, objective: Objective) -> Self {
        Self {
            profile,
            entry: entry.to_string(),
            tests,
            workload,
            objective,
            time_repeats: 5,
            memory_repeats: 1,
            workers: 1,
            temp_root: None,
        }
    }
}

/// Time limits in force for evaluations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalLimits {
    /// Applies to tests without an explicit `timeout_ms`.
    pub test_timeout_ms: u64,
    pub workload_timeout_ms: u64,
    pub syntax_timeout_ms: u64,
}

impl Default for EvalLimits {
    fn default() -> Self {
        Self {
            test_timeout_ms: BASELINE_TEST_TIMEOUT_MS,
            workload_timeout_ms: BASELINE_WORKLOAD_TIMEOUT_MS,
            syntax_timeout_ms: 30_000,
        }
    }
}

/// A report plus whether it came from the cache.
pub type Evaluation = Result<(Arc<FitnessReport>, bool), HarnessError>;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Runner(#[from] RunnerError),
    #[error("sandbox setup failed: {0}")]
    Sandbox(#[from] std::io::Error),
    #[error("workload exceeded its {timeout_ms} ms budget")]
    TimeoutExceeded { timeout_ms: u64 },
    #[error("workload did not exit cleanly: {0:?}")]
    WorkloadFailed(ExitKind),
}

impl HarnessError {
    /// Failures that mark a variant as unmeasurable rather than aborting.
    fn is_variant_fault(&self) -> bool {
        matches!(self, HarnessError::TimeoutExceeded { .. } | HarnessError::WorkloadFailed(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestResult {
    pub id: String,
    pub status: TestStatus,
    pub stdout: String,
    pub stderr: String,
    pub wall_ms: f64,
}

/// Median of a non-empty sample; mean of the middle pair for even sizes.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of empty sample");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        (v[mid - 1] + v[mid]) / 2.0
    }
}

pub struct Harness {
    config: HarnessConfig,
    runner: Box<dyn ProcessRunner>,
    limits: EvalLimits,
    cache: Mutex<HashMap<ContentHash, Arc<FitnessReport>>>,
    spawned: AtomicUsize,
}

impl Harness {
    pub fn new(config: HarnessConfig, runner: Box<dyn ProcessRunner>) -> Self {
        Self {
            config,
            runner,
            limits: EvalLimits::default(),
            cache: Mutex::new(HashMap::new()),
            spawned: AtomicUsize::new(0),
        }
    }

    pub fn system(config: HarnessConfig) -> Self {
        Self::new(config, Box::new(SystemRunner))
    }

    pub fn config(&self) -> &HarnessConfig {
        &self.config
    }

    pub fn limits(&self) -> &EvalLimits {
        &self.limits
    }

    pub fn set_limits(&mut self, limits: EvalLimits) {
        self.limits = limits;
    }

    /// Child processes started so far.
    pub fn processes_spawned(&self) -> usize {
        self.spawned.load(Ordering::SeqCst)
    }

    pub fn measurement_method(&self) -> String {
        let mut method = self.runner.method();
        if self.config.profile.subtract_startup {
            method.push_str("; minus median startup of interleaved empty runs");
        }
        method
    }

    pub fn cached(&self, hash: &ContentHash) -> Option<Arc<FitnessReport>> {
        self.cache.lock().unwrap_or_else(|e| e.into_inner()).get(hash).cloned()
    }

    fn sandbox(&self) -> std::io::Result<TempDir> {
        let mut builder = tempfile::Builder::new();
        builder.prefix("gi-eval-");
        match &self.config.temp_root {
            Some(root) => builder.tempdir_in(root),
            None => builder.tempdir(),
        }
    }

    fn spawn(&self, argv: &[String], dir: &Path, timeout_ms: u64) -> Result<RunOutcome, HarnessError> {
        self.spawned.fetch_add(1, Ordering::SeqCst);
        Ok(self.runner.run(argv, dir, Duration::from_millis(timeout_ms.max(1)))?)
    }

    fn write_variant(&self, dir: &Path, source: &str) -> std::io::Result<String> {
        let path = dir.join(format!("variant.{}", self.config.profile.extension));
        std::fs::write(&path, source)?;
        Ok(path.to_string_lossy().into_owned())
    }

    fn runnable(&self, variant: &str) -> String {
        format!("{variant}{}", self.config.profile.driver_for(&self.config.entry))
    }

    /// Runs the profile's checker on the variant; `true` on exit status 0.
    pub fn syntax_check(&self, variant: &str) -> Result<bool, HarnessError> {
        let dir = self.sandbox()?;
        let file = self.write_variant(dir.path(), variant)?;
        let argv = self.config.profile.syntax_command(&file);
        let out = self.spawn(&argv, dir.path(), self.limits.syntax_timeout_ms)?;
        Ok(out.exit == ExitKind::Success)
    }

    /// Each test runs in its own child process and temp dir.
    pub fn run_tests(&self, variant: &str, tests: &[TestCase]) -> Result<Vec<TestResult>, HarnessError> {
        let source = self.runnable(variant);
        tests
            .iter()
            .map(|test| {
                let dir = self.sandbox()?;
                let file = self.write_variant(dir.path(), &source)?;
                let argv = self.config.profile.run_command(&file, &test.args);
                let timeout = test.timeout_ms.unwrap_or(self.limits.test_timeout_ms);
                let out = self.spawn(&argv, dir.path(), timeout)?;
                let status = match out.exit {
                    ExitKind::Success if test.matches(&out.stdout) => TestStatus::Pass,
                    ExitKind::Success => TestStatus::Fail,
                    ExitKind::Timeout => TestStatus::Timeout,
                    ExitKind::Failure(_) | ExitKind::Signal(_) => TestStatus::Crash,
                };
                Ok(TestResult {
                    id: test.id.clone(),
                    status,
                    stdout: out.stdout,
                    stderr: out.stderr,
                    wall_ms: out.wall_ms,
                })
            })
            .collect()
    }

    /// Runs the workload `repeats` times. With `startup` set, each run is
    /// preceded by an empty program under the same command, whose wall times
    /// are returned alongside.
    fn run_workload(
        &self,
        variant: &str,
        workload: &TestCase,
        repeats: usize,
        timeout_ms: u64,
        startup: bool,
    ) -> Result<(Vec<RunOutcome>, Vec<f64>), HarnessError> {
        let dir = self.sandbox()?;
        let file = self.write_variant(dir.path(), &self.runnable(variant))?;
        let argv = self.config.profile.run_command(&file, &workload.args);
        let empty_argv = if startup {
            let empty = dir.path().join(format!("empty.{}", self.config.profile.extension));
            std::fs::write(&empty, "")?;
            Some(self.config.profile.run_command(&empty.to_string_lossy(), &workload.args))
        } else {
            None
        };
        let mut outcomes = Vec::with_capacity(repeats);
        let mut startups = Vec::new();
        for _ in 0..repeats.max(1) {
            if let Some(empty_argv) = &empty_argv {
                startups.push(self.spawn(empty_argv, dir.path(), BASELINE_TEST_TIMEOUT_MS)?.wall_ms);
            }
            let out = self.spawn(&argv, dir.path(), timeout_ms)?;
            match out.exit {
                ExitKind::Success => outcomes.push(out),
                ExitKind::Timeout => return Err(HarnessError::TimeoutExceeded { timeout_ms }),
                other => return Err(HarnessError::WorkloadFailed(other)),
            }
        }
        Ok((outcomes, startups))
    }

    fn workload_timeout(&self, workload: &TestCase) -> u64 {
        workload.timeout_ms.unwrap_or(self.limits.workload_timeout_ms)
    }

    /// Median wall-clock milliseconds over `repeats` runs, net of startup
    /// when the profile asks for it.
    pub fn measure_time(&self, variant: &str, workload: &TestCase, repeats: usize) -> Result<f64, HarnessError> {
        let subtract = self.config.profile.subtract_startup;
        let (runs, startups) = self.run_workload(variant, workload, repeats, self.workload_timeout(workload), subtract)?;
        Ok(net_time(&runs, &startups))
    }

    /// Peak resident bytes of one workload run.
    pub fn measure_memory(&self, variant: &str, workload: &TestCase) -> Result<u64, HarnessError> {
        let (runs, _) = self.run_workload(variant, workload, 1, self.workload_timeout(workload), false)?;
        runs[0].peak_rss_bytes.ok_or(HarnessError::Runner(RunnerError::UnsupportedPlatform))
    }

    fn peak(runs: &[RunOutcome]) -> Option<u64> {
        let peaks: Vec<f64> = runs.iter().filter_map(|r| r.peak_rss_bytes).map(|b| b as f64).collect();
        (!peaks.is_empty()).then(|| median(&peaks) as u64)
    }

    fn repeats(&self) -> usize {
        match self.config.objective {
            Objective::Time => self.config.time_repeats,
            Objective::Memory => self.config.memory_repeats,
        }
    }

    /// Gate, test and measure without touching the cache. Also returns the
    /// slowest test wall time and the raw workload median, used to derive limits.
    fn evaluate_fresh(&self, variant: &str, hash: ContentHash, workload_timeout_ms: u64) -> Result<(FitnessReport, f64, Option<f64>), HarnessError> {
        let total = self.config.tests.len();
        if !self.syntax_check(variant)? {
            return Ok((FitnessReport::invalid(hash, total, "rejected by syntax gate"), 0.0, None));
        }
        let results = self.run_tests(variant, &self.config.tests)?;
        let slowest = results.iter().map(|r| r.wall_ms).fold(0.0, f64::max);
        let mut report = FitnessReport {
            valid: true,
            tests_passed: results.iter().filter(|r| r.status == TestStatus::Pass).count(),
            tests_total: total,
            time_ms: None,
            peak_mem_bytes: None,
            measurement_method: "not measured: tests failed".into(),
            variant_hash: hash,
            test_outcomes: results
                .iter()
                .map(|r| TestOutcome {
                    id: r.id.clone(),
                    status: r.status,
                })
                .collect(),
        };
        if !report.all_passed() {
            return Ok((report, slowest, None));
        }
        let subtract = self.config.profile.subtract_startup && self.config.objective == Objective::Time;
        match self.run_workload(variant, &self.config.workload, self.repeats(), workload_timeout_ms, subtract) {
            Ok((runs, startups)) => {
                let walls: Vec<f64> = runs.iter().map(|r| r.wall_ms).collect();
                report.time_ms = Some(net_time(&runs, &startups));
                report.peak_mem_bytes = Self::peak(&runs);
                report.measurement_method = self.measurement_method();
                Ok((report, slowest, Some(median(&walls))))
            }
            Err(e) if e.is_variant_fault() => {
                report.measurement_method = format!("not measured: {e}");
                Ok((report, slowest, None))
            }
            Err(e) => Err(e),
        }
    }

    /// Evaluates a variant, consulting the cache first. The flag is `true`
    /// on a cache hit.
    pub fn evaluate(&self, variant: &str) -> Evaluation {
        let hash = ContentHash::of(variant);
        if let Some(hit) = self.cached(&hash) {
            return Ok((hit, true));
        }
        let timeout = self.workload_timeout(&self.config.workload);
        let (report, _, _) = self.evaluate_fresh(variant, hash, timeout)?;
        Ok((self.store(hash, report), false))
    }

    fn store(&self, hash: ContentHash, report: FitnessReport) -> Arc<FitnessReport> {
        let mut cache = self.cache.lock().unwrap_or_else(|e| e.into_inner());
        cache.entry(hash).or_insert_with(|| Arc::new(report)).clone()
    }

    /// Evaluates distinct variants on up to `workers` threads. Results are in
    /// input order; duplicates within the batch are evaluated once.
    pub fn evaluate_many(&self, variants: &[String]) -> Vec<Evaluation> {
        let workers = self.config.workers.max(1);
        if workers == 1 || variants.len() < 2 {
            return variants.iter().map(|v| self.evaluate(v)).collect();
        }
        let mut first_seen: HashMap<ContentHash, usize> = HashMap::new();
        let mut unique: Vec<usize> = Vec::new();
        for (i, v) in variants.iter().enumerate() {
            first_seen.entry(ContentHash::of(v)).or_insert_with(|| {
                unique.push(i);
                i
            });
        }
        let next = AtomicUsize::new(0);
        let slots: Vec<Mutex<Option<Evaluation>>> =
            variants.iter().map(|_| Mutex::new(None)).collect();
        std::thread::scope(|scope| {
            for _ in 0..workers.min(unique.len()) {
                scope.spawn(|| loop {
                    let k = next.fetch_add(1, Ordering::SeqCst);
                    let Some(&i) = unique.get(k) else { break };
                    *slots[i].lock().unwrap() = Some(self.evaluate(&variants[i]));
                });
            }
        });
        let mut out: Vec<Option<Evaluation>> =
            slots.into_iter().map(|m| m.into_inner().unwrap()).collect();
        (0..variants.len())
            .map(|i| {
                let first = first_seen[&ContentHash::of(&variants[i])];
                if first == i {
                    out[i].take().expect("evaluated")
                } else {
                    let hash = ContentHash::of(&variants[i]);
                    self.cached(&hash)
                        .map(|r| (r, true))
                        .ok_or_else(|| HarnessError::Sandbox(std::io::Error::other("duplicate of a failed evaluation")))
                }
            })
            .collect()
    }

    /// Evaluates the unmodified program under generous limits, then derives
    /// the limits for everything that follows: per-test timeout `max(1 s, 10 x slowest baseline test)` and workload
    /// budget `max(1 s, 10 x baseline workload median)`.
    pub fn calibrate(&mut self, baseline: &str) -> Result<Arc<FitnessReport>, HarnessError> {
        self.limits = EvalLimits::default();
        let hash = ContentHash::of(baseline);
        let timeout = self.config.workload.timeout_ms.unwrap_or(BASELINE_WORKLOAD_TIMEOUT_MS);
        let (report, slowest_test, workload_raw) = self.evaluate_fresh(baseline, hash, timeout)?;
        self.limits.test_timeout_ms = derived_timeout(slowest_test);
        self.limits.workload_timeout_ms = workload_raw.map_or(BASELINE_WORKLOAD_TIMEOUT_MS, derived_timeout);
        let report = Arc::new(report);
        self.cache
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .insert(hash, report.clone());
        Ok(report)
    }
}

fn net_time(runs: &[RunOutcome], startups: &[f64]) -> f64 {
    let walls: Vec<f64> = runs.iter().map(|r| r.wall_ms).collect();
    let startup = if startups.is_empty() { 0.0 } else { median(startups) };
    (median(&walls) - startup).max(0.0)
}

fn derived_timeout(observed_ms: f64) -> u64 {
    MIN_TIMEOUT_MS.max((observed_ms * 10.0).ceil() as u64)
}
