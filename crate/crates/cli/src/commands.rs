use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{SecondsFormat, Utc};

use gi_core::config::{load_config, ExperimentConfig, ProviderSource};
use gi_core::engine::{minimize_patch, Engine, LlmOperator};
use gi_core::llm::{locate_function, CompletionProvider, HttpProvider, MockProvider, RetryPolicy, API_KEY_ENV};
use gi_core::report::{BestRecord, ProviderRecord, RunReport};
use gi_core::{apply, segment, FitnessOrder, FitnessReport, Harness, HarnessConfig, Objective, Patch, RngStream, SourceUnit};

use crate::{CliError, EvalArgs, MinimizeArgs, RunArgs};

/// Environment variable overriding the number of evaluation workers.
pub const WORKERS_ENV: &str = "GI_WORKERS";

/// RNG stream the evolutionary loop draws from.
const EVOLUTION_STREAM: &str = "evolution";

pub struct RunOutput {
    pub dir: PathBuf,
    pub report: RunReport,
    pub best_source: String,
    /// Human-readable progress table.
    pub summary: String,
}

pub fn workers_from_env() -> Option<usize> {
    std::env::var(WORKERS_ENV).ok()?.trim().parse().ok().filter(|&n| n > 0)
}

fn read_text(path: &Path, what: &str) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {what} {}: {e}", path.display())))
}

fn load_unit(exp: &ExperimentConfig, path: &Path) -> Result<SourceUnit, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Input(format!("cannot read target {}: {e}", path.display())))?;
    segment(&bytes, &exp.profile).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn build_harness(exp: &ExperimentConfig) -> Harness {
    let mut config = HarnessConfig::new(
        exp.profile.clone(),
        &exp.entry_function,
        exp.tests.clone(),
        exp.workload.clone(),
        exp.evolution.objective,
    );
    if let Some(r) = exp.repeats {
        match exp.evolution.objective {
            Objective::Time => config.time_repeats = r,
            Objective::Memory => config.memory_repeats = r,
        }
    }
    if let Some(w) = workers_from_env() {
        config.workers = w;
    }
    Harness::system(config)
}

fn build_provider(exp: &ExperimentConfig) -> Result<Option<Box<dyn CompletionProvider>>, CliError> {
    Ok(match &exp.provider.source {
        ProviderSource::None => None,
        ProviderSource::Mock(path) => {
            let json = read_text(path, "mock completions")?;
            let mock = MockProvider::from_json(&json)
                .map_err(|e| CliError::Input(format!("mock completions {}: {e}", path.display())))?;
            Some(Box::new(mock))
        }
        ProviderSource::Http {
            endpoint,
            requests_per_minute,
            retry_attempts,
        } => {
            let mut retry = RetryPolicy::default();
            if let Some(n) = retry_attempts {
                retry.attempts = (*n).max(1);
            }
            let http = HttpProvider::new(endpoint, &exp.provider.params.model)
                .with_retry(retry)
                .with_rate_limit(*requests_per_minute)
                .with_api_key(std::env::var(API_KEY_ENV).ok());
            Some(Box::new(http))
        }
    })
}

fn baseline_report(harness: &mut Harness, unit: &SourceUnit) -> Result<Arc<FitnessReport>, CliError> {
    let baseline = harness.calibrate(unit.text())?;
    if !baseline.all_passed() {
        return Err(CliError::Input(format!(
            "the unmodified target passes {}/{} tests",
            baseline.tests_passed, baseline.tests_total
        )));
    }
    Ok(baseline)
}

fn timestamp() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|source| CliError::Output {
        path: path.to_path_buf(),
        source,
    })
}

pub fn cmd_run(args: &RunArgs) -> Result<RunOutput, CliError> {
    let started_at = timestamp();
    let run_id = uuid::Uuid::new_v4().to_string();
    let mut exp = load_config(&args.config)?;
    if let Some(seed) = args.seed {
        exp.evolution.seed = seed;
    }
    if let Some(mock) = &args.mock {
        exp.provider.source = ProviderSource::Mock(mock.clone());
    }
    let unit = load_unit(&exp, &exp.target_file)?;
    if locate_function(unit.text(), &exp.entry_function).is_none() {
        return Err(CliError::Input(format!(
            "function `{}` not found in {}",
            exp.entry_function,
            exp.target_file.display()
        )));
    }
    let provider = build_provider(&exp)?;

    let mut harness = build_harness(&exp);
    let baseline = baseline_report(&mut harness, &unit)?;

    let llm = provider.as_deref().map(|provider| LlmOperator {
        provider,
        params: exp.provider.params.clone(),
        entry: exp.entry_function.clone(),
    });
    let mut engine = Engine::new(&unit, &exp.evolution, &harness, &baseline, llm)?;
    let result = engine.run(&mut RngStream::new(exp.evolution.seed, EVOLUTION_STREAM))?;

    let best_source = apply(&unit, &result.best.patch).map_err(|e| CliError::Input(e.to_string()))?;
    let info = provider.as_deref().map(|p| p.info());
    let report = RunReport {
        run_id: run_id.clone(),
        started_at,
        finished_at: timestamp(),
        config: exp.evolution.clone(),
        baseline: (*baseline).clone(),
        best: BestRecord {
            patch: result.best.patch.clone(),
            fitness: result.best.fitness.as_deref().cloned().unwrap_or_else(|| (*baseline).clone()),
            minimized: result.minimized,
        },
        generations: result.history,
        lineage: result.lineage,
        provider: ProviderRecord {
            endpoint: info.as_ref().map_or_else(|| "none".into(), |i| i.endpoint.clone()),
            model: info.map_or_else(|| exp.provider.params.model.clone(), |i| i.model),
            parameters: exp.provider.params.clone(),
            calls: result.llm_calls,
        },
        measurement_method: harness.measurement_method(),
    };

    let dir = args.out.clone().unwrap_or_else(|| Path::new("runs").join(&run_id));
    fs::create_dir_all(&dir).map_err(|source| CliError::Output {
        path: dir.clone(),
        source,
    })?;
    write(&dir.join("report.json"), &report.to_json())?;
    write(&dir.join(format!("best.{}", exp.profile.extension)), &best_source)?;

    let summary = summarize(&report);
    Ok(RunOutput {
        dir,
        report,
        best_source,
        summary,
    })
}

fn summarize(report: &RunReport) -> String {
    let objective = report.config.objective;
    let fmt = |r: &FitnessReport| match r.metric(objective) {
        Some(v) if objective == Objective::Time => format!("{v:.2} ms"),
        Some(v) => format!("{:.1} MiB", v / (1024.0 * 1024.0)),
        None => "n/a".into(),
    };
    let mut out = format!("{:>4} {:>6} {:>6} {:>8}  best\n", "gen", "evals", "hits", "invalid");
    for g in &report.generations {
        let best = match (g.best.time_ms, g.best.peak_mem_bytes, objective) {
            (Some(t), _, Objective::Time) => format!("{t:.2} ms"),
            (_, Some(m), Objective::Memory) => format!("{:.1} MiB", m as f64 / (1024.0 * 1024.0)),
            _ => "n/a".into(),
        };
        out.push_str(&format!(
            "{:>4} {:>6} {:>6} {:>8}  {} ({}/{} tests, {} edits)\n",
            g.generation, g.evaluations, g.cache_hits, g.invalid, best, g.best.tests_passed, g.best.tests_total, g.best.patch_len
        ));
    }
    out.push_str(&format!(
        "baseline {} -> best {} with {} edit(s); {} provider call(s)",
        fmt(&report.baseline),
        fmt(&report.best.fitness),
        report.best.patch.len(),
        report.provider.calls
    ));
    out
}

pub fn cmd_eval(args: &EvalArgs) -> Result<FitnessReport, CliError> {
    let exp = load_config(&args.config)?;
    let unit = load_unit(&exp, &args.source)?;
    let mut harness = build_harness(&exp);
    let report = harness.calibrate(unit.text())?;
    Ok((*report).clone())
}

pub fn cmd_minimize(args: &MinimizeArgs) -> Result<Patch, CliError> {
    let exp = load_config(&args.config)?;
    let unit = load_unit(&exp, &exp.target_file)?;
    let json = read_text(&args.patch, "patch")?;
    let patch = Patch::from_json(&json).map_err(|e| CliError::Input(format!("{}: {e}", args.patch.display())))?;
    if patch.base_hash != unit.hash() {
        return Err(CliError::Input(format!(
            "patch base {} does not match {} ({})",
            patch.base_hash.short(),
            exp.target_file.display(),
            unit.hash().short()
        )));
    }
    let variant = apply(&unit, &patch).map_err(|e| CliError::Input(e.to_string()))?;

    let mut harness = build_harness(&exp);
    let baseline = baseline_report(&mut harness, &unit)?;
    let order = FitnessOrder::bucketed(
        exp.evolution.objective,
        baseline.metric(exp.evolution.objective),
        exp.evolution.metric_tolerance,
    );
    let (reference, _) = harness.evaluate(&variant)?;
    let (minimized, _) = minimize_patch(&unit, &patch, &reference, &harness, &order)?;
    if let Some(out) = &args.out {
        write(out, &minimized.to_json())?;
    }
    Ok(minimized)
}
