//! Experiment configuration files.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::engine::EvolutionConfig;
use crate::fitness::TestCase;
use crate::llm::CompletionParams;
use crate::objective::Objective;
use crate::profile::ToolchainProfile;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid value for `{field}`: {reason}")]
    Validation { field: String, reason: String },
}

impl ConfigError {
    fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    target: RawTarget,
    objective: RawObjective,
    #[serde(default)]
    workload: Option<RawWorkload>,
    #[serde(default)]
    evolution: Option<toml::Table>,
    #[serde(default)]
    provider: Option<RawProvider>,
    #[serde(default)]
    tests: Vec<TestCase>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTarget {
    file: PathBuf,
    entry_function: String,
    #[serde(default)]
    profile: Option<ToolchainProfile>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawObjective {
    name: String,
    #[serde(default)]
    repeats: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWorkload {
    args: Vec<String>,
    #[serde(default)]
    timeout_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
struct RawProvider {
    #[serde(default)]
    endpoint: Option<String>,
    #[serde(default)]
    mock: Option<PathBuf>,
    #[serde(default)]
    requests_per_minute: Option<u32>,
    #[serde(default)]
    retry_attempts: Option<u32>,
    #[serde(flatten)]
    params: CompletionParams,
}

/// Where mutation proposals from the language model come from.
#[derive(Debug, Clone, PartialEq)]
pub enum ProviderSource {
    /// Replay file mapping prompt digests to completions.
    Mock(PathBuf),
    Http {
        endpoint: String,
        requests_per_minute: Option<u32>,
        retry_attempts: Option<u32>,
    },
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProviderConfig {
    pub source: ProviderSource,
    pub params: CompletionParams,
}

/// A fully resolved experiment.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    /// Directory relative paths in the file were resolved against.
    pub base_dir: PathBuf,
    pub target_file: PathBuf,
    pub entry_function: String,
    pub profile: ToolchainProfile,
    pub evolution: EvolutionConfig,
    pub repeats: Option<usize>,
    pub tests: Vec<TestCase>,
    pub workload: TestCase,
    pub provider: ProviderConfig,
}

/// Reads and validates a TOML experiment file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_config(&text, path, &base_dir)
}

/// Parses config text; `origin` only labels error messages.
pub fn parse_config(text: &str, origin: &Path, base_dir: &Path) -> Result<ExperimentConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((1, 1), |s| line_col(text, s.start));
        ConfigError::Parse {
            path: origin.to_path_buf(),
            line,
            column,
            message: e.message().to_string(),
        }
    })?;

    let objective: Objective = raw
        .objective
        .name
        .parse()
        .map_err(|e: String| ConfigError::invalid("objective.name", e))?;

    let mut evolution = raw.evolution.unwrap_or_default();
    if evolution.contains_key("objective") {
        return Err(ConfigError::invalid("evolution.objective", "set the objective in [objective]"));
    }
    evolution.insert("objective".into(), toml::Value::String(objective.name().into()));
    let evolution = EvolutionConfig::deserialize(toml::Value::Table(evolution))
        .map_err(|e| ConfigError::invalid("evolution", e.message().to_string()))?;
    evolution
        .validate()
        .map_err(|(field, reason)| ConfigError::invalid(format!("evolution.{field}"), reason))?;

    if raw.objective.repeats == Some(0) {
        return Err(ConfigError::invalid("objective.repeats", "must be at least 1"));
    }
    let profile = raw.target.profile.unwrap_or_default();
    profile
        .validate()
        .map_err(|reason| ConfigError::invalid("target.profile", reason))?;
    if raw.target.entry_function.trim().is_empty() {
        return Err(ConfigError::invalid("target.entry_function", "must not be empty"));
    }
    if raw.tests.is_empty() {
        return Err(ConfigError::invalid("tests", "at least one [[tests]] entry is required"));
    }
    for (i, t) in raw.tests.iter().enumerate() {
        if t.expected_stdout.is_none() {
            return Err(ConfigError::invalid(format!("tests[{i}].expected_stdout"), "missing"));
        }
    }

    let workload = match raw.workload {
        Some(w) => TestCase {
            id: "workload".into(),
            args: w.args,
            expected_stdout: None,
            timeout_ms: w.timeout_ms,
        },
        None => {
            let first = &raw.tests[0];
            TestCase {
                id: "workload".into(),
                args: first.args.clone(),
                expected_stdout: None,
                timeout_ms: first.timeout_ms,
            }
        }
    };

    let provider = match raw.provider {
        None => ProviderConfig {
            source: ProviderSource::None,
            params: CompletionParams::default(),
        },
        Some(p) => {
            p.params
                .validate()
                .map_err(|reason| ConfigError::invalid("provider", reason))?;
            let source = match (p.mock, p.endpoint) {
                (Some(_), Some(_)) => {
                    return Err(ConfigError::invalid("provider", "set either `mock` or `endpoint`, not both"));
                }
                (Some(mock), None) => ProviderSource::Mock(base_dir.join(mock)),
                (None, Some(endpoint)) => ProviderSource::Http {
                    endpoint,
                    requests_per_minute: p.requests_per_minute,
                    retry_attempts: p.retry_attempts,
                },
                (None, None) => ProviderSource::None,
            };
            ProviderConfig { source, params: p.params }
        }
    };
    if evolution.p_llm > 0.0 && provider.source == ProviderSource::None {
        return Err(ConfigError::invalid("provider", "p_llm > 0 needs a mock or endpoint"));
    }

    Ok(ExperimentConfig {
        base_dir: base_dir.to_path_buf(),
        target_file: base_dir.join(raw.target.file),
        entry_function: raw.target.entry_function,
        profile,
        evolution,
        repeats: raw.objective.repeats,
        tests: raw.tests,
        workload,
        provider,
    })
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[target]
file = "fib.py"
entry_function = "fibonacci"

[objective]
name = "time"

[[tests]]
id = "fib10"
args = ["10"]
expected_stdout = "55"
"#;

    fn parse(text: &str) -> Result<ExperimentConfig, ConfigError> {
        parse_config(text, Path::new("exp.toml"), Path::new("/work"))
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse(&MINIMAL.replace("[[tests]]", "[evolution]\np_llm = 0.0\n\n[[tests]]")).unwrap();
        assert_eq!(c.evolution.population_size, 16);
        assert_eq!(c.evolution.max_generations, 10);
        assert_eq!(c.evolution.objective, Objective::Time);
        assert_eq!(c.target_file, Path::new("/work/fib.py"));
        assert_eq!(c.workload.args, vec!["10"]);
        assert_eq!(c.profile, ToolchainProfile::python());
    }

    #[test]
    fn default_p_llm_requires_a_provider() {
        let err = parse(MINIMAL).unwrap_err();
        assert!(matches!(err, ConfigError::Validation { ref field, .. } if field == "provider"), "{err}");
    }

    #[test]
    fn energy_objective_is_rejected() {
        let err = parse(&MINIMAL.replace("\"time\"", "\"energy\"")).unwrap_err();
        assert!(matches!(err, ConfigError::Validation { ref field, .. } if field == "objective.name"), "{err}");
    }

    #[test]
    fn population_of_one_is_rejected() {
        let text = MINIMAL.replace("[[tests]]", "[evolution]\npopulation_size = 1\np_llm = 0.0\n\n[[tests]]");
        let err = parse(&text).unwrap_err();
        assert!(
            matches!(err, ConfigError::Validation { ref field, .. } if field == "evolution.population_size"),
            "{err}"
        );
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let text = MINIMAL.replace("name = \"time\"", "name = time");
        match parse(&text).unwrap_err() {
            ConfigError::Parse { line, .. } => assert_eq!(line, 7),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn provider_mock_path_is_relative_to_config() {
        let text = format!("{MINIMAL}\n[provider]\nmock = \"m.json\"\ntemperature = 0.5\n");
        let c = parse(&text).unwrap();
        assert_eq!(c.provider.source, ProviderSource::Mock(PathBuf::from("/work/m.json")));
        assert_eq!(c.provider.params.temperature, 0.5);
        assert_eq!(c.provider.params.max_tokens, 512);
    }

    #[test]
    fn unknown_keys_are_errors() {
        let text = MINIMAL.replace("[objective]", "[objective]\nspeed = 3");
        assert!(matches!(parse(&text).unwrap_err(), ConfigError::Parse { .. }));
    }
}
