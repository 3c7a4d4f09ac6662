use gi_core::config::ConfigError;
use gi_core::engine::EngineError;
use gi_core::fitness::HarnessError;
use gi_core::llm::ProviderError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    /// Unusable input file or target program.
    #[error("{0}")]
    Input(String),
    #[error("toolchain: {0}")]
    Toolchain(String),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("cannot write {path}: {source}")]
    Output {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// 1 for configuration and input problems, 2 for toolchain and provider failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Input(_) | CliError::Output { .. } => 1,
            CliError::Toolchain(_) | CliError::Provider(_) => 2,
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Runner(_) | HarnessError::Sandbox(_) => {
                CliError::Toolchain(e.to_string())
            }
            HarnessError::TimeoutExceeded { .. } | HarnessError::WorkloadFailed(_) => {
                CliError::Input(format!("baseline workload: {e}"))
            }
        }
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Harness(h) => h.into(),
            EngineError::Provider(p) => p.into(),
            EngineError::Config { .. } | EngineError::EmptyUnit => CliError::Input(e.to_string()),
            EngineError::UnevaluatedCandidate(_) | EngineError::EmptyPopulation => CliError::Toolchain(e.to_string()),
        }
    }
}
