//! Patch-based genetic improvement of small programs.
//!
//! Variants of a target program are represented as edit lists over its
//! statements. Mutants come from classic statement operators and from a
//! language model prompted with the improvement objective; every variant is
//! gated by a syntax check and a test suite before its runtime or peak memory
//! counts as fitness.

pub mod config;
pub mod digest;
pub mod engine;
pub mod fitness;
pub mod fixtures;
pub mod llm;
pub mod minimize;
pub mod mutation;
pub mod objective;
pub mod patch;
pub mod profile;
pub mod report;
pub mod source;

pub use config::{load_config, ConfigError, ExperimentConfig};
pub use digest::ContentHash;
pub use minimize::minimize;
pub use mutation::{crossover, Draw, RngStream, ScriptedDraws};
pub use patch::{apply, EditOp, Patch, Provenance};
pub use profile::ToolchainProfile;
pub use source::{segment, SourceUnit, Span};
pub use objective::Objective;
pub use fitness::{compare, FitnessOrder, FitnessReport, Harness, HarnessConfig, TestCase};
pub use engine::{Candidate, Engine, EvolutionConfig, GenerationStats, Operator};
pub use report::RunReport;
