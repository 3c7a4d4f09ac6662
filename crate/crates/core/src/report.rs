//! The machine-readable record of one run.

use serde::{Deserialize, Serialize};

use crate::engine::{EvolutionConfig, GenerationStats, LineageRecord};
use crate::fitness::{FitnessOrder, FitnessReport};
use crate::llm::CompletionParams;
use crate::patch::Patch;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestRecord {
    pub patch: Patch,
    pub fitness: FitnessReport,
    pub minimized: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderRecord {
    /// Endpoint URL, or `"mock"` for replayed completions.
    pub endpoint: String,
    pub model: String,
    pub parameters: CompletionParams,
    pub calls: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub run_id: String,
    pub started_at: String,
    pub finished_at: String,
    pub config: EvolutionConfig,
    pub baseline: FitnessReport,
    pub best: BestRecord,
    pub generations: Vec<GenerationStats>,
    pub lineage: Vec<LineageRecord>,
    pub provider: ProviderRecord,
    pub measurement_method: String,
}

impl RunReport {
    /// True when the best variant passes every test and beats the baseline
    /// on the objective by more than the configured tolerance bucket.
    pub fn improved(&self) -> bool {
        let objective = self.config.objective;
        if !self.best.fitness.improves_on(&self.baseline, objective) {
            return false;
        }
        let order = FitnessOrder::bucketed(objective, self.baseline.metric(objective), self.config.metric_tolerance);
        order.metric_key(&self.best.fitness) < order.metric_key(&self.baseline)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
