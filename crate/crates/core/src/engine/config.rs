use serde::{Deserialize, Serialize};

use crate::objective::Objective;

/// Loop parameters for one evolutionary run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionConfig {
    #[serde(default = "default_objective")]
    pub objective: Objective,
    #[serde(default = "default_population")]
    pub population_size: usize,
    #[serde(default = "default_generations")]
    pub max_generations: usize,
    #[serde(default = "default_tournament_k")]
    pub tournament_k: usize,
    #[serde(default = "default_elitism")]
    pub elitism: usize,
    #[serde(default = "default_p_llm")]
    pub p_llm: f64,
    #[serde(default = "default_p_crossover")]
    pub p_crossover: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget_wall_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plateau_generations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub llm_call_budget: Option<usize>,
    /// Relative width of the buckets objective values are compared in;
    /// 0 compares raw measurements.
    #[serde(default = "default_metric_tolerance")]
    pub metric_tolerance: f64,
}

fn default_objective() -> Objective {
    Objective::Time
}
fn default_population() -> usize {
    16
}
fn default_generations() -> usize {
    10
}
fn default_tournament_k() -> usize {
    2
}
fn default_elitism() -> usize {
    1
}
fn default_p_llm() -> f64 {
    0.2
}
fn default_p_crossover() -> f64 {
    0.5
}
fn default_metric_tolerance() -> f64 {
    0.2
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            objective: default_objective(),
            population_size: default_population(),
            max_generations: default_generations(),
            tournament_k: default_tournament_k(),
            elitism: default_elitism(),
            p_llm: default_p_llm(),
            p_crossover: default_p_crossover(),
            seed: 0,
            budget_wall_ms: None,
            plateau_generations: None,
            llm_call_budget: None,
            metric_tolerance: default_metric_tolerance(),
        }
    }
}

impl EvolutionConfig {
    /// Returns the offending field name and reason.
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        if self.population_size < 2 {
            return Err(("population_size", format!("must be at least 2, got {}", self.population_size)));
        }
        if self.max_generations < 1 {
            return Err(("max_generations", "must be at least 1".into()));
        }
        if self.tournament_k == 0 {
            return Err(("tournament_k", format!("must be at least 1, got {}", self.tournament_k)));
        }
        if self.elitism >= self.population_size {
            return Err((
                "elitism",
                format!("must be below population_size ({})", self.population_size),
            ));
        }
        for (name, p) in [("p_llm", self.p_llm), ("p_crossover", self.p_crossover)] {
            if !(0.0..=1.0).contains(&p) {
                return Err((name, format!("must lie in [0, 1], got {p}")));
            }
        }
        if self.metric_tolerance.is_nan() || self.metric_tolerance < 0.0 {
            return Err(("metric_tolerance", "must be non-negative".into()));
        }
        Ok(())
    }
}
