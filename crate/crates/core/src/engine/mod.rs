//! The generational loop: seed, select, vary, evaluate, repeat.

mod config;

pub use config::EvolutionConfig;

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::digest::ContentHash;
use crate::fitness::{Evaluation, FitnessOrder, FitnessReport, Harness, HarnessError, RunnerError};
use crate::llm::{llm_propose, CompletionParams, CompletionProvider, LlmError, ProviderError, ProviderErrorKind};
use crate::minimize::minimize;
use crate::mutation::{crossover, mutate_classic, ClassicOp, Draw, MutationError};
use crate::objective::Objective;
use crate::patch::{apply, Patch};
use crate::source::SourceUnit;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Operator {
    Init,
    Delete,
    Insert,
    Swap,
    Llm,
    Crossover,
    Elite,
}

impl Operator {
    pub fn name(self) -> &'static str {
        match self {
            Operator::Init => "init",
            Operator::Delete => "delete",
            Operator::Insert => "insert",
            Operator::Swap => "swap",
            Operator::Llm => "llm",
            Operator::Crossover => "crossover",
            Operator::Elite => "elite",
        }
    }
}

impl From<ClassicOp> for Operator {
    fn from(op: ClassicOp) -> Self {
        match op {
            ClassicOp::Delete => Operator::Delete,
            ClassicOp::Insert => Operator::Insert,
            ClassicOp::Swap => Operator::Swap,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lineage {
    pub parents: Vec<ContentHash>,
    pub operator: Operator,
    /// Mutation applied after crossover.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mutation: Option<Operator>,
    pub generation: usize,
}

#[derive(Debug, Clone)]
pub struct Candidate {
    pub patch: Patch,
    pub variant_hash: ContentHash,
    pub fitness: Option<Arc<FitnessReport>>,
    pub lineage: Lineage,
    /// Why the candidate could not be produced or evaluated.
    pub error: Option<String>,
}

impl Candidate {
    fn fitness(&self) -> Result<&FitnessReport, EngineError> {
        self.fitness
            .as_deref()
            .ok_or(EngineError::UnevaluatedCandidate(self.variant_hash))
    }
}

/// One line of the lineage graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineageRecord {
    pub variant_hash: ContentHash,
    pub patch_len: usize,
    #[serde(flatten)]
    pub lineage: Lineage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestSummary {
    pub variant_hash: ContentHash,
    pub patch_len: usize,
    pub valid: bool,
    pub tests_passed: usize,
    pub tests_total: usize,
    pub time_ms: Option<f64>,
    pub peak_mem_bytes: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    /// Best of this generation.
    pub best: BestSummary,
    /// Best ever evaluated up to and including this generation.
    pub global_best: BestSummary,
    /// Mean objective value over candidates that passed every test.
    pub mean_metric: Option<f64>,
    pub operator_counts: BTreeMap<Operator, usize>,
    pub evaluations: usize,
    pub cache_hits: usize,
    pub invalid: usize,
    pub errors: usize,
    /// Provider calls made so far in the run.
    pub llm_calls: usize,
}

impl GenerationStats {
    /// Copy with every measured quantity cleared, for reproducibility checks.
    pub fn without_measurements(&self) -> Self {
        let strip = |b: &BestSummary| BestSummary {
            time_ms: None,
            peak_mem_bytes: None,
            ..b.clone()
        };
        Self {
            best: strip(&self.best),
            global_best: strip(&self.global_best),
            mean_metric: None,
            ..self.clone()
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("invalid configuration: {field}: {reason}")]
    Config { field: &'static str, reason: String },
    #[error("target has no statements to mutate")]
    EmptyUnit,
    #[error("candidate {0:?} has not been evaluated")]
    UnevaluatedCandidate(ContentHash),
    #[error("empty population")]
    EmptyPopulation,
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

impl From<MutationError> for EngineError {
    fn from(e: MutationError) -> Self {
        match e {
            MutationError::EmptyUnit | MutationError::TooFewSpans(_) => EngineError::EmptyUnit,
            MutationError::BaseMismatch => EngineError::Config {
                field: "patch",
                reason: e.to_string(),
            },
        }
    }
}

/// Something that turns variant sources into fitness reports.
pub trait Evaluator: Sync {
    /// One result per input, in order; the flag marks cache hits.
    fn evaluate_batch(&self, variants: &[String]) -> Vec<Evaluation>;
}

impl Evaluator for Harness {
    fn evaluate_batch(&self, variants: &[String]) -> Vec<Evaluation> {
        self.evaluate_many(variants)
    }
}

/// The LLM mutation operator's wiring.
pub struct LlmOperator<'a> {
    pub provider: &'a dyn CompletionProvider,
    pub params: CompletionParams,
    /// Function rewritten by the model.
    pub entry: String,
}

/// Baseline anchor plus `population_size - 1` single random classic edits.
pub fn init_population(unit: &SourceUnit, config: &EvolutionConfig, rng: &mut impl Draw) -> Result<Vec<Candidate>, EngineError> {
    config.validate().map_err(|(field, reason)| EngineError::Config { field, reason })?;
    if unit.is_empty() {
        return Err(EngineError::EmptyUnit);
    }
    let mut population = Vec::with_capacity(config.population_size);
    for i in 0..config.population_size {
        let patch = if i == 0 {
            Patch::identity(unit)
        } else {
            let (_, edit) = mutate_classic(rng, unit)?;
            Patch::new(unit, vec![edit])
        };
        population.push(unborn(patch, Operator::Init, vec![], 0));
    }
    Ok(population)
}

fn unborn(patch: Patch, operator: Operator, parents: Vec<ContentHash>, generation: usize) -> Candidate {
    Candidate {
        patch,
        variant_hash: ContentHash::of(b""),
        fitness: None,
        lineage: Lineage {
            parents,
            operator,
            mutation: None,
            generation,
        },
        error: None,
    }
}

/// Tournament: `k` uniform draws with replacement, best under `order` wins.
pub fn select<'p>(population: &'p [Candidate], rng: &mut impl Draw, k: usize, order: &FitnessOrder) -> Result<&'p Candidate, EngineError> {
    if population.is_empty() {
        return Err(EngineError::EmptyPopulation);
    }
    let mut best = &population[rng.below(population.len())];
    best.fitness()?;
    for _ in 1..k.max(1) {
        let challenger = &population[rng.below(population.len())];
        if prefer(order, challenger, best)? == Ordering::Less {
            best = challenger;
        }
    }
    Ok(best)
}

fn prefer(order: &FitnessOrder, a: &Candidate, b: &Candidate) -> Result<Ordering, EngineError> {
    Ok(order.compare(a.fitness()?, b.fitness()?, a.patch.len(), b.patch.len()))
}

fn summary(c: &Candidate) -> BestSummary {
    let f = c.fitness.as_deref();
    BestSummary {
        variant_hash: c.variant_hash,
        patch_len: c.patch.len(),
        valid: f.is_some_and(|f| f.valid),
        tests_passed: f.map_or(0, |f| f.tests_passed),
        tests_total: f.map_or(0, |f| f.tests_total),
        time_ms: f.and_then(|f| f.time_ms),
        peak_mem_bytes: f.and_then(|f| f.peak_mem_bytes),
    }
}

/// What a finished run hands back.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub best: Candidate,
    /// Best patch before minimization.
    pub unminimized: Patch,
    pub minimized: bool,
    pub history: Vec<GenerationStats>,
    pub lineage: Vec<LineageRecord>,
    pub llm_calls: usize,
}

/// Runs the loop over a fixed target, evaluator and ordering.
pub struct Engine<'a> {
    unit: &'a SourceUnit,
    config: &'a EvolutionConfig,
    evaluator: &'a dyn Evaluator,
    llm: Option<LlmOperator<'a>>,
    order: FitnessOrder,
    tests_total: usize,
    llm_calls: usize,
    lineage: Vec<LineageRecord>,
    best: Option<Candidate>,
}

impl<'a> Engine<'a> {
    /// `baseline` is the unmodified program's report; it anchors the metric
    /// buckets of the fitness ordering.
    pub fn new(
        unit: &'a SourceUnit,
        config: &'a EvolutionConfig,
        evaluator: &'a dyn Evaluator,
        baseline: &FitnessReport,
        llm: Option<LlmOperator<'a>>,
    ) -> Result<Self, EngineError> {
        config.validate().map_err(|(field, reason)| EngineError::Config { field, reason })?;
        Ok(Self {
            unit,
            config,
            evaluator,
            llm,
            order: FitnessOrder::bucketed(config.objective, baseline.metric(config.objective), config.metric_tolerance),
            tests_total: baseline.tests_total,
            llm_calls: 0,
            lineage: Vec::new(),
            best: None,
        })
    }

    pub fn order(&self) -> &FitnessOrder {
        &self.order
    }

    pub fn objective(&self) -> Objective {
        self.config.objective
    }

    pub fn llm_calls(&self) -> usize {
        self.llm_calls
    }

    pub fn best(&self) -> Option<&Candidate> {
        self.best.as_ref()
    }

    fn llm_budget_left(&self) -> bool {
        self.llm.is_some() && self.config.llm_call_budget.is_none_or(|b| self.llm_calls < b)
    }

    /// Materializes and evaluates every candidate lacking fitness, then
    /// updates the global best. Returns (evaluations, cache hits).
    pub fn evaluate(&mut self, candidates: &mut [Candidate]) -> Result<(usize, usize), EngineError> {
        let mut pending: Vec<usize> = Vec::new();
        let mut sources: Vec<String> = Vec::new();
        for (i, c) in candidates.iter_mut().enumerate() {
            if c.fitness.is_some() {
                continue;
            }
            match apply(self.unit, &c.patch) {
                Ok(text) => {
                    c.variant_hash = ContentHash::of(&text);
                    if c.error.is_some() {
                        c.fitness = Some(Arc::new(FitnessReport::invalid(c.variant_hash, self.tests_total, "mutation failed")));
                    } else {
                        pending.push(i);
                        sources.push(text);
                    }
                }
                Err(e) => {
                    c.error = Some(e.to_string());
                    c.fitness = Some(Arc::new(FitnessReport::invalid(c.variant_hash, self.tests_total, "patch does not apply")));
                }
            }
        }

        let results = self.evaluator.evaluate_batch(&sources);
        let (mut evaluations, mut hits) = (0, 0);
        for (i, result) in pending.into_iter().zip(results) {
            let c = &mut candidates[i];
            match result {
                Ok((report, hit)) => {
                    if hit {
                        hits += 1;
                    } else {
                        evaluations += 1;
                    }
                    c.fitness = Some(report);
                }
                Err(HarnessError::Runner(e @ RunnerError::ToolchainMissing { .. })) => {
                    return Err(HarnessError::Runner(e).into());
                }
                Err(e) => {
                    c.error = Some(e.to_string());
                    c.fitness = Some(Arc::new(FitnessReport::invalid(c.variant_hash, self.tests_total, "evaluation failed")));
                }
            }
        }

        for c in candidates.iter() {
            self.lineage.push(LineageRecord {
                variant_hash: c.variant_hash,
                patch_len: c.patch.len(),
                lineage: c.lineage.clone(),
            });
            let better = match &self.best {
                None => true,
                Some(best) => prefer(&self.order, c, best)? == Ordering::Less,
            };
            if better {
                self.best = Some(c.clone());
            }
        }
        Ok((evaluations, hits))
    }

    fn mutate(&mut self, patch: &mut Patch, rng: &mut impl Draw) -> Result<(Operator, Option<String>), EngineError> {
        let use_llm = rng.unit() < self.config.p_llm;
        if use_llm && self.llm_budget_left() {
            let llm = self.llm.as_ref().expect("budget implies operator");
            self.llm_calls += 1;
            return Ok(
                match llm_propose(self.unit, &llm.entry, self.config.objective, llm.provider, &llm.params) {
                    Ok(edit) => {
                        patch.push_superseding(edit);
                        (Operator::Llm, None)
                    }
                    Err(LlmError::Provider(e)) if e.kind != ProviderErrorKind::MockMiss => return Err(e.into()),
                    Err(e) => (Operator::Llm, Some(e.to_string())),
                },
            );
        }
        let (op, edit) = mutate_classic(rng, self.unit)?;
        patch.edits.push(edit);
        Ok((op.into(), None))
    }

    /// Produces and evaluates generation `gen_index` from `population`.
    pub fn step(&mut self, population: &[Candidate], rng: &mut impl Draw, gen_index: usize) -> Result<(Vec<Candidate>, GenerationStats), EngineError> {
        for c in population {
            c.fitness()?;
        }
        let mut ranked: Vec<&Candidate> = population.iter().collect();
        let order = self.order;
        ranked.sort_by(|a, b| order.compare(a.fitness.as_deref().unwrap(), b.fitness.as_deref().unwrap(), a.patch.len(), b.patch.len()));

        let mut next: Vec<Candidate> = ranked
            .iter()
            .take(self.config.elitism)
            .map(|c| Candidate {
                lineage: Lineage {
                    parents: vec![c.variant_hash],
                    operator: Operator::Elite,
                    mutation: None,
                    generation: gen_index,
                },
                ..(*c).clone()
            })
            .collect();

        let mut offspring = Vec::with_capacity(self.config.population_size - next.len());
        while next.len() + offspring.len() < self.config.population_size {
            let child = if rng.chance(self.config.p_crossover) {
                let a = select(population, rng, self.config.tournament_k, &order)?;
                let b = select(population, rng, self.config.tournament_k, &order)?;
                let parents = vec![a.variant_hash, b.variant_hash];
                let mut patch = crossover(&a.patch, &b.patch, rng)?;
                patch.drop_shadowed_replaces();
                let (op, error) = self.mutate(&mut patch, rng)?;
                let mut c = unborn(patch, Operator::Crossover, parents, gen_index);
                c.lineage.mutation = Some(op);
                c.error = error;
                c
            } else {
                let parent = select(population, rng, self.config.tournament_k, &order)?;
                let mut patch = parent.patch.clone();
                let parents = vec![parent.variant_hash];
                let (op, error) = self.mutate(&mut patch, rng)?;
                let mut c = unborn(patch, op, parents, gen_index);
                c.error = error;
                c
            };
            offspring.push(child);
        }

        let (evaluations, cache_hits) = self.evaluate(&mut offspring)?;
        next.extend(offspring);
        let stats = self.stats(&next, gen_index, evaluations, cache_hits);
        Ok((next, stats))
    }

    fn stats(&self, population: &[Candidate], generation: usize, evaluations: usize, cache_hits: usize) -> GenerationStats {
        let order = self.order;
        let best = population
            .iter()
            .min_by(|a, b| order.compare(a.fitness.as_deref().unwrap(), b.fitness.as_deref().unwrap(), a.patch.len(), b.patch.len()))
            .expect("non-empty population");
        let metrics: Vec<f64> = population
            .iter()
            .filter_map(|c| c.fitness.as_deref())
            .filter(|f| f.all_passed())
            .filter_map(|f| f.metric(self.config.objective))
            .collect();
        let mut operator_counts = BTreeMap::new();
        for c in population {
            *operator_counts.entry(c.lineage.operator).or_insert(0) += 1;
        }
        GenerationStats {
            generation,
            best: summary(best),
            global_best: summary(self.best.as_ref().unwrap_or(best)),
            mean_metric: (!metrics.is_empty()).then(|| metrics.iter().sum::<f64>() / metrics.len() as f64),
            operator_counts,
            evaluations,
            cache_hits,
            invalid: population
                .iter()
                .filter(|c| c.fitness.as_deref().is_some_and(|f| !f.valid))
                .count(),
            errors: population.iter().filter(|c| c.error.is_some()).count(),
            llm_calls: self.llm_calls,
        }
    }

    /// Full run: seed, iterate until a stopping rule fires, minimize the best.
    pub fn run(&mut self, rng: &mut impl Draw) -> Result<RunResult, EngineError> {
        let started = Instant::now();
        let mut population = init_population(self.unit, self.config, rng)?;
        let (evaluations, hits) = self.evaluate(&mut population)?;
        let mut history = vec![self.stats(&population, 0, evaluations, hits)];

        let mut since_improvement = 0;
        for generation in 1..=self.config.max_generations {
            let before = self.best.clone();
            let (next, stats) = self.step(&population, rng, generation)?;
            population = next;
            history.push(stats);

            let improved = match (&before, &self.best) {
                (Some(b), Some(now)) => prefer(&self.order, now, b)? == Ordering::Less,
                _ => true,
            };
            since_improvement = if improved { 0 } else { since_improvement + 1 };

            if self.config.budget_wall_ms.is_some_and(|ms| started.elapsed().as_millis() as u64 >= ms) {
                break;
            }
            if self.config.plateau_generations.is_some_and(|p| since_improvement >= p) {
                break;
            }
            if self.config.llm_call_budget.is_some() && self.llm.is_some() && !self.llm_budget_left() && since_improvement > 0 {
                break;
            }
        }

        let best = self.best.clone().ok_or(EngineError::EmptyPopulation)?;
        let (best, minimized) = self.minimize_best(best)?;
        let unminimized = self.best.as_ref().map(|b| b.patch.clone()).unwrap_or_else(|| best.patch.clone());
        Ok(RunResult {
            best,
            unminimized,
            minimized,
            history,
            lineage: self.lineage.clone(),
            llm_calls: self.llm_calls,
        })
    }

    /// Shrinks the best patch; see [`minimize_patch`].
    pub fn minimize_best(&mut self, best: Candidate) -> Result<(Candidate, bool), EngineError> {
        let reference = best.fitness()?.clone();
        let (patch, report) = minimize_patch(self.unit, &best.patch, &reference, self.evaluator, &self.order)?;
        if patch == best.patch {
            return Ok((best, false));
        }
        Ok((
            Candidate {
                variant_hash: report.variant_hash,
                fitness: Some(report),
                patch,
                ..best
            },
            true,
        ))
    }
}

/// Reduces `patch` to a 1-minimal sub-list that is still valid and no worse
/// under `order` (ignoring length) than `reference`, the patch's own report.
/// Invalid or empty patches come back unchanged.
pub fn minimize_patch(
    unit: &SourceUnit,
    patch: &Patch,
    reference: &FitnessReport,
    evaluator: &dyn Evaluator,
    order: &FitnessOrder,
) -> Result<(Patch, Arc<FitnessReport>), EngineError> {
    if !reference.valid || patch.is_empty() {
        return Ok((patch.clone(), Arc::new(reference.clone())));
    }
    let reduced = minimize(patch, |sub| -> Result<bool, EngineError> {
        let Ok(text) = apply(unit, sub) else {
            return Ok(false);
        };
        let report = evaluate_one(evaluator, text)?;
        Ok(report.valid && order.compare_fitness(&report, reference) != Ordering::Greater)
    })?;
    let text = apply(unit, &reduced).expect("accepted patches apply");
    let report = evaluate_one(evaluator, text)?;
    Ok((reduced, report))
}

fn evaluate_one(evaluator: &dyn Evaluator, text: String) -> Result<Arc<FitnessReport>, EngineError> {
    let mut results = evaluator.evaluate_batch(&[text]);
    Ok(results.pop().expect("one result")?.0)
}
