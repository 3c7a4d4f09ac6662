use std::sync::atomic::{AtomicUsize, Ordering as AtomicOrdering};
use std::sync::Arc;

use gi_core::engine::{init_population, select, EngineError, LlmOperator};
use gi_core::fitness::Evaluation;
use gi_core::llm::{CompletionParams, CompletionProvider, MockProvider};
use gi_core::mutation::ScriptedDraws;
use gi_core::{ContentHash, Engine, EvolutionConfig, FitnessOrder, FitnessReport, Objective, Operator, RngStream, SourceUnit};

const TARGET: &str = "def f(n):\n    total = 0\n    pause()\n    for i in range(n):\n        total += i\n    pause()\n    return total\n";

/// Cost model: every surviving `pause()` costs 100 ms; the program is valid
/// while it still defines `f` and returns.
struct Stub {
    calls: AtomicUsize,
}

impl Stub {
    fn new() -> Self {
        Self { calls: AtomicUsize::new(0) }
    }

    fn report(src: &str) -> FitnessReport {
        let hash = ContentHash::of(src.as_bytes());
        let ok = src.contains("def f(n):") && src.contains("return total") && src.contains("total = 0");
        if !ok {
            return FitnessReport::invalid(hash, 1, "stub");
        }
        let pauses = src.matches("pause()").count() as f64;
        FitnessReport {
            valid: true,
            tests_passed: 1,
            tests_total: 1,
            time_ms: Some(1.0 + 100.0 * pauses),
            peak_mem_bytes: Some(1000),
            measurement_method: "stub".into(),
            variant_hash: hash,
            test_outcomes: vec![],
        }
    }
}

impl gi_core::engine::Evaluator for Stub {
    fn evaluate_batch(&self, variants: &[String]) -> Vec<Evaluation> {
        variants
            .iter()
            .map(|v| {
                self.calls.fetch_add(1, AtomicOrdering::Relaxed);
                Ok((Arc::new(Stub::report(v)), false))
            })
            .collect()
    }
}

fn config(seed: u64) -> EvolutionConfig {
    EvolutionConfig {
        population_size: 8,
        max_generations: 6,
        p_llm: 0.0,
        seed,
        ..EvolutionConfig::default()
    }
}

fn unit() -> SourceUnit {
    SourceUnit::python(TARGET)
}

#[test]
fn population_below_two_is_rejected() {
    let cfg = EvolutionConfig {
        population_size: 1,
        ..EvolutionConfig::default()
    };
    let err = init_population(&unit(), &cfg, &mut RngStream::new(0, "init")).unwrap_err();
    assert!(matches!(err, EngineError::Config { field: "population_size", .. }), "{err}");
}

#[test]
fn initial_population_has_identity_anchor_and_single_edits() {
    let u = unit();
    let pop = init_population(&u, &config(1), &mut RngStream::new(1, "init")).unwrap();
    assert_eq!(pop.len(), 8);
    assert!(pop[0].patch.is_empty());
    assert!(pop[1..].iter().all(|c| c.patch.len() == 1));
    assert!(pop.iter().all(|c| c.lineage.operator == Operator::Init));
}

#[test]
fn selection_refuses_unevaluated_candidates() {
    let u = unit();
    let pop = init_population(&u, &config(1), &mut RngStream::new(1, "init")).unwrap();
    let order = FitnessOrder::exact(Objective::Time);
    let err = select(&pop, &mut ScriptedDraws::new([0, 1]), 2, &order).unwrap_err();
    assert!(matches!(err, EngineError::UnevaluatedCandidate(_)));
}

#[test]
fn tournament_picks_the_better_contestant() {
    let u = unit();
    let stub = Stub::new();
    let cfg = config(3);
    let baseline = Stub::report(TARGET);
    let mut engine = Engine::new(&u, &cfg, &stub, &baseline, None).unwrap();
    let mut pop = init_population(&u, &cfg, &mut RngStream::new(3, "init")).unwrap();
    engine.evaluate(&mut pop).unwrap();
    let order = *engine.order();
    for i in 0..pop.len() {
        for j in 0..pop.len() {
            let winner = select(&pop, &mut ScriptedDraws::new([i, j]), 2, &order).unwrap();
            let (a, b) = (&pop[i], &pop[j]);
            let best = if order.compare(a.fitness.as_deref().unwrap(), b.fitness.as_deref().unwrap(), a.patch.len(), b.patch.len())
                == std::cmp::Ordering::Greater
            {
                b
            } else {
                a
            };
            assert_eq!(winner.variant_hash, best.variant_hash);
        }
    }
}

#[test]
fn run_improves_and_minimizes() {
    let u = unit();
    let stub = Stub::new();
    let cfg = EvolutionConfig {
        max_generations: 12,
        ..config(7)
    };
    let baseline = Stub::report(TARGET);
    let mut engine = Engine::new(&u, &cfg, &stub, &baseline, None).unwrap();
    let result = engine.run(&mut RngStream::new(cfg.seed, "evolution")).unwrap();
    let best = result.best.fitness.as_deref().unwrap();
    assert!(best.all_passed());
    assert!(best.time_ms.unwrap() < baseline.time_ms.unwrap());
    assert!(result.best.patch.len() <= result.unminimized.len());
    // Every remaining edit must matter: dropping any one makes it worse or invalid.
    let order = *engine.order();
    for skip in 0..result.best.patch.len() {
        let keep: Vec<usize> = (0..result.best.patch.len()).filter(|&i| i != skip).collect();
        let sub = result.best.patch.select(&keep);
        let text = gi_core::apply(&u, &sub).unwrap();
        let r = Stub::report(&text);
        assert!(!r.valid || order.compare_fitness(&r, best) == std::cmp::Ordering::Greater);
    }
    assert_eq!(result.history.len(), cfg.max_generations + 1);
}

#[test]
fn global_best_never_regresses() {
    let u = unit();
    let stub = Stub::new();
    let cfg = config(11);
    let baseline = Stub::report(TARGET);
    let mut engine = Engine::new(&u, &cfg, &stub, &baseline, None).unwrap();
    let result = engine.run(&mut RngStream::new(cfg.seed, "evolution")).unwrap();
    let times: Vec<f64> = result.history.iter().map(|s| s.global_best.time_ms.unwrap()).collect();
    assert!(times.windows(2).all(|w| w[1] <= w[0]), "{times:?}");
    for s in &result.history[1..] {
        assert_eq!(s.operator_counts.get(&Operator::Elite), Some(&cfg.elitism));
        assert_eq!(s.operator_counts.values().sum::<usize>(), cfg.population_size);
    }
}

#[test]
fn same_seed_same_lineage() {
    let run = |seed| {
        let u = unit();
        let stub = Stub::new();
        let cfg = config(seed);
        let baseline = Stub::report(TARGET);
        let mut engine = Engine::new(&u, &cfg, &stub, &baseline, None).unwrap();
        let r = engine.run(&mut RngStream::new(seed, "evolution")).unwrap();
        (r.lineage, r.history.iter().map(|h| h.without_measurements()).collect::<Vec<_>>(), r.best.patch)
    };
    let (a, b) = (run(5), run(5));
    assert_eq!(a.0, b.0);
    assert_eq!(a.1, b.1);
    assert_eq!(a.2, b.2);
    assert_ne!(run(5).0, run(6).0);
}

#[test]
fn plateau_stops_early() {
    let u = unit();
    let stub = Stub::new();
    let cfg = EvolutionConfig {
        max_generations: 50,
        plateau_generations: Some(2),
        ..config(2)
    };
    let baseline = Stub::report(TARGET);
    let mut engine = Engine::new(&u, &cfg, &stub, &baseline, None).unwrap();
    let result = engine.run(&mut RngStream::new(2, "evolution")).unwrap();
    assert!(result.history.len() < 51);
}

#[test]
fn llm_budget_caps_provider_calls() {
    let u = unit();
    let stub = Stub::new();
    let provider = MockProvider::from_entries([]);
    let cfg = EvolutionConfig {
        p_llm: 1.0,
        llm_call_budget: Some(3),
        max_generations: 4,
        ..config(9)
    };
    let baseline = Stub::report(TARGET);
    let llm = LlmOperator {
        provider: &provider,
        params: CompletionParams::default(),
        entry: "f".into(),
    };
    let mut engine = Engine::new(&u, &cfg, &stub, &baseline, Some(llm)).unwrap();
    let result = engine.run(&mut RngStream::new(9, "evolution")).unwrap();
    assert_eq!(result.llm_calls, 3);
    assert_eq!(provider.calls(), 3);
    // Mock misses are recorded on the candidate rather than aborting the run.
    let first = &result.history[1];
    assert!(first.errors >= 3);
}
