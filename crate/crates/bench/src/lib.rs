//! Synthetic inputs shared by the benchmarks.

use gi_core::mutation::mutate_classic;
use gi_core::{FitnessReport, ContentHash, Patch, RngStream, SourceUnit};

/// A Python-shaped program with `functions` small functions of ten
/// statements each, separated by blank lines and comments.
pub fn program(functions: usize) -> String {
    let mut out = String::new();
    for f in 0..functions {
        out.push_str(&format!("# helper {f}\ndef f{f}(n):\n"));
        out.push_str("    total = 0\n    for i in range(n):\n        if i % 3 == 0:\n");
        out.push_str("            total += i\n        else:\n            total -= 1\n");
        out.push_str("    scale = n * 2\n    total = total * scale\n    return total\n\n");
    }
    out
}

/// A patch of `len` random classic edits.
pub fn random_patch(unit: &SourceUnit, len: usize, seed: u64) -> Patch {
    let mut rng = RngStream::new(seed, "bench");
    let edits = (0..len).map(|_| mutate_classic(&mut rng, unit).expect("non-empty unit").1).collect();
    Patch::new(unit, edits)
}

/// A passing report with the given runtime.
pub fn report(time_ms: f64, seed: u64) -> FitnessReport {
    FitnessReport {
        valid: true,
        tests_passed: 3,
        tests_total: 3,
        time_ms: Some(time_ms),
        peak_mem_bytes: None,
        measurement_method: "synthetic".into(),
        variant_hash: ContentHash::of(seed.to_le_bytes()),
        test_outcomes: vec![],
    }
}
