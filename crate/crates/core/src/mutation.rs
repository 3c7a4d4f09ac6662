//! Classic statement-level operators (delete, insert-copy, swap) and
//! one-point crossover over edit lists.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::digest::ContentHash;
use crate::patch::{EditOp, Patch};
use crate::source::SourceUnit;

/// Source of uniform draws. Operators only see this trait so tests can
/// script the exact sequence.
pub trait Draw {
    /// Uniform integer in `0..n`; `n` is at least 1.
    fn below(&mut self, n: usize) -> usize;
    /// Uniform real in `[0, 1)`.
    fn unit(&mut self) -> f64;

    fn chance(&mut self, p: f64) -> bool {
        p >= 1.0 || (p > 0.0 && self.unit() < p)
    }
}

/// Seeded, splittable random stream.
///
/// The generator is seeded from SHA-256 of `(seed, stream_id)`, so streams
/// with different ids are independent and each is reproducible.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: String,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: &str) -> Self {
        let mut material = seed.to_le_bytes().to_vec();
        material.extend_from_slice(stream_id.as_bytes());
        let key = *ContentHash::of(&material).as_bytes();
        Self {
            seed,
            stream_id: stream_id.to_string(),
            rng: ChaCha8Rng::from_seed(key),
        }
    }

    /// Derives an independent child stream.
    pub fn split(&self, label: &str) -> Self {
        Self::new(self.seed, &format!("{}/{}", self.stream_id, label))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> &str {
        &self.stream_id
    }
}

impl Draw for RngStream {
    fn below(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n.max(1))
    }

    fn unit(&mut self) -> f64 {
        self.rng.random::<f64>()
    }
}

/// Replays a fixed script of draws; panics when the script runs out.
///
/// `below(n)` consumes the next integer (reduced mod `n`), `unit()` the next
/// real.
#[derive(Debug, Clone, Default)]
pub struct ScriptedDraws {
    ints: std::collections::VecDeque<usize>,
    reals: std::collections::VecDeque<f64>,
}

impl ScriptedDraws {
    pub fn new(ints: impl IntoIterator<Item = usize>) -> Self {
        Self {
            ints: ints.into_iter().collect(),
            reals: Default::default(),
        }
    }

    pub fn with_reals(mut self, reals: impl IntoIterator<Item = f64>) -> Self {
        self.reals = reals.into_iter().collect();
        self
    }
}

impl Draw for ScriptedDraws {
    fn below(&mut self, n: usize) -> usize {
        self.ints.pop_front().expect("scripted ints exhausted") % n.max(1)
    }

    fn unit(&mut self) -> f64 {
        self.reals.pop_front().expect("scripted reals exhausted")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MutationError {
    #[error("unit has no statements to mutate")]
    EmptyUnit,
    #[error("swap needs at least two statements, unit has {0}")]
    TooFewSpans(usize),
    #[error("crossover parents target different bases")]
    BaseMismatch,
}

/// Classic operator names, in the order `mutate_classic` indexes them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ClassicOp {
    Delete,
    Insert,
    Swap,
}

impl ClassicOp {
    pub const ALL: [ClassicOp; 3] = [ClassicOp::Delete, ClassicOp::Insert, ClassicOp::Swap];

    pub fn name(self) -> &'static str {
        match self {
            ClassicOp::Delete => "delete",
            ClassicOp::Insert => "insert",
            ClassicOp::Swap => "swap",
        }
    }
}

pub fn mutate_delete(rng: &mut impl Draw, unit: &SourceUnit) -> Result<EditOp, MutationError> {
    if unit.is_empty() {
        return Err(MutationError::EmptyUnit);
    }
    Ok(EditOp::Delete {
        target: rng.below(unit.len()),
    })
}

/// Position and donor are drawn independently; they may coincide.
pub fn mutate_insert(rng: &mut impl Draw, unit: &SourceUnit) -> Result<EditOp, MutationError> {
    if unit.is_empty() {
        return Err(MutationError::EmptyUnit);
    }
    let position = rng.below(unit.len());
    let donor = rng.below(unit.len());
    Ok(EditOp::InsertCopy { position, donor })
}

/// Uniform over unordered pairs: draw `a`, then `b` from the remaining
/// `n - 1` indices. Emitted with `a < b`.
pub fn mutate_swap(rng: &mut impl Draw, unit: &SourceUnit) -> Result<EditOp, MutationError> {
    let n = unit.len();
    if n < 2 {
        return Err(MutationError::TooFewSpans(n));
    }
    let first = rng.below(n);
    let mut second = rng.below(n - 1);
    if second >= first {
        second += 1;
    }
    Ok(EditOp::Swap {
        a: first.min(second),
        b: first.max(second),
    })
}

/// Picks one classic operator uniformly and applies it. A unit with a single
/// statement cannot swap; that draw falls back to delete.
pub fn mutate_classic(
    rng: &mut impl Draw,
    unit: &SourceUnit,
) -> Result<(ClassicOp, EditOp), MutationError> {
    let op = ClassicOp::ALL[rng.below(3)];
    let edit = match op {
        ClassicOp::Delete => mutate_delete(rng, unit)?,
        ClassicOp::Insert => mutate_insert(rng, unit)?,
        ClassicOp::Swap if unit.len() < 2 => return Ok((ClassicOp::Delete, mutate_delete(rng, unit)?)),
        ClassicOp::Swap => mutate_swap(rng, unit)?,
    };
    Ok((op, edit))
}

/// One-point crossover: `a[..cut_a] ++ b[cut_b..]`.
pub fn crossover(a: &Patch, b: &Patch, rng: &mut impl Draw) -> Result<Patch, MutationError> {
    if a.base_hash != b.base_hash {
        return Err(MutationError::BaseMismatch);
    }
    let cut_a = rng.below(a.len() + 1);
    let cut_b = rng.below(b.len() + 1);
    let mut edits = a.edits[..cut_a].to_vec();
    edits.extend_from_slice(&b.edits[cut_b..]);
    Ok(Patch {
        base_hash: a.base_hash,
        edits,
    })
}
