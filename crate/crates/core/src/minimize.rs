//! Patch minimization: drop edits that do not pay for themselves.
//!
//! Short patches are searched exhaustively by increasing size, so the result
//! is the shortest acceptable sub-list (lexicographically first by retained
//! indices). Longer patches go through ddmin followed by single-edit sweeps
//! until no edit can be removed. Either way the result is 1-minimal with
//! respect to the acceptance predicate.

use std::collections::HashMap;

use crate::patch::Patch;

/// Patches up to this many edits are minimized exhaustively.
pub const EXHAUSTIVE_LIMIT: usize = 6;

/// Returns a 1-minimal sub-list of `patch` accepted by `accept`.
///
/// `accept` must answer whether a candidate sub-patch is valid and no worse
/// than the input. If the input itself is not accepted it is returned as-is.
pub fn minimize<E>(
    patch: &Patch,
    mut accept: impl FnMut(&Patch) -> Result<bool, E>,
) -> Result<Patch, E> {
    let mut memo: HashMap<Vec<usize>, bool> = HashMap::new();
    let mut test = |indices: &[usize]| -> Result<bool, E> {
        if let Some(&v) = memo.get(indices) {
            return Ok(v);
        }
        let v = accept(&patch.select(indices))?;
        memo.insert(indices.to_vec(), v);
        Ok(v)
    };

    let n = patch.len();
    let all: Vec<usize> = (0..n).collect();
    if n == 0 || !test(&all)? {
        return Ok(patch.clone());
    }

    if n <= EXHAUSTIVE_LIMIT {
        for size in 0..n {
            for combo in Combinations::new(n, size) {
                if test(&combo)? {
                    return Ok(patch.select(&combo));
                }
            }
        }
        return Ok(patch.clone());
    }

    let mut current = ddmin(all, &mut test)?;
    // Single-edit sweep to a fixed point.
    'sweep: loop {
        for i in 0..current.len() {
            let mut reduced = current.clone();
            reduced.remove(i);
            if test(&reduced)? {
                current = reduced;
                continue 'sweep;
            }
        }
        break;
    }
    Ok(patch.select(&current))
}

fn ddmin<E>(
    mut current: Vec<usize>,
    test: &mut impl FnMut(&[usize]) -> Result<bool, E>,
) -> Result<Vec<usize>, E> {
    let mut granularity = 2;
    while current.len() >= 2 {
        let chunks = split(&current, granularity);
        let mut reduced = false;

        for chunk in &chunks {
            if test(chunk)? {
                current = chunk.clone();
                granularity = 2;
                reduced = true;
                break;
            }
        }
        if !reduced && granularity > 2 {
            for i in 0..chunks.len() {
                let complement: Vec<usize> = chunks
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .flat_map(|(_, c)| c.iter().copied())
                    .collect();
                if test(&complement)? {
                    current = complement;
                    granularity = (granularity - 1).max(2);
                    reduced = true;
                    break;
                }
            }
        }
        if !reduced {
            if granularity >= current.len() {
                break;
            }
            granularity = (granularity * 2).min(current.len());
        }
    }
    if current.len() == 1 && test(&[])? {
        current.clear();
    }
    Ok(current)
}

fn split(items: &[usize], parts: usize) -> Vec<Vec<usize>> {
    let parts = parts.min(items.len()).max(1);
    let mut out = Vec::with_capacity(parts);
    let mut start = 0;
    for k in 0..parts {
        let end = start + (items.len() - start) / (parts - k);
        out.push(items[start..end].to_vec());
        start = end;
    }
    out
}

/// k-subsets of 0..n in lexicographic order.
struct Combinations {
    n: usize,
    current: Option<Vec<usize>>,
}

impl Combinations {
    fn new(n: usize, k: usize) -> Self {
        Self {
            n,
            current: (k <= n).then(|| (0..k).collect()),
        }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.clone()?;
        let k = out.len();
        let mut next = out.clone();
        let mut i = k;
        loop {
            if i == 0 {
                self.current = None;
                break;
            }
            i -= 1;
            if next[i] < self.n - k + i {
                next[i] += 1;
                for j in i + 1..k {
                    next[j] = next[j - 1] + 1;
                }
                self.current = Some(next);
                break;
            }
        }
        Some(out)
    }
}
