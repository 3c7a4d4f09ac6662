//! Patch algebra over a `SourceUnit`: edit records, validation and application.
//!
//! Span indices always refer to the unit's original span table. Edits are
//! replayed in list order over per-line slots, so later edits never re-index
//! earlier ones. Line edits touching a line that intersects a `Replace`
//! region are dropped: the replacement text owns those bytes.

use serde::{Deserialize, Serialize};

use crate::digest::ContentHash;
use crate::source::SourceUnit;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Llm,
    Manual,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EditOp {
    Delete {
        target: usize,
    },
    InsertCopy {
        position: usize,
        donor: usize,
    },
    Swap {
        a: usize,
        b: usize,
    },
    Replace {
        start: usize,
        end: usize,
        new_text: String,
        provenance: Provenance,
        /// SHA-256 of the prompt that produced an LLM rewrite.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        prompt_sha256: Option<ContentHash>,
    },
}

impl EditOp {
    pub fn replace(start: usize, end: usize, new_text: impl Into<String>, provenance: Provenance) -> Self {
        EditOp::Replace {
            start,
            end,
            new_text: new_text.into(),
            provenance,
            prompt_sha256: None,
        }
    }

    /// Byte region for `Replace`, `None` for line edits.
    pub fn region(&self) -> Option<(usize, usize)> {
        match self {
            EditOp::Replace { start, end, .. } => Some((*start, *end)),
            _ => None,
        }
    }

    pub fn is_replace(&self) -> bool {
        matches!(self, EditOp::Replace { .. })
    }

    fn span_indices(&self) -> impl Iterator<Item = usize> {
        let ids: [Option<usize>; 2] = match *self {
            EditOp::Delete { target } => [Some(target), None],
            EditOp::InsertCopy { position, donor } => [Some(position), Some(donor)],
            EditOp::Swap { a, b } => [Some(a), Some(b)],
            EditOp::Replace { .. } => [None, None],
        };
        ids.into_iter().flatten()
    }
}

/// Ordered edit list bound to one base text.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Patch {
    pub base_hash: ContentHash,
    pub edits: Vec<EditOp>,
}

impl Patch {
    pub fn identity(unit: &SourceUnit) -> Self {
        Self {
            base_hash: unit.hash(),
            edits: Vec::new(),
        }
    }

    pub fn new(unit: &SourceUnit, edits: Vec<EditOp>) -> Self {
        Self {
            base_hash: unit.hash(),
            edits,
        }
    }

    pub fn len(&self) -> usize {
        self.edits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edits.is_empty()
    }

    /// Sub-patch keeping the edits at `indices` (ascending), same base.
    pub fn select(&self, indices: &[usize]) -> Patch {
        Patch {
            base_hash: self.base_hash,
            edits: indices.iter().map(|&i| self.edits[i].clone()).collect(),
        }
    }

    /// Appends `edit`, first dropping any earlier `Replace` whose region
    /// intersects it.
    pub fn push_superseding(&mut self, edit: EditOp) {
        if let Some(region) = edit.region() {
            self.edits
                .retain(|e| e.region().is_none_or(|r| !regions_intersect(r, region)));
        }
        self.edits.push(edit);
    }

    /// Keeps only the last of any set of mutually intersecting `Replace` edits.
    pub fn drop_shadowed_replaces(&mut self) {
        let mut kept: Vec<EditOp> = Vec::with_capacity(self.edits.len());
        for edit in self.edits.drain(..) {
            if let Some(region) = edit.region() {
                kept.retain(|e| e.region().is_none_or(|r| !regions_intersect(r, region)));
            }
            kept.push(edit);
        }
        self.edits = kept;
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("patch serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

fn regions_intersect(a: (usize, usize), b: (usize, usize)) -> bool {
    // Empty regions still conflict when they sit at the same offset.
    a.0 < b.1 && b.0 < a.1 || a.0 == b.0
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ApplyError {
    #[error("patch base {patch} does not match unit {unit}")]
    BaseMismatch { patch: ContentHash, unit: ContentHash },
    #[error("edit {edit}: span index {index} out of bounds for {len} spans")]
    IndexOutOfBounds { edit: usize, index: usize, len: usize },
    #[error("edit {edit}: replace region {start}..{end} is outside the text or not on a character boundary")]
    InvalidRegion { edit: usize, start: usize, end: usize },
    #[error("edit {edit}: replace text is empty")]
    EmptyReplacement { edit: usize },
    #[error("edits {first} and {second}: replace regions overlap")]
    OverlappingReplace { first: usize, second: usize },
}

/// Checks base hash, index bounds and replace regions without materializing.
pub fn validate(unit: &SourceUnit, patch: &Patch) -> Result<(), ApplyError> {
    if patch.base_hash != unit.hash() {
        return Err(ApplyError::BaseMismatch {
            patch: patch.base_hash,
            unit: unit.hash(),
        });
    }
    let text = unit.text();
    let mut regions: Vec<(usize, usize, usize)> = Vec::new();
    for (i, edit) in patch.edits.iter().enumerate() {
        if let Some(index) = edit.span_indices().find(|&ix| ix >= unit.len()) {
            return Err(ApplyError::IndexOutOfBounds {
                edit: i,
                index,
                len: unit.len(),
            });
        }
        if let EditOp::Replace {
            start,
            end,
            new_text,
            ..
        } = edit
        {
            let (start, end) = (*start, *end);
            if start > end
                || end > text.len()
                || !text.is_char_boundary(start)
                || !text.is_char_boundary(end)
            {
                return Err(ApplyError::InvalidRegion { edit: i, start, end });
            }
            if new_text.is_empty() {
                return Err(ApplyError::EmptyReplacement { edit: i });
            }
            if let Some(&(_, _, first)) = regions
                .iter()
                .find(|&&(s, e, _)| regions_intersect((s, e), (start, end)))
            {
                return Err(ApplyError::OverlappingReplace { first, second: i });
            }
            regions.push((start, end, i));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Default)]
struct Slot {
    inserted: Vec<String>,
    content: Option<String>,
}

/// Materializes the variant source text.
pub fn apply(unit: &SourceUnit, patch: &Patch) -> Result<String, ApplyError> {
    validate(unit, patch)?;
    if patch.edits.is_empty() {
        return Ok(unit.text().to_string());
    }

    let mut regions: Vec<(usize, usize, &str)> = patch
        .edits
        .iter()
        .filter_map(|e| match e {
            EditOp::Replace {
                start,
                end,
                new_text,
                ..
            } => Some((*start, *end, new_text.as_str())),
            _ => None,
        })
        .collect();
    regions.sort_by_key(|r| r.0);

    let spans = unit.spans();
    let covered: Vec<bool> = spans
        .iter()
        .map(|s| {
            regions
                .iter()
                .any(|&(rs, re, _)| rs < s.end.max(s.start + 1) && s.start < re.max(rs + 1))
        })
        .collect();

    let mut slots: Vec<Slot> = (0..spans.len())
        .map(|i| Slot {
            inserted: Vec::new(),
            content: Some(unit.line(i).to_string()),
        })
        .collect();

    for edit in &patch.edits {
        match *edit {
            EditOp::Delete { target } if !covered[target] => slots[target].content = None,
            EditOp::InsertCopy { position, donor } if !covered[position] => {
                let donor_line = unit.line(donor);
                let body = &donor_line[spans[donor].indent_columns..];
                let line = format!("{}{}", unit.indent_of(position), body);
                slots[position].inserted.push(line);
            }
            EditOp::Swap { a, b } if !covered[a] && !covered[b] => {
                let tmp = slots[a].content.take();
                slots[a].content = slots[b].content.take();
                slots[b].content = tmp;
            }
            _ => {}
        }
    }

    let text = unit.text();
    let mut out = String::with_capacity(text.len() + 64);
    let mut pos = 0;
    let mut next_region = 0;
    let mut next_span = 0;
    loop {
        while next_span < spans.len() && spans[next_span].start < pos {
            next_span += 1;
        }
        if let Some(&(start, end, new_text)) = regions.get(next_region) {
            if start == pos {
                out.push_str(new_text);
                next_region += 1;
                pos = end;
                continue;
            }
        }
        if pos >= text.len() {
            break;
        }
        if next_span < spans.len() && spans[next_span].start == pos && !covered[next_span] {
            let span = spans[next_span];
            let slot = &slots[next_span];
            for line in &slot.inserted {
                out.push_str(line);
                out.push('\n');
            }
            pos = span.end;
            match &slot.content {
                Some(content) => out.push_str(content),
                None => {
                    let region_here = regions.get(next_region).is_some_and(|r| r.0 == pos);
                    let rest = &text[pos..];
                    if !region_here {
                        if rest.starts_with("\r\n") {
                            pos += 2;
                        } else if rest.starts_with('\n') {
                            pos += 1;
                        }
                    }
                }
            }
            next_span += 1;
            continue;
        }
        // Copy untouched bytes up to the next region or span boundary.
        let next_start = spans[next_span.min(spans.len())..]
            .iter()
            .map(|s| s.start)
            .find(|&s| s > pos)
            .unwrap_or(text.len());
        let limit = regions
            .get(next_region)
            .map_or(text.len(), |r| r.0)
            .min(next_start);
        out.push_str(&text[pos..limit]);
        pos = limit;
    }
    Ok(out)
}
