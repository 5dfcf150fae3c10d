//! Deduplication: rank near-key attributes by the single-attribute AFDs they
//! anchor, sort by the chosen key family, compare rows inside a sliding
//! window and resolve duplicate pairs one decision at a time.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::afd::single_attribute_afds;
use crate::attrs::AttrSet;
use crate::error::{Error, Result};
use crate::exec::ExecConfig;
use crate::ratio::Ratio;
use crate::relation::{Relation, Value, NULL_ID};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DedupConfig {
    pub threshold: Ratio,
    pub window: usize,
    pub k: usize,
    #[serde(default)]
    pub excluded_keys: AttrSet,
}

impl DedupConfig {
    pub fn check(&self, attribute_count: usize) -> Result<()> {
        if self.window < 2 {
            return Err(Error::invalid("window", "must be at least 2"));
        }
        if self.k == 0 || self.k > attribute_count {
            return Err(Error::invalid(
                "k",
                format!("must lie in 1..={attribute_count}"),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyCandidate {
    pub lhs: usize,
    pub rhs_list: Vec<usize>,
    pub rhs_count: usize,
    /// No repeated values: most likely a surrogate key.
    pub is_unique: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DuplicatePair {
    pub row_a: u32,
    pub row_b: u32,
    pub matched_attrs: Vec<usize>,
    pub match_count: usize,
}

impl DuplicatePair {
    pub fn rows(&self) -> (u32, u32) {
        (self.row_a, self.row_b)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resolution {
    pub pair: DuplicatePair,
    pub keep: u32,
    #[serde(default)]
    pub copy_attrs: AttrSet,
}

impl Resolution {
    pub fn discard(&self) -> u32 {
        if self.keep == self.pair.row_a {
            self.pair.row_b
        } else {
            self.pair.row_a
        }
    }
}

fn column_is_unique(relation: &Relation, attr: usize) -> bool {
    let mut seen = vec![false; relation.dictionary_len(attr)];
    for &code in relation.column(attr) {
        if code == NULL_ID {
            continue;
        }
        if std::mem::replace(&mut seen[code as usize], true) {
            return false;
        }
    }
    true
}

/// Near-key candidates, largest dependent-attribute list first.
pub fn rank_dedup_keys(relation: &Relation, cfg: &DedupConfig, exec: &ExecConfig) -> Vec<KeyCandidate> {
    let groups = single_attribute_afds(relation, cfg.threshold, exec);
    let mut out: Vec<KeyCandidate> = groups
        .into_iter()
        .filter(|(lhs, rhs)| !rhs.is_empty() && !cfg.excluded_keys.contains(*lhs))
        .map(|(lhs, rhs_list)| KeyCandidate {
            lhs,
            rhs_count: rhs_list.len(),
            rhs_list,
            is_unique: column_is_unique(relation, lhs),
        })
        .collect();
    out.sort_by(|a, b| b.rhs_count.cmp(&a.rhs_count).then(a.lhs.cmp(&b.lhs)));
    out
}

/// The highest-ranked candidate that is not a surrogate key, falling back to
/// the top candidate when every one is unique.
pub fn choose_key(candidates: &[KeyCandidate]) -> Option<&KeyCandidate> {
    candidates
        .iter()
        .find(|c| !c.is_unique)
        .or_else(|| candidates.first())
}

fn compare_values(a: &Value, b: &Value) -> Ordering {
    match (a, b) {
        (Value::Null, Value::Null) => Ordering::Equal,
        (Value::Null, _) => Ordering::Greater,
        (_, Value::Null) => Ordering::Less,
        (Value::Integer(x), Value::Integer(y)) => x.cmp(y),
        (Value::String(x), Value::String(y)) => x.cmp(y),
        _ => match (a.as_f64(), b.as_f64()) {
            (Some(x), Some(y)) => x.total_cmp(&y),
            _ => a.to_string().cmp(&b.to_string()),
        },
    }
}

/// Stable permutation ordering rows by the key's lhs, then its dependent
/// attributes in listed order. Nulls sort last.
pub fn sort_for_neighborhood(relation: &Relation, chosen: &KeyCandidate) -> Vec<u32> {
    let key: Vec<usize> = std::iter::once(chosen.lhs)
        .chain(chosen.rhs_list.iter().copied())
        .collect();
    let mut perm: Vec<u32> = (0..relation.row_count() as u32).collect();
    perm.sort_by(|&x, &y| {
        key.iter()
            .map(|&a| compare_values(relation.value(x as usize, a), relation.value(y as usize, a)))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    });
    perm
}

/// Position pairs `(i, j)` with `0 < j - i < window`, ascending.
pub fn window_pairs(len: usize, window: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..len).flat_map(move |i| (i + 1..len.min(i.saturating_add(window))).map(move |j| (i, j)))
}

fn normalized(value: &Value) -> Option<String> {
    value.as_str().map(|s| s.trim().to_lowercase())
}

fn cells_match(relation: &Relation, a: usize, b: usize, attr: usize) -> bool {
    let (ca, cb) = (relation.code(a, attr), relation.code(b, attr));
    if ca == NULL_ID || cb == NULL_ID {
        return false;
    }
    if ca == cb {
        return true;
    }
    let (va, vb) = (relation.decode(attr, ca), relation.decode(attr, cb));
    match (normalized(va), normalized(vb)) {
        (Some(x), Some(y)) => x == y,
        _ => matches!((va.as_f64(), vb.as_f64()), (Some(x), Some(y)) if x == y),
    }
}

/// Rows (positions) agreeing on at least `k` attributes, compared after
/// trimming and case-folding strings. Nulls never match.
pub fn match_pair(relation: &Relation, row_a: usize, row_b: usize, k: usize) -> Option<DuplicatePair> {
    let matched_attrs: Vec<usize> = (0..relation.attribute_count())
        .filter(|&attr| cells_match(relation, row_a, row_b, attr))
        .collect();
    let origin = relation.origin();
    let (x, y) = (origin[row_a], origin[row_b]);
    (matched_attrs.len() >= k).then(|| DuplicatePair {
        row_a: x.min(y),
        row_b: x.max(y),
        match_count: matched_attrs.len(),
        matched_attrs,
    })
}

/// Duplicate pairs among window neighbours of `permutation`, each pair once,
/// ordered by row ids.
pub fn find_duplicates(relation: &Relation, permutation: &[u32], window: usize, k: usize) -> Vec<DuplicatePair> {
    let mut pairs: Vec<DuplicatePair> = window_pairs(permutation.len(), window)
        .filter_map(|(i, j)| match_pair(relation, permutation[i] as usize, permutation[j] as usize, k))
        .collect();
    pairs.sort_by_key(DuplicatePair::rows);
    pairs.dedup_by_key(|p| p.rows());
    pairs
}

/// Keeps one row of the pair, copies `copy_attrs` from the other into it and
/// drops the other. Row ids are origin ids, so a resolution naming a row
/// that an earlier one removed is reported as stale.
pub fn apply_resolution(relation: &Relation, resolution: &Resolution) -> Result<Relation> {
    let (a, b) = resolution.pair.rows();
    if resolution.keep != a && resolution.keep != b {
        return Err(Error::invalid("keep", "must name one row of the pair"));
    }
    for attr in resolution.copy_attrs {
        relation.check_attribute(attr)?;
    }
    let discard = resolution.discard();
    let keep_pos = relation
        .position_of(resolution.keep)
        .ok_or(Error::StaleResolution(resolution.keep))?;
    let discard_pos = relation
        .position_of(discard)
        .ok_or(Error::StaleResolution(discard))?;
    let overrides: Vec<(usize, usize, u32)> = resolution
        .copy_attrs
        .iter()
        .map(|attr| (keep_pos, attr, relation.code(discard_pos, attr)))
        .collect();
    let rows: Vec<usize> = (0..relation.row_count()).filter(|&r| r != discard_pos).collect();
    Ok(relation.derive(&rows, &overrides))
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SessionError {
    #[error("pair ({0}, {1}) is not the current proposal")]
    NotProposed(u32, u32),
    #[error("row {0} was already consumed by an earlier decision")]
    Stale(u32),
    #[error("{0}")]
    Invalid(String),
}

/// Interactive resolution state: candidate pairs plus the decision journal.
///
/// The current relation is always a pure replay of the journal over the
/// source relation, so persisting the journal is enough to recover it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DedupSession {
    pub candidates: Vec<DuplicatePair>,
    pub journal: Vec<Resolution>,
    #[serde(default)]
    pub skipped: BTreeSet<(u32, u32)>,
}

impl DedupSession {
    pub fn new(candidates: Vec<DuplicatePair>) -> Self {
        DedupSession {
            candidates,
            journal: Vec::new(),
            skipped: BTreeSet::new(),
        }
    }

    pub fn removed(&self) -> BTreeSet<u32> {
        self.journal.iter().map(Resolution::discard).collect()
    }

    /// Next undecided, unskipped pair whose rows are both still present.
    pub fn proposal(&self) -> Option<&DuplicatePair> {
        let removed = self.removed();
        self.candidates.iter().find(|p| {
            !self.skipped.contains(&p.rows())
                && !removed.contains(&p.row_a)
                && !removed.contains(&p.row_b)
        })
    }

    fn check_proposed(&self, rows: (u32, u32)) -> Result<(), SessionError> {
        let removed = self.removed();
        for r in [rows.0, rows.1] {
            if removed.contains(&r) {
                return Err(SessionError::Stale(r));
            }
        }
        match self.proposal() {
            Some(p) if p.rows() == rows => Ok(()),
            _ => Err(SessionError::NotProposed(rows.0, rows.1)),
        }
    }

    /// Records a decision on the current proposal.
    pub fn decide(&mut self, keep: u32, copy_attrs: AttrSet) -> Result<&Resolution, SessionError> {
        let pair = self
            .proposal()
            .cloned()
            .ok_or_else(|| SessionError::Invalid("no pair left to decide".into()))?;
        self.decide_pair(pair.row_a, pair.row_b, keep, copy_attrs)
    }

    /// Records a decision naming its pair explicitly; the pair must be the
    /// current proposal.
    pub fn decide_pair(
        &mut self,
        row_a: u32,
        row_b: u32,
        keep: u32,
        copy_attrs: AttrSet,
    ) -> Result<&Resolution, SessionError> {
        let rows = (row_a.min(row_b), row_a.max(row_b));
        self.check_proposed(rows)?;
        if keep != rows.0 && keep != rows.1 {
            return Err(SessionError::Invalid("keep must name one row of the pair".into()));
        }
        let pair = self.proposal().cloned().expect("checked");
        self.journal.push(Resolution {
            pair,
            keep,
            copy_attrs,
        });
        Ok(self.journal.last().expect("just pushed"))
    }

    pub fn skip(&mut self, row_a: u32, row_b: u32) -> Result<(), SessionError> {
        let rows = (row_a.min(row_b), row_a.max(row_b));
        self.check_proposed(rows)?;
        self.skipped.insert(rows);
        Ok(())
    }

    pub fn undo(&mut self) -> Option<Resolution> {
        self.journal.pop()
    }

    /// Replays the journal over `source`.
    pub fn relation(&self, source: &Relation) -> Result<Relation> {
        let mut current = source.clone();
        for r in &self.journal {
            current = apply_resolution(&current, r)?;
        }
        Ok(current)
    }
}
