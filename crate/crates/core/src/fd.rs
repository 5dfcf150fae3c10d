//! Exact functional dependencies: validation and levelwise discovery.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attrs::AttrSet;
use crate::error::{Error, Result};
use crate::exec::ExecConfig;
use crate::pli::{build_pli, partition_of, StrippedPartition};
use crate::relation::Relation;

/// `lhs -> rhs` with a single right-hand attribute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Fd {
    pub lhs: AttrSet,
    pub rhs: usize,
}

impl Fd {
    /// Panics if `rhs` is part of `lhs`.
    pub fn new(lhs: AttrSet, rhs: usize) -> Self {
        assert!(!lhs.contains(rhs), "rhs {rhs} must not occur in lhs {lhs:?}");
        Fd { lhs, rhs }
    }

    pub fn check(&self, relation: &Relation) -> Result<()> {
        for a in self.lhs.iter().chain(std::iter::once(self.rhs)) {
            relation.check_attribute(a)?;
        }
        if self.lhs.contains(self.rhs) {
            return Err(Error::invalid("rhs", "right-hand side occurs in left-hand side"));
        }
        Ok(())
    }

    /// `[a, b] -> c` using the given attribute names.
    pub fn render(&self, names: &[String]) -> String {
        let mut out = String::from("[");
        for (i, a) in self.lhs.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            out.push_str(&names[a]);
        }
        let _ = write!(out, "] -> {}", names[self.rhs]);
        out
    }
}

/// Canonical order: rhs first, then lexicographic lhs.
impl Ord for Fd {
    fn cmp(&self, other: &Self) -> Ordering {
        self.rhs.cmp(&other.rhs).then_with(|| self.lhs.cmp(&other.lhs))
    }
}

impl PartialOrd for Fd {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A minimal, duplicate-free, canonically ordered set of dependencies.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FdSet {
    pub provenance: String,
    pub schema: Vec<String>,
    fds: Vec<Fd>,
}

impl FdSet {
    /// Sorts, deduplicates and drops members made redundant by a member with
    /// a smaller lhs and the same rhs.
    pub fn new(provenance: impl Into<String>, schema: Vec<String>, mut fds: Vec<Fd>) -> Self {
        fds.sort();
        fds.dedup();
        let minimal: Vec<Fd> = fds
            .iter()
            .filter(|f| {
                !fds.iter()
                    .any(|g| g.rhs == f.rhs && g.lhs != f.lhs && g.lhs.is_subset(f.lhs))
            })
            .copied()
            .collect();
        FdSet {
            provenance: provenance.into(),
            schema,
            fds: minimal,
        }
    }

    pub fn fds(&self) -> &[Fd] {
        &self.fds
    }

    pub fn len(&self) -> usize {
        self.fds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fds.is_empty()
    }

    pub fn contains(&self, fd: &Fd) -> bool {
        self.fds.binary_search(fd).is_ok()
    }
}

/// Σ over clusters of (size − 1).
pub fn partition_error(p: &StrippedPartition) -> usize {
    p.error()
}

/// True iff no two rows agree on `fd.lhs` but differ on `fd.rhs`.
pub fn fd_holds(relation: &Relation, fd: &Fd) -> bool {
    let lhs = partition_of(relation, fd.lhs);
    let both = if lhs.is_empty() {
        return true;
    } else {
        lhs.intersect(&build_pli(relation, fd.rhs)).expect("same relation")
    };
    partition_error(&lhs) == partition_error(&both)
}

struct Node {
    attrs: AttrSet,
    pli: StrippedPartition,
    error: usize,
    cplus: AttrSet,
}

/// Finds every minimal exact dependency with `|lhs| <= max_lhs`, empty lhs
/// included, by a levelwise ascent over the attribute lattice with
/// right-hand-side candidate pruning.
///
/// Partitions for a level are derived from the previous level and dropped
/// once the next level has been built.
pub fn discover_fds(relation: &Relation, max_lhs: usize, exec: &ExecConfig) -> Result<FdSet> {
    let m = relation.attribute_count();
    if m == 0 {
        return Err(Error::NoAttributes);
    }
    if max_lhs == 0 {
        return Err(Error::invalid("max_lhs", "must be at least 1"));
    }
    let all = AttrSet::full(m);
    let found = exec.install(|| -> Result<Vec<Fd>> {
        let mut found = Vec::new();
        // Level 0 is the empty set: its error and candidate set seed level 1.
        let empty = StrippedPartition::whole(relation.row_count());
        let mut prev: HashMap<AttrSet, (usize, AttrSet)> = HashMap::new();
        prev.insert(AttrSet::EMPTY, (empty.error(), all));

        let mut level: Vec<Node> = (0..m)
            .into_par_iter()
            .map(|a| {
                let pli = build_pli(relation, a);
                Node {
                    attrs: AttrSet::single(a),
                    error: pli.error(),
                    pli,
                    cplus: AttrSet::EMPTY,
                }
            })
            .collect();

        let top = (max_lhs + 1).min(m);
        for size in 1..=top {
            exec.checkpoint()?;
            let results: Vec<(AttrSet, Vec<Fd>)> = level
                .par_iter()
                .map(|node| compute_dependencies(node, &prev))
                .collect();
            for (node, (cplus, fds)) in level.iter_mut().zip(results) {
                node.cplus = cplus;
                found.extend(fds);
            }
            level.retain(|n| !n.cplus.is_empty());
            if size == top {
                break;
            }
            prev = level.iter().map(|n| (n.attrs, (n.error, n.cplus))).collect();
            level = next_level(&level);
        }
        Ok(found)
    })?;
    Ok(FdSet::new(relation.name(), relation.attribute_names(), found))
}

fn compute_dependencies(
    node: &Node,
    prev: &HashMap<AttrSet, (usize, AttrSet)>,
) -> (AttrSet, Vec<Fd>) {
    let x = node.attrs;
    let mut cplus = x
        .iter()
        .map(|a| prev.get(&x.without(a)).map_or(AttrSet::EMPTY, |p| p.1))
        .fold(AttrSet::from_bits(u64::MAX), AttrSet::intersection);
    let mut fds = Vec::new();
    for a in x.intersection(cplus) {
        let sub = x.without(a);
        let Some(&(sub_error, _)) = prev.get(&sub) else {
            continue;
        };
        if sub_error == node.error {
            fds.push(Fd::new(sub, a));
            cplus = cplus.without(a).intersection(x);
        }
    }
    (cplus, fds)
}

/// Joins nodes that share all but their largest attribute; a candidate is kept
/// only when every one of its immediate subsets survived pruning.
fn next_level(level: &[Node]) -> Vec<Node> {
    let index: HashMap<AttrSet, usize> = level.iter().enumerate().map(|(i, n)| (n.attrs, i)).collect();
    let mut by_prefix: HashMap<AttrSet, Vec<usize>> = HashMap::new();
    for (i, node) in level.iter().enumerate() {
        let last = node.attrs.last().expect("non-empty node");
        by_prefix.entry(node.attrs.without(last)).or_default().push(i);
    }
    let mut candidates: Vec<(AttrSet, usize, usize)> = Vec::new();
    for members in by_prefix.values() {
        for (k, &i) in members.iter().enumerate() {
            for &j in &members[k + 1..] {
                let y = level[i].attrs.union(level[j].attrs);
                if y.iter().all(|b| index.contains_key(&y.without(b))) {
                    candidates.push((y, i, j));
                }
            }
        }
    }
    candidates.sort_unstable_by_key(|c| c.0);
    candidates
        .into_par_iter()
        .map(|(attrs, i, j)| {
            let pli = level[i].pli.intersect(&level[j].pli).expect("same relation");
            Node {
                attrs,
                error: pli.error(),
                pli,
                cplus: AttrSet::EMPTY,
            }
        })
        .collect()
}
