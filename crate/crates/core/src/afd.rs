//! Approximate dependencies under the g1 error measure.
//!
//! g1(X → A) is the share of unordered row pairs that agree on `X` but
//! disagree on `A`, out of all C(n, 2) pairs. It never grows when `X` grows,
//! which is what makes levelwise minimal discovery sound.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attrs::AttrSet;
use crate::error::{Error, Result};
use crate::exec::ExecConfig;
use crate::fd::Fd;
use crate::pli::{build_pli, pairs, partition_of, StrippedPartition};
use crate::ratio::Ratio;
use crate::relation::{Relation, NULL_ID};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Afd {
    pub fd: Fd,
    pub error: Ratio,
}

fn g1_ratio(violations: u64, n: usize) -> Ratio {
    if n < 2 {
        Ratio::ZERO
    } else {
        Ratio::new(violations, pairs(n))
    }
}

/// g1 error of `fd`, computed as Σ C(|c|,2) over π_lhs minus the same sum over
/// π_lhs∪rhs, divided by C(n, 2). Relations with fewer than two rows have no
/// pairs and report zero.
pub fn g1_error(relation: &Relation, fd: &Fd) -> Ratio {
    let lhs = partition_of(relation, fd.lhs);
    let both = lhs
        .intersect(&build_pli(relation, fd.rhs))
        .expect("same relation");
    g1_ratio(lhs.pair_count() - both.pair_count(), relation.row_count())
}

/// True when the relation is too small for g1 to mean anything.
pub fn is_degenerate(relation: &Relation) -> bool {
    relation.row_count() < 2
}

/// Violating pairs of `lhs -> rhs`, counting rhs codes cluster by cluster.
struct ViolationCounter<'a> {
    relation: &'a Relation,
    counts: Vec<Vec<u32>>,
    touched: Vec<u32>,
}

impl<'a> ViolationCounter<'a> {
    fn new(relation: &'a Relation) -> Self {
        let counts = (0..relation.attribute_count())
            .map(|a| vec![0; relation.dictionary_len(a)])
            .collect();
        ViolationCounter {
            relation,
            counts,
            touched: Vec::new(),
        }
    }

    fn violations(&mut self, lhs: &StrippedPartition, rhs: usize) -> u64 {
        let column = self.relation.column(rhs);
        let skip_nulls = self.relation.nulls_distinct();
        let counts = &mut self.counts[rhs];
        let mut total = 0;
        for cluster in lhs.clusters() {
            let mut agreeing = 0;
            for &row in cluster {
                let code = column[row as usize];
                if skip_nulls && code == NULL_ID {
                    continue;
                }
                let slot = &mut counts[code as usize];
                if *slot == 0 {
                    self.touched.push(code);
                }
                agreeing += *slot as u64;
                *slot += 1;
            }
            for &code in &self.touched {
                counts[code as usize] = 0;
            }
            self.touched.clear();
            total += pairs(cluster.len()) - agreeing;
        }
        total
    }
}

struct Node {
    attrs: AttrSet,
    pli: StrippedPartition,
    open: AttrSet,
}

/// All minimal approximate dependencies with g1 ≤ `threshold` and
/// `|lhs| ≤ max_lhs`, each carrying its exact error. Minimality is relative
/// to the same threshold: no proper subset of the lhs also stays within it.
pub fn discover_afds(
    relation: &Relation,
    threshold: Ratio,
    max_lhs: usize,
    exec: &ExecConfig,
) -> Result<Vec<Afd>> {
    let m = relation.attribute_count();
    if m == 0 {
        return Err(Error::NoAttributes);
    }
    if max_lhs == 0 {
        return Err(Error::invalid("max_lhs", "must be at least 1"));
    }
    let n = relation.row_count();
    let mut found = exec.install(|| -> Result<Vec<Afd>> {
        let mut found = Vec::new();
        let mut level = vec![Node {
            attrs: AttrSet::EMPTY,
            pli: StrippedPartition::whole(n),
            open: AttrSet::full(m),
        }];
        for size in 0..=max_lhs.min(m - 1) {
            exec.checkpoint()?;
            let results: Vec<(AttrSet, Vec<Afd>)> = level
                .par_iter()
                .map_init(
                    || ViolationCounter::new(relation),
                    |counter, node| {
                        let mut open = node.open.difference(node.attrs);
                        let mut afds = Vec::new();
                        for rhs in open {
                            let error = g1_ratio(counter.violations(&node.pli, rhs), n);
                            if error <= threshold {
                                afds.push(Afd {
                                    fd: Fd::new(node.attrs, rhs),
                                    error,
                                });
                                open = open.without(rhs);
                            }
                        }
                        (open, afds)
                    },
                )
                .collect();
            for (node, (open, afds)) in level.iter_mut().zip(results) {
                node.open = open;
                found.extend(afds);
            }
            level.retain(|node| !node.open.is_empty());
            if size == max_lhs {
                break;
            }
            level = next_level(relation, &level);
        }
        Ok(found)
    })?;
    found.sort_by_key(|a| a.fd);
    Ok(found)
}

fn next_level(relation: &Relation, level: &[Node]) -> Vec<Node> {
    if level.len() == 1 && level[0].attrs.is_empty() {
        let root = &level[0];
        return root
            .open
            .iter()
            .collect::<Vec<_>>()
            .into_par_iter()
            .filter_map(|a| {
                let open = root.open.without(a);
                (!open.is_empty()).then(|| Node {
                    attrs: AttrSet::single(a),
                    pli: build_pli(relation, a),
                    open,
                })
            })
            .collect();
    }
    let index: HashMap<AttrSet, usize> = level.iter().enumerate().map(|(i, n)| (n.attrs, i)).collect();
    let mut by_prefix: HashMap<AttrSet, Vec<usize>> = HashMap::new();
    for (i, node) in level.iter().enumerate() {
        let last = node.attrs.last().expect("non-empty node");
        by_prefix.entry(node.attrs.without(last)).or_default().push(i);
    }
    let mut candidates = Vec::new();
    for members in by_prefix.values() {
        for (k, &i) in members.iter().enumerate() {
            for &j in &members[k + 1..] {
                let y = level[i].attrs.union(level[j].attrs);
                let mut open = AttrSet::from_bits(u64::MAX);
                let mut complete = true;
                for b in y {
                    match index.get(&y.without(b)) {
                        Some(&s) => open = open.intersection(level[s].open),
                        None => {
                            complete = false;
                            break;
                        }
                    }
                }
                let open = open.difference(y);
                if complete && !open.is_empty() {
                    candidates.push((y, i, j, open));
                }
            }
        }
    }
    candidates.sort_unstable_by_key(|c| c.0);
    candidates
        .into_par_iter()
        .map(|(attrs, i, j, open)| Node {
            attrs,
            pli: level[i].pli.intersect(&level[j].pli).expect("same relation"),
            open,
        })
        .collect()
}

/// For every attribute `i`, the attributes `j ≠ i` with g1({i} → j) ≤
/// `threshold`, ascending.
pub fn single_attribute_afds(
    relation: &Relation,
    threshold: Ratio,
    exec: &ExecConfig,
) -> BTreeMap<usize, Vec<usize>> {
    let m = relation.attribute_count();
    let n = relation.row_count();
    exec.install(|| {
        (0..m)
            .into_par_iter()
            .map_init(
                || ViolationCounter::new(relation),
                |counter, lhs| {
                    let pli = build_pli(relation, lhs);
                    let rhs = (0..m)
                        .filter(|&j| j != lhs)
                        .filter(|&j| g1_ratio(counter.violations(&pli, j), n) <= threshold)
                        .collect();
                    (lhs, rhs)
                },
            )
            .collect()
    })
}
