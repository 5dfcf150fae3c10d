//! Stripped partitions (position list indexes).

use crate::attrs::AttrSet;
use crate::error::{Error, Result};
use crate::relation::{Relation, NULL_ID};

/// Equivalence classes of rows agreeing on `attrs`, singletons removed.
///
/// Rows inside a cluster are ascending and clusters are ordered by their
/// smallest row, so two partitions of the same attribute set compare equal
/// with `==`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrippedPartition {
    attrs: AttrSet,
    clusters: Vec<Vec<u32>>,
    n: usize,
}

const UNSET: u32 = u32::MAX;

impl StrippedPartition {
    /// Partition of the empty attribute set: all rows in one class.
    pub fn whole(n: usize) -> Self {
        let clusters = if n >= 2 {
            vec![(0..n as u32).collect()]
        } else {
            Vec::new()
        };
        StrippedPartition {
            attrs: AttrSet::EMPTY,
            clusters,
            n,
        }
    }

    /// Builds from raw clusters, canonicalising order and stripping singletons.
    pub fn from_clusters(attrs: AttrSet, n: usize, clusters: Vec<Vec<u32>>) -> Self {
        let mut clusters: Vec<Vec<u32>> = clusters
            .into_iter()
            .filter(|c| c.len() >= 2)
            .map(|mut c| {
                c.sort_unstable();
                c
            })
            .collect();
        clusters.sort_unstable_by_key(|c| c[0]);
        StrippedPartition { attrs, clusters, n }
    }

    pub fn attrs(&self) -> AttrSet {
        self.attrs
    }

    pub fn clusters(&self) -> &[Vec<u32>] {
        &self.clusters
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    /// Σ|c| − |clusters|; zero iff the attribute set is a key.
    pub fn error(&self) -> usize {
        self.row_total() - self.clusters.len()
    }

    /// Rows covered by non-singleton clusters.
    pub fn row_total(&self) -> usize {
        self.clusters.iter().map(Vec::len).sum()
    }

    /// Σ C(|c|, 2): unordered row pairs agreeing on the attribute set.
    pub fn pair_count(&self) -> u64 {
        self.clusters.iter().map(|c| pairs(c.len())).sum()
    }

    /// Refines `self` by `other`; rows stay together iff together in both.
    pub fn intersect(&self, other: &StrippedPartition) -> Result<StrippedPartition> {
        if self.n != other.n {
            return Err(Error::RowCountMismatch(self.n, other.n));
        }
        let mut probe = vec![UNSET; self.n];
        for (id, cluster) in other.clusters.iter().enumerate() {
            for &row in cluster {
                probe[row as usize] = id as u32;
            }
        }
        let mut out = Vec::new();
        let mut groups: Vec<Vec<u32>> = vec![Vec::new(); other.clusters.len()];
        let mut touched: Vec<u32> = Vec::new();
        for cluster in &self.clusters {
            for &row in cluster {
                let id = probe[row as usize];
                if id == UNSET {
                    continue;
                }
                let group = &mut groups[id as usize];
                if group.is_empty() {
                    touched.push(id);
                }
                group.push(row);
            }
            for &id in &touched {
                let group = std::mem::take(&mut groups[id as usize]);
                if group.len() >= 2 {
                    out.push(group);
                }
            }
            touched.clear();
        }
        // Rows are visited in ascending order within each input cluster, so
        // each group is already sorted; only cluster order needs fixing.
        out.sort_unstable_by_key(|c| c[0]);
        Ok(StrippedPartition {
            attrs: self.attrs.union(other.attrs),
            clusters: out,
            n: self.n,
        })
    }
}

pub(crate) fn pairs(size: usize) -> u64 {
    let s = size as u64;
    s * s.saturating_sub(1) / 2
}

/// Partition of a single attribute. Null rows form one class unless the
/// relation treats nulls as distinct.
pub fn build_pli(relation: &Relation, attr: usize) -> StrippedPartition {
    let column = relation.column(attr);
    let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); relation.dictionary_len(attr)];
    for (row, &code) in column.iter().enumerate() {
        if code == NULL_ID && relation.nulls_distinct() {
            continue;
        }
        buckets[code as usize].push(row as u32);
    }
    let mut clusters: Vec<Vec<u32>> = buckets.into_iter().filter(|b| b.len() >= 2).collect();
    clusters.sort_unstable_by_key(|c| c[0]);
    StrippedPartition {
        attrs: AttrSet::single(attr),
        clusters,
        n: relation.row_count(),
    }
}

/// Partition of an arbitrary attribute set by iterated intersection.
pub fn partition_of(relation: &Relation, attrs: AttrSet) -> StrippedPartition {
    let mut iter = attrs.iter();
    let Some(first) = iter.next() else {
        return StrippedPartition::whole(relation.row_count());
    };
    let mut acc = build_pli(relation, first);
    for attr in iter {
        if acc.is_empty() {
            acc.attrs = acc.attrs.with(attr);
            continue;
        }
        acc = acc
            .intersect(&build_pli(relation, attr))
            .expect("same relation");
    }
    acc
}
