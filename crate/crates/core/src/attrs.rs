use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Upper bound on the number of attributes a relation may carry.
pub const MAX_ATTRIBUTES: usize = 64;

/// A set of attribute indexes backed by a 64-bit mask.
///
/// Ordering is lexicographic over the ascending index lists, so `[] < [0] <
/// [0, 1] < [0, 2] < [1]`.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct AttrSet(u64);

impl AttrSet {
    pub const EMPTY: AttrSet = AttrSet(0);

    pub fn from_bits(bits: u64) -> Self {
        AttrSet(bits)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    /// All attributes `0..m`.
    pub fn full(m: usize) -> Self {
        debug_assert!(m <= MAX_ATTRIBUTES);
        if m == MAX_ATTRIBUTES {
            AttrSet(u64::MAX)
        } else {
            AttrSet((1u64 << m) - 1)
        }
    }

    pub fn single(attr: usize) -> Self {
        debug_assert!(attr < MAX_ATTRIBUTES);
        AttrSet(1u64 << attr)
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, attr: usize) -> bool {
        attr < MAX_ATTRIBUTES && self.0 & (1u64 << attr) != 0
    }

    pub fn with(self, attr: usize) -> Self {
        AttrSet(self.0 | (1u64 << attr))
    }

    pub fn without(self, attr: usize) -> Self {
        AttrSet(self.0 & !(1u64 << attr))
    }

    pub fn union(self, other: AttrSet) -> Self {
        AttrSet(self.0 | other.0)
    }

    pub fn intersection(self, other: AttrSet) -> Self {
        AttrSet(self.0 & other.0)
    }

    pub fn difference(self, other: AttrSet) -> Self {
        AttrSet(self.0 & !other.0)
    }

    pub fn is_subset(self, other: AttrSet) -> bool {
        self.0 & !other.0 == 0
    }

    /// Largest member, if any.
    pub fn last(self) -> Option<usize> {
        (self.0 != 0).then(|| 63 - self.0.leading_zeros() as usize)
    }

    pub fn iter(self) -> Iter {
        Iter(self.0)
    }

    pub fn to_vec(self) -> Vec<usize> {
        self.iter().collect()
    }
}

pub struct Iter(u64);

impl Iterator for Iter {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.0 == 0 {
            return None;
        }
        let i = self.0.trailing_zeros() as usize;
        self.0 &= self.0 - 1;
        Some(i)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.0.count_ones() as usize;
        (n, Some(n))
    }
}

impl ExactSizeIterator for Iter {}

impl IntoIterator for AttrSet {
    type Item = usize;
    type IntoIter = Iter;

    fn into_iter(self) -> Iter {
        self.iter()
    }
}

impl FromIterator<usize> for AttrSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        iter.into_iter().fold(AttrSet::EMPTY, AttrSet::with)
    }
}

impl Ord for AttrSet {
    fn cmp(&self, other: &Self) -> Ordering {
        self.iter().cmp(other.iter())
    }
}

impl PartialOrd for AttrSet {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for AttrSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl Serialize for AttrSet {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for AttrSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let items = Vec::<usize>::deserialize(d)?;
        if let Some(bad) = items.iter().find(|&&i| i >= MAX_ATTRIBUTES) {
            return Err(serde::de::Error::custom(format!(
                "attribute index {bad} exceeds {}",
                MAX_ATTRIBUTES - 1
            )));
        }
        Ok(items.into_iter().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexicographic_order() {
        let mut sets: Vec<AttrSet> = vec![
            [1].into_iter().collect(),
            [0, 2].into_iter().collect(),
            AttrSet::EMPTY,
            [0, 1].into_iter().collect(),
            [0].into_iter().collect(),
        ];
        sets.sort();
        let lists: Vec<Vec<usize>> = sets.into_iter().map(AttrSet::to_vec).collect();
        assert_eq!(lists, vec![vec![], vec![0], vec![0, 1], vec![0, 2], vec![1]]);
    }

    #[test]
    fn full_and_last() {
        assert_eq!(AttrSet::full(3).to_vec(), vec![0, 1, 2]);
        assert_eq!(AttrSet::full(64).len(), 64);
        assert_eq!(AttrSet::full(5).last(), Some(4));
        assert_eq!(AttrSet::EMPTY.last(), None);
    }
}
