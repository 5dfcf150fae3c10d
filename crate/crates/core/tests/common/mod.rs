#![allow(dead_code)]

use std::collections::BTreeMap;

use fdscope_core::{AttrSet, Ratio, Relation};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random table over small integer domains; `null_rate` of cells are null.
pub fn random_relation(seed: u64, max_attrs: usize, max_rows: usize, null_rate: f64) -> Relation {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = rng.gen_range(1..=max_attrs);
    let n = rng.gen_range(0..=max_rows);
    let domains: Vec<u32> = (0..m).map(|_| rng.gen_range(1..=5)).collect();
    let names = (0..m).map(|i| format!("a{i}")).collect();
    let rows = (0..n)
        .map(|_| {
            domains
                .iter()
                .map(|&d| {
                    if rng.gen_bool(null_rate) {
                        None
                    } else {
                        Some(rng.gen_range(0..d).to_string())
                    }
                })
                .collect()
        })
        .collect();
    Relation::from_cells(names, rows, false).unwrap()
}

/// Cell equality used by every oracle: nulls equal each other unless the
/// relation says otherwise.
pub fn cells_equal(r: &Relation, a: usize, b: usize, attr: usize) -> bool {
    let (x, y) = (r.token(a, attr), r.token(b, attr));
    if r.nulls_distinct() && (x.is_none() || y.is_none()) {
        return false;
    }
    x == y
}

pub fn agree_on(r: &Relation, a: usize, b: usize, attrs: AttrSet) -> bool {
    attrs.iter().all(|attr| cells_equal(r, a, b, attr))
}

/// Unordered row pairs agreeing on `lhs` but not on `rhs`.
pub fn violating_pairs(r: &Relation, lhs: AttrSet, rhs: usize) -> u64 {
    let n = r.row_count();
    let mut v = 0;
    for a in 0..n {
        for b in a + 1..n {
            if agree_on(r, a, b, lhs) && !cells_equal(r, a, b, rhs) {
                v += 1;
            }
        }
    }
    v
}

pub fn pairwise_g1(r: &Relation, lhs: AttrSet, rhs: usize) -> Ratio {
    let n = r.row_count() as u64;
    if n < 2 {
        return Ratio::ZERO;
    }
    Ratio::new(violating_pairs(r, lhs, rhs), n * (n - 1) / 2)
}

/// Every subset of `0..m` not containing `rhs`, of size at most `max`.
pub fn lhs_candidates(m: usize, rhs: usize, max: usize) -> Vec<AttrSet> {
    (0u64..(1 << m))
        .map(AttrSet::from_bits)
        .filter(|s| !s.contains(rhs) && s.len() <= max)
        .collect()
}

/// Minimal (lhs, rhs) pairs satisfying `valid`, by exhaustive enumeration.
pub fn brute_force_minimal(
    m: usize,
    max_lhs: usize,
    mut valid: impl FnMut(AttrSet, usize) -> bool,
) -> Vec<(AttrSet, usize)> {
    let mut out = Vec::new();
    for rhs in 0..m {
        let cands = lhs_candidates(m, rhs, max_lhs);
        let ok: Vec<AttrSet> = cands.iter().copied().filter(|&x| valid(x, rhs)).collect();
        for &x in &ok {
            if !ok.iter().any(|&y| y != x && y.is_subset(x)) {
                out.push((x, rhs));
            }
        }
    }
    out.sort_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(&b.0)));
    out
}

/// Groups rows by their lhs tokens without going through partitions.
pub fn group_rows(r: &Relation, lhs: AttrSet) -> Vec<Vec<usize>> {
    let mut groups: BTreeMap<Vec<Option<String>>, Vec<usize>> = BTreeMap::new();
    for row in 0..r.row_count() {
        let key = lhs.iter().map(|a| r.token(row, a).map(str::to_owned)).collect();
        groups.entry(key).or_default().push(row);
    }
    groups.into_values().filter(|g| g.len() >= 2).collect()
}

/// Full-matrix edit distance.
pub fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut dp = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in dp.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in dp[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = dp[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            dp[i][j] = sub.min(dp[i - 1][j] + 1).min(dp[i][j - 1] + 1);
        }
    }
    dp[a.len()][b.len()]
}
