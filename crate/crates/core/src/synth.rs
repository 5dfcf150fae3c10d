//! Seeded table generators with planting logs for tests and benches.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::attrs::AttrSet;
use crate::fd::Fd;
use crate::pli::pairs;
use crate::ratio::Ratio;
use crate::relation::Relation;

const CITIES: [&str; 20] = [
    "amsterdam", "barcelona", "berlin", "bordeaux", "brussels", "budapest", "copenhagen", "dublin",
    "edinburgh", "florence", "geneva", "hamburg", "helsinki", "lisbon", "madrid", "marseille",
    "munich", "porto", "prague", "vienna",
];
const REGIONS: [&str; 5] = ["north", "south", "east", "west", "central"];
const FIRST: [&str; 16] = [
    "ada", "alan", "barbara", "claude", "donald", "edsger", "frances", "grace", "john", "ken",
    "leslie", "margaret", "niklaus", "radia", "tony", "vint",
];
const LAST: [&str; 16] = [
    "allen", "backus", "cerf", "dijkstra", "hamilton", "hopper", "hoare", "kay", "knuth", "lamport",
    "liskov", "lovelace", "perlman", "ritchie", "thompson", "wirth",
];
const SEGMENTS: [&str; 4] = ["retail", "wholesale", "public", "online"];

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn build(names: &[&str], rows: Vec<Vec<String>>) -> Relation {
    let names = names.iter().map(|s| s.to_string()).collect();
    let rows = rows.into_iter().map(|r| r.into_iter().map(Some).collect()).collect();
    Relation::from_cells(names, rows, false).expect("generated tables are rectangular")
}

/// Applies one random substitution, insertion or deletion, avoiding every
/// value in `forbidden`.
pub fn single_edit(rng: &mut impl Rng, word: &str, forbidden: &BTreeSet<String>) -> String {
    let alphabet: Vec<char> = ('a'..='z').collect();
    loop {
        let mut chars: Vec<char> = word.chars().collect();
        let pos = rng.gen_range(0..=chars.len());
        match rng.gen_range(0..3) {
            0 if pos < chars.len() => {
                let c = *alphabet.choose(rng).unwrap();
                if c == chars[pos] {
                    continue;
                }
                chars[pos] = c;
            }
            1 => chars.insert(pos, *alphabet.choose(rng).unwrap()),
            2 if pos < chars.len() && chars.len() > 1 => {
                chars.remove(pos);
            }
            _ => continue,
        }
        let out: String = chars.into_iter().collect();
        if out != word && !forbidden.contains(&out) {
            return out;
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TypoPlant {
    pub row: usize,
    pub original: String,
    pub perturbed: String,
}

#[derive(Debug, Clone)]
pub struct TypoFixture {
    pub relation: Relation,
    /// `city_id -> city_name`, exact before perturbation.
    pub planted: Fd,
    pub plants: Vec<TypoPlant>,
    /// g1 of the planted dependency after perturbation, counted from the log.
    pub induced_g1: Ratio,
}

/// Columns `id, city_id, city_name, region, amount`; `rate` of the rows get a
/// single-edit typo in `city_name`.
pub fn typo_fixture(seed: u64, n: usize, rate: f64) -> TypoFixture {
    let mut rng = rng(seed);
    let forbidden: BTreeSet<String> = CITIES.iter().map(|s| s.to_string()).collect();
    let city_of: Vec<usize> = (0..n).map(|_| rng.gen_range(0..CITIES.len())).collect();
    let mut rows: Vec<Vec<String>> = city_of
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            vec![
                (i + 1).to_string(),
                (100 + c).to_string(),
                CITIES[c].to_string(),
                REGIONS[c % REGIONS.len()].to_string(),
                format!("{:.2}", rng.gen_range(1.0..500.0)),
            ]
        })
        .collect();

    let count = (n as f64 * rate).round() as usize;
    let mut targets: Vec<usize> = (0..n).collect();
    targets.shuffle(&mut rng);
    targets.truncate(count);
    targets.sort_unstable();
    let plants: Vec<TypoPlant> = targets
        .into_iter()
        .map(|row| {
            let original = rows[row][2].clone();
            let perturbed = single_edit(&mut rng, &original, &forbidden);
            rows[row][2] = perturbed.clone();
            TypoPlant { row, original, perturbed }
        })
        .collect();

    let mut groups: BTreeMap<usize, BTreeMap<&str, u64>> = BTreeMap::new();
    for (row, &c) in city_of.iter().enumerate() {
        *groups.entry(c).or_default().entry(rows[row][2].as_str()).or_default() += 1;
    }
    let violating: u64 = groups
        .values()
        .map(|counts| {
            let size: u64 = counts.values().sum();
            pairs(size as usize) - counts.values().map(|&c| pairs(c as usize)).sum::<u64>()
        })
        .sum();
    let induced_g1 = if n < 2 { Ratio::ZERO } else { Ratio::new(violating, pairs(n)) };

    TypoFixture {
        relation: build(&["id", "city_id", "city_name", "region", "amount"], rows),
        planted: Fd::new(AttrSet::single(1), 2),
        plants,
        induced_g1,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DuplicatePlant {
    /// Row of the original entity.
    pub original: u32,
    /// Row of the planted copy.
    pub copy: u32,
    pub perturbed_attrs: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct DedupFixture {
    pub relation: Relation,
    pub plants: Vec<DuplicatePlant>,
}

impl DedupFixture {
    /// Planted pairs as ascending row tuples.
    pub fn planted_pairs(&self) -> BTreeSet<(u32, u32)> {
        self.plants
            .iter()
            .map(|p| (p.original.min(p.copy), p.original.max(p.copy)))
            .collect()
    }
}

/// Columns `name, city, zip, phone, segment`. Each planted copy keeps the
/// name and perturbs at most two other attributes; rows are shuffled.
pub fn dedup_fixture(seed: u64, entities: usize, duplicates: usize) -> DedupFixture {
    assert!(duplicates <= entities, "more duplicates than entities");
    let mut rng = rng(seed);
    let mut names = BTreeSet::new();
    let mut phones = BTreeSet::new();
    let mut base: Vec<Vec<String>> = Vec::with_capacity(entities);
    while base.len() < entities {
        let name = format!(
            "{} {} {}",
            FIRST.choose(&mut rng).unwrap(),
            LAST.choose(&mut rng).unwrap(),
            rng.gen_range(1..100)
        );
        if !names.insert(name.clone()) {
            continue;
        }
        let phone = loop {
            let p = format!("+1-555-{:04}-{:03}", rng.gen_range(0..10000), rng.gen_range(0..1000));
            if phones.insert(p.clone()) {
                break p;
            }
        };
        let city = rng.gen_range(0..CITIES.len());
        base.push(vec![
            name,
            CITIES[city].to_string(),
            format!("{}", 10000 + city * 37),
            phone,
            SEGMENTS.choose(&mut rng).unwrap().to_string(),
        ]);
    }

    let mut sources: Vec<usize> = (0..entities).collect();
    sources.shuffle(&mut rng);
    sources.truncate(duplicates);
    let mut all = base.clone();
    let mut copies = Vec::with_capacity(duplicates);
    for &src in &sources {
        let mut row = base[src].clone();
        let mut attrs = vec![1usize, 2, 3, 4];
        attrs.shuffle(&mut rng);
        attrs.truncate(rng.gen_range(0..=2));
        attrs.sort_unstable();
        for &a in &attrs {
            row[a] = match a {
                1 => row[1].to_uppercase() + "x",
                2 => format!("{}", 90000 + rng.gen_range(0..999)),
                3 => format!("{}-0", row[3]),
                _ => format!("{}-x", row[4]),
            };
        }
        copies.push((src, all.len(), attrs));
        all.push(row);
    }

    let mut order: Vec<usize> = (0..all.len()).collect();
    order.shuffle(&mut rng);
    let mut position = vec![0u32; all.len()];
    for (pos, &old) in order.iter().enumerate() {
        position[old] = pos as u32;
    }
    let rows = order.iter().map(|&old| all[old].clone()).collect();
    let plants = copies
        .into_iter()
        .map(|(src, copy, perturbed_attrs)| DuplicatePlant {
            original: position[src],
            copy: position[copy],
            perturbed_attrs,
        })
        .collect();
    DedupFixture {
        relation: build(&["name", "city", "zip", "phone", "segment"], rows),
        plants,
    }
}

#[derive(Debug, Clone)]
pub struct AnomalyFixture {
    pub first: Relation,
    pub second: Relation,
    /// The only dependency of `first` broken in `second`: `A -> B`.
    pub broken: Fd,
    pub perturbed_row: usize,
    pub bump: i64,
}

/// Two partitions over `K, A, B, C` with `A = K mod 4`, `B = 10 A` and
/// `C = K mod 3`. The second partition adds `bump` to `B` in one row.
pub fn anomaly_fixture(seed: u64, n: usize, bump: i64) -> AnomalyFixture {
    assert!(n >= 24, "need two rows per (A, C) combination");
    assert!(bump != 0 && bump % 10 != 0, "bump must leave the B domain");
    let mut rng = rng(seed);
    let make = |k: usize| vec![k as i64, (k % 4) as i64, 10 * (k % 4) as i64, (k % 3) as i64];
    let first_rows: Vec<Vec<i64>> = (0..n).map(make).collect();
    let mut second_rows: Vec<Vec<i64>> = (n..2 * n).map(make).collect();
    let perturbed_row = rng.gen_range(0..n);
    second_rows[perturbed_row][2] += bump;
    let to_strings = |rows: Vec<Vec<i64>>| -> Vec<Vec<String>> {
        rows.into_iter().map(|r| r.into_iter().map(|v| v.to_string()).collect()).collect()
    };
    AnomalyFixture {
        first: build(&["K", "A", "B", "C"], to_strings(first_rows)).with_name("partition-1"),
        second: build(&["K", "A", "B", "C"], to_strings(second_rows)).with_name("partition-2"),
        broken: Fd::new(AttrSet::single(1), 2),
        perturbed_row,
        bump,
    }
}

/// Wide table for throughput checks. A third of the columns are functions of
/// earlier columns so that the lattice has dependencies to find.
pub fn wide_relation(seed: u64, attributes: usize, rows: usize) -> Relation {
    let mut rng = rng(seed);
    let domains: Vec<u64> = (0..attributes).map(|i| [2, 5, 10, 50, 200, 1000, 10000][i % 7]).collect();
    let mut columns: Vec<Vec<u64>> = Vec::with_capacity(attributes);
    for (i, &d) in domains.iter().enumerate() {
        let col: Vec<u64> = if i >= 3 && i % 3 == 0 {
            let (a, b) = (&columns[i - 1], &columns[i - 3]);
            (0..rows).map(|r| (a[r] * 31 + b[r]) % d).collect()
        } else {
            (0..rows).map(|_| rng.gen_range(0..d)).collect()
        };
        columns.push(col);
    }
    let names: Vec<String> = (0..attributes).map(|i| format!("c{i}")).collect();
    let cells = (0..rows)
        .map(|r| columns.iter().map(|c| Some(c[r].to_string())).collect())
        .collect();
    Relation::from_cells(names, cells, false).expect("generated tables are rectangular")
}
