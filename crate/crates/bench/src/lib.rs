//! Inputs shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Pairs of lowercase words, about half of them one or two edits apart.
pub fn word_pairs(seed: u64, count: usize, len: usize) -> Vec<(String, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let word = |rng: &mut ChaCha8Rng| -> String { (0..len).map(|_| rng.gen_range(b'a'..=b'z') as char).collect() };
    (0..count)
        .map(|_| {
            let a = word(&mut rng);
            let b = if rng.gen_bool(0.5) {
                let mut chars: Vec<char> = a.chars().collect();
                for _ in 0..rng.gen_range(1..=2) {
                    let i = rng.gen_range(0..chars.len());
                    chars[i] = rng.gen_range(b'a'..=b'z') as char;
                }
                chars.into_iter().collect()
            } else {
                word(&mut rng)
            };
            (a, b)
        })
        .collect()
}
