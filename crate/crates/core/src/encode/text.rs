//! Character n-gram helpers shared by the similarity and MinHash encoders.

use std::collections::BTreeSet;

/// Lower-cased character n-grams of `s` padded with one space on each side.
/// Strings shorter than `n` after padding yield themselves as a single gram.
pub fn ngrams(s: &str, n: usize) -> BTreeSet<String> {
    let padded: Vec<char> = std::iter::once(' ')
        .chain(s.to_lowercase().chars())
        .chain(std::iter::once(' '))
        .collect();
    if padded.len() <= n {
        return BTreeSet::from([padded.into_iter().collect()]);
    }
    padded.windows(n).map(|w| w.iter().collect()).collect()
}

pub fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

/// MinHash signature in [0, 1) under `len` seeded hash functions.
/// An empty gram set maps to all ones.
pub fn minhash(grams: &BTreeSet<String>, len: usize, seed: u64) -> Vec<f64> {
    (0..len)
        .map(|j| {
            let salt = splitmix64(seed ^ splitmix64(j as u64));
            grams
                .iter()
                .map(|g| splitmix64(fnv1a(g.as_bytes()) ^ salt))
                .min()
                .map_or(1.0, |h| (h >> 11) as f64 / (1u64 << 53) as f64)
        })
        .collect()
}
