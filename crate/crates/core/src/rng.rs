//! Seeded random streams.
//!
//! Every stochastic component draws from its own ChaCha stream whose seed is
//! derived from a base seed and a list of labels, so streams never overlap
//! and runs replay bit-identically.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes `labels` into `base` to obtain an independent seed.
pub fn derive_seed(base: u64, labels: &[u64]) -> u64 {
    labels
        .iter()
        .fold(splitmix64(base), |acc, &l| splitmix64(acc ^ splitmix64(l)))
}

/// Stable numeric label for a string tag.
pub fn label(tag: &str) -> u64 {
    // FNV-1a
    tag.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

pub fn stream(base: u64, labels: &[u64]) -> SimRng {
    SimRng::seed_from_u64(derive_seed(base, labels))
}

/// Samples an index from a discrete distribution given as `(index, prob)` pairs.
pub fn sample_sparse(pairs: &[(usize, f64)], u: f64) -> usize {
    let mut acc = 0.0;
    for &(i, p) in pairs {
        acc += p;
        if u < acc {
            return i;
        }
    }
    pairs.last().expect("non-empty distribution").0
}

/// Samples an index from a dense probability vector.
pub fn sample_dense(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}
