//! Deterministic random streams.
//!
//! Every stochastic operation takes an explicit generator. Independent streams
//! are derived from a run seed plus a list of labels (reader id, density role,
//! purpose), so results never depend on how work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used throughout the crate.
pub type Stream = ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// Mixes a seed with a sequence of labels into a new 64-bit seed.
pub fn derive_seed(seed: u64, labels: &[&str]) -> u64 {
    labels.iter().fold(splitmix(seed), |acc, label| {
        splitmix(acc ^ fnv1a(label.as_bytes()))
    })
}

/// A generator for the stream identified by `seed` and `labels`.
pub fn stream(seed: u64, labels: &[&str]) -> Stream {
    Stream::seed_from_u64(derive_seed(seed, labels))
}
