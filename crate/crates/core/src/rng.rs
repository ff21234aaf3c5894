//! Seed derivation. Every stochastic routine takes a `u64` seed and builds its
//! own generator, so results depend only on (parameters, seed).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Generator for a master seed.
pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream `index` of the master seed.
pub fn stream(seed: u64, index: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Derives a child seed from a master seed and a textual task label (FNV-1a
/// over the label, mixed with splitmix64). Stable across platforms and runs.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    splitmix64(seed ^ splitmix64(h))
}

/// Child seed for replica `index` of a master seed.
pub fn derive_index(seed: u64, index: u64) -> u64 {
    splitmix64(seed.wrapping_add(splitmix64(index.wrapping_add(0x9e37_79b9_7f4a_7c15))))
}

/// Runs `f` for replicas `0..n` in parallel, in order. Replica `i` draws
/// from its own generator `stream(seed, i)`, so results are independent of
/// the thread count and replicas stay aligned across calls that share a seed.
pub fn par_replicas<T, F>(n: usize, seed: u64, f: F) -> crate::Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut Rng, usize) -> crate::Result<T> + Sync,
{
    use rayon::prelude::*;
    (0..n)
        .into_par_iter()
        .map(|i| f(&mut stream(seed, i as u64), i))
        .collect()
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
