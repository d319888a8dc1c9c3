//! Hierarchical seed splitting: every consumer derives its own stream from
//! the run's root seed, so adding a consumer never shifts another's draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Named random-stream consumers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stream {
    Scene = 1,
    InitialViews = 2,
    MonteCarlo = 3,
    RandomPolicy = 4,
}

#[inline]
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a root seed with a path of integers into a child seed.
pub fn derive_seed(root: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix(root), |acc, &p| splitmix(acc ^ splitmix(p)))
}

pub fn stream_rng(root: u64, stream: Stream, path: &[u64]) -> ChaCha8Rng {
    let mut full = Vec::with_capacity(path.len() + 1);
    full.push(stream as u64);
    full.extend_from_slice(path);
    ChaCha8Rng::seed_from_u64(derive_seed(root, &full))
}
