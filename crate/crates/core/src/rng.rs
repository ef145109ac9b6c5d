//! Keyed random streams.
//!
//! Every random quantity in a run is drawn from a ChaCha stream whose seed is
//! derived from a root seed and a tuple of indices (experiment, drop, fading
//! realization, ...). Any subset of the work can therefore be recomputed in
//! isolation, in any order and on any number of threads, and produce the same
//! numbers as a serial run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream tags. Keep them distinct so unrelated draws never share a stream.
pub mod tag {
    pub const USER_DROP: u64 = 0x5553_4552;
    pub const FADING: u64 = 0x4641_4445;
    pub const VALIDATE: u64 = 0x5641_4c49;
    pub const SCHEDULE: u64 = 0x5343_4845;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mix a root seed with a key path into a 64-bit stream seed.
pub fn stream_seed(root: u64, keys: &[u64]) -> u64 {
    keys.iter()
        .fold(splitmix64(root), |acc, &k| splitmix64(acc ^ splitmix64(k)))
}

/// A generator for the stream identified by `(root, keys)`.
pub fn stream(root: u64, keys: &[u64]) -> SimRng {
    SimRng::seed_from_u64(stream_seed(root, keys))
}
