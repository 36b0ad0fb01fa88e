//! Deterministic derivation of independent random substreams.
//!
//! Every random quantity in the crate is drawn from a `ChaCha8Rng` seeded with
//! `derive_seed(master, stream, index)`. The mapping is a fixed SplitMix64
//! mix, so a replicate or repetition depends only on its own coordinates and
//! never on execution order or worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tag for the per-repetition data generator in Monte Carlo runs.
pub const STREAM_DATA: u64 = 0x6461_7461;
/// Stream tag for the per-repetition bootstrap master seed in Monte Carlo runs.
pub const STREAM_BOOT: u64 = 0x626f_6f74;
/// Stream tag for the multiplier vector of a single bootstrap replicate.
pub const STREAM_MULTIPLIER: u64 = 0x6d75_6c74;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of substream `index` of kind `stream` under `master`.
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ stream) ^ index)
}

pub fn substream(master: u64, stream: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, stream, index))
}
