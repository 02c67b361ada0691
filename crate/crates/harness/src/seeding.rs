//! Child random streams.
//!
//! Every trial owns a ChaCha8 stream seeded from `(master, grid, trial)`
//! through SplitMix64 finalizers, so results do not depend on which worker
//! runs the trial or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 output function.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn child_seed(master: u64, grid: u64, trial: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ grid) ^ trial)
}

pub fn child_rng(master: u64, grid: u64, trial: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(child_seed(master, grid, trial))
}

/// Independent sub-stream `tag` of a child seed, for consumers that must not
/// perturb the main stream (e.g. the random baseline).
pub fn substream(seed: u64, tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(tag.wrapping_add(0xA5A5))))
}
