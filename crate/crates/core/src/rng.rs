//! Deterministic random substreams keyed by (master seed, index, purpose).
//!
//! Every stochastic task derives its own ChaCha stream from the key, so
//! replicates can run in any order and on any number of workers while
//! producing identical results.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub const PURPOSE_COVARIATES: u64 = 0x636f7661; // "cova"
pub const PURPOSE_ALLOCATION: u64 = 0x616c6c6f; // "allo"
pub const PURPOSE_OUTCOME: u64 = 0x6f757463; // "outc"
pub const PURPOSE_BOOTSTRAP: u64 = 0x626f6f74; // "boot"

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn substream_seed(master: u64, index: u64, purpose: u64) -> u64 {
    mix(mix(mix(master) ^ index) ^ purpose)
}

pub fn substream(master: u64, index: u64, purpose: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(substream_seed(master, index, purpose))
}
