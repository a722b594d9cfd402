//! Deterministic random-number plumbing.
//!
//! Every stochastic component of the crate draws from a [`ChaCha8Rng`] whose
//! 256-bit key is derived from a 64-bit master seed and a replication index
//! by the fixed mixing scheme below. The derivation is documented bit-exactly
//! so that results can be reproduced outside this crate:
//!
//! 1. `state = master_seed XOR ((index + 1) * 0x9E3779B97F4A7C15)`, with
//!    wrapping 64-bit arithmetic;
//! 2. four successive outputs of the SplitMix64 generator started at `state`
//!    (see [`splitmix64_next`]) are written little-endian into the 32-byte
//!    ChaCha key, first output first.
//!
//! SplitMix64 is an avalanche-quality bijective mixer, so distinct
//! `(master_seed, index)` pairs yield uncorrelated, collision-free keys
//! without any coordination between workers.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Golden-ratio increment of the SplitMix64 stream.
pub const SPLITMIX64_INCREMENT: u64 = 0x9E3779B97F4A7C15;

/// Advance a SplitMix64 generator one step and return its output.
///
/// This is the reference algorithm: add the golden-ratio constant to the
/// state, then finalize with two xor-multiply rounds and a closing xor-shift
/// (multipliers `0xBF58476D1CE4E5B9` and `0x94D049BB133111EB`).
#[inline]
pub fn splitmix64_next(state: &mut u64) -> u64 {
    *state = state.wrapping_add(SPLITMIX64_INCREMENT);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// The 256-bit ChaCha key for replication `index` under `master_seed`.
pub fn replication_key(master_seed: u64, index: u64) -> [u8; 32] {
    let mut state = master_seed ^ index.wrapping_add(1).wrapping_mul(SPLITMIX64_INCREMENT);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64_next(&mut state).to_le_bytes());
    }
    key
}

/// The generator owned by replication `index` of an experiment.
pub fn replication_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(replication_key(master_seed, index))
}
