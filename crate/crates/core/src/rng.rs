//! Deterministic seed derivation.
//!
//! Every randomized stage of the pipeline (ray sampling, mutation draws,
//! annealer chains) owns a generator derived from the master seed and the
//! indices that identify the work item. Results are therefore reproducible
//! and independent of evaluation order and thread count.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags keep unrelated derivation paths from colliding even when
/// their index tuples coincide.
pub mod stream {
    pub const RAY_TABLE: u64 = 0x01;
    pub const RAY_EVAL: u64 = 0x02;
    pub const MUTATION: u64 = 0x03;
    pub const ANNEAL_CHAIN: u64 = 0x04;
    pub const SOLVE_ATTEMPT: u64 = 0x05;
}

/// SplitMix64 output function. Fixed constants, stable across releases;
/// do not swap for `DefaultHasher`, whose algorithm is unspecified.
#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed by absorbing `words` into `master` one at a time.
pub fn derive_seed(master: u64, words: &[u64]) -> u64 {
    let mut state = splitmix64(master);
    for &w in words {
        state = splitmix64(state ^ splitmix64(w));
    }
    state
}

/// A generator for the given derivation path.
pub fn derived_rng(master: u64, words: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, words))
}
