//! Deterministic stream derivation.
//!
//! Every random quantity in the crate is drawn from a ChaCha stream whose key
//! is derived from an experiment seed plus a path of integer indices (theta
//! index, replication index, draw index, ...). Streams for distinct paths are
//! statistically independent, and the value of a stream never depends on how
//! many other streams were consumed or in which order — which is what makes
//! reports bitwise reproducible under any parallel schedule.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer; a strong 64-bit mixer.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a ChaCha stream keyed by `(root, path...)`.
pub fn stream(root: u64, path: &[u64]) -> ChaCha8Rng {
    let mut state = root ^ 0x6C77_6C69_6D00_0001; // crate-specific domain tag
    let mut acc = splitmix64(&mut state);
    for &p in path {
        state ^= p.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        acc ^= splitmix64(&mut state);
    }
    let mut key = [0u8; 32];
    let mut s = acc;
    for chunk in key.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut s).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// A uniform draw in the open interval (0, 1), safe to feed into inverse
/// CDFs (never exactly 0 or 1).
pub fn open_unit(rng: &mut ChaCha8Rng) -> f64 {
    use rand_chacha::rand_core::RngCore;
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
}
