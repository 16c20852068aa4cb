//! Counter-keyed random substreams.
//!
//! Every random block in the pipeline (a Gibbs step for one country, the
//! rotation search for one posterior draw) gets its own generator whose key
//! is derived from the master seed and a tuple of counters. Results therefore
//! do not depend on which worker thread executes the block, or in what order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub type StreamRng = ChaCha12Rng;

/// Block tags, so that different stages never share a key.
pub mod tag {
    pub const BETA: u64 = 1;
    pub const COMMON_MEAN: u64 = 2;
    pub const LAMBDA1: u64 = 3;
    pub const SIGMA: u64 = 4;
    pub const GAMMA: u64 = 5;
    pub const ROTATION: u64 = 16;
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for the block identified by `counters` under `seed`.
pub fn substream(seed: u64, counters: &[u64]) -> StreamRng {
    let mut state = seed;
    let mut acc = splitmix64(&mut state);
    for &c in counters {
        state ^= c.wrapping_mul(0xD6E8_FEB8_6659_FD93).wrapping_add(acc);
        acc = splitmix64(&mut state);
    }
    let mut key = [0u8; 32];
    for chunk in key.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha12Rng::from_seed(key)
}
