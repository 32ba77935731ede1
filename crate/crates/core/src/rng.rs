//! Deterministic random substreams.
//!
//! Every random draw in a sweep comes from a ChaCha8 stream whose key mixes
//! the master seed, the purpose of the draw and the cell coordinates, and
//! whose stream number is the trial index. Results therefore do not depend
//! on how work is split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for; each purpose gets an independent key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    Placement = 1,
    Shadowing = 2,
    Fading = 3,
    Noise = 4,
    Bits = 5,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream for `(master, purpose, path)` positioned at substream `counter`.
pub fn substream(master: u64, purpose: Purpose, path: &[u64], counter: u64) -> ChaCha8Rng {
    let mut state = master ^ (purpose as u64).wrapping_mul(0xd1b5_4a32_d192_ed03);
    splitmix64(&mut state);
    for &p in path {
        state ^= p;
        state = splitmix64(&mut state);
    }
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(seed);
    rng.set_stream(counter);
    rng
}
