//! Sub-seed derivation.
//!
//! Every random stream in a run is derived from one root seed with a fixed
//! counter scheme: `sub_seed(root, stream) = splitmix64(root ^ (stream * 0x9E37_79B9_7F4A_7C15))`.
//! Stream numbers are listed in [`Stream`] and never reused.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Split = 1,
    Init = 2,
    Shuffle = 3,
    Synth = 4,
    RandomBaseline = 5,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn sub_seed(root: u64, stream: Stream) -> u64 {
    derive(root, stream as u64)
}

/// Counter-indexed derivation used for nested streams (per layer, per head).
pub fn derive(root: u64, counter: u64) -> u64 {
    splitmix64(root ^ counter.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
