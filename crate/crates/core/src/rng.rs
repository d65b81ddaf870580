//! Seeded randomness.
//!
//! Everything stochastic in the crate draws from a ChaCha8 stream created
//! here, so a run is fully determined by its seed regardless of platform.
//! Independent consumers (data generation, weight init, shuffling, probes)
//! derive their own sub-seed with [`derive`] instead of sharing one stream,
//! which keeps a change in one stage from silently reshuffling another.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The RNG used throughout the crate.
pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent sub-seed for a named stream (splitmix64 finalizer).
pub fn derive(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream tags for [`derive`]. Keeping them in one place avoids collisions.
pub mod stream {
    pub const DATA: u64 = 1;
    pub const INIT: u64 = 2;
    pub const SHUFFLE: u64 = 3;
    pub const PROBE: u64 = 4;
}
