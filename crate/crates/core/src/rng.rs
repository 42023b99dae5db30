//! Seeded random streams.
//!
//! Every Monte Carlo replicate draws from its own ChaCha8 stream keyed by
//! `(master seed, replicate index)`, so results do not depend on how
//! replicates are scheduled across threads.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Generator for the master seed alone.
pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent substream `index` of the master `seed`.
pub fn substream(seed: u64, index: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Derives a child seed for a named stage of a pipeline.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    // stream 0 is reserved for `seeded`; tags live in the upper half
    substream(seed, tag | (1 << 63)).next_u64()
}

/// Uniform in [0, 1) compared against `p`; exact for p = 0 and p = 1.
#[inline]
pub fn bernoulli<R: rand::Rng + ?Sized>(rng: &mut R, p: f64) -> bool {
    rng.random::<f64>() < p
}
