//! Seeded, order-independent random streams.
//!
//! Every logical consumer (one perfect draw, one oracle draw, one BPCA
//! dimension) gets its own ChaCha8 stream selected by `(seed, stream)`, so
//! results do not depend on how work is scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Smallest uniform handed to a sweep; the largest is `1 - UNIFORM_FLOOR`.
pub const UNIFORM_FLOOR: f64 = 1.0 / (1u64 << 53) as f64;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A Uniform(0, 1) draw clamped into `[2^-53, 1 - 2^-53]`.
pub fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random::<f64>()
        .clamp(UNIFORM_FLOOR, 1.0 - UNIFORM_FLOOR)
}
