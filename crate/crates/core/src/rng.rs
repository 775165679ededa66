//! Seeded randomness. ChaCha8 seeded from a single `u64`; every index draw goes
//! through a `u64` range so streams do not depend on the platform's `usize`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub(crate) type Stream = ChaCha8Rng;

pub(crate) fn stream(seed: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform index in `0..n`. `n` must be positive.
pub(crate) fn below(rng: &mut Stream, n: usize) -> usize {
    rng.gen_range(0..n as u64) as usize
}

/// Uniform in `[0, 1)`.
pub(crate) fn unit(rng: &mut Stream) -> f64 {
    rng.gen::<f64>()
}

pub(crate) fn shuffle<T>(rng: &mut Stream, items: &mut [T]) {
    for i in (1..items.len()).rev() {
        let j = below(rng, i + 1);
        items.swap(i, j);
    }
}
