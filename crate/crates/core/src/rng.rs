//! Seeded randomness.
//!
//! Every randomized routine in the crate draws from ChaCha8 (the `rand_chacha`
//! implementation), seeded from an explicit 64-bit seed. ChaCha is a
//! counter-based stream cipher, so output is identical on every platform, and
//! independent substreams are obtained by selecting the cipher's stream id
//! rather than by reseeding.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream `index` of the generator seeded with `seed`.
pub fn substream(seed: u64, index: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn fill_normal(rng: &mut Rng, out: &mut [f64]) {
    for v in out {
        *v = StandardNormal.sample(rng);
    }
}

pub fn normal_vec(rng: &mut Rng, len: usize) -> Vec<f64> {
    let mut v = vec![0.0; len];
    fill_normal(rng, &mut v);
    v
}
