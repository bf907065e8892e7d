//! Seeded, portable random streams.
//!
//! Every generator is ChaCha8. Work item `index` of a run seeded with
//! `seed` draws from stream `index` of the key derived from `seed`, so
//! results do not depend on thread count or completion order.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type Rng = ChaCha8Rng;

/// Generator for work item `index` of a run seeded with `seed`.
pub fn stream(seed: u64, index: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Circularly-symmetric complex normal with `E|z|^2 = 1`.
pub fn complex_normal(rng: &mut impl rand::Rng) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}
