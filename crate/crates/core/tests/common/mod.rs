#![allow(dead_code)]

use std::f64::consts::{FRAC_PI_2, PI};

use qwalk::{CoinOperator, Complex64, WalkerState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_coin(rng: &mut impl Rng) -> CoinOperator {
    CoinOperator::from_params(
        rng.random_range(0.0..FRAC_PI_2),
        rng.random_range(-PI..PI),
        rng.random_range(-PI..PI),
    )
    .unwrap()
}

pub fn random_coins(rng: &mut impl Rng, n: usize) -> Vec<CoinOperator> {
    (0..n).map(|_| random_coin(rng)).collect()
}

pub fn random_pair(rng: &mut impl Rng) -> [Complex64; 2] {
    let v = [
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
    ];
    let n = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
    [v[0] / n, v[1] / n]
}

pub fn random_state(rng: &mut impl Rng, sites: usize) -> WalkerState {
    let amps = (0..sites)
        .map(|_| {
            [
                Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
                Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
            ]
        })
        .collect();
    WalkerState::new(1, amps).normalized().unwrap()
}
