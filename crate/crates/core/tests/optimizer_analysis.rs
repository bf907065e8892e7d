//! Fidelity optimizer, Haar sampling and perturbation sweeps.

mod common;

use qwalk::analysis::{
    fidelity_drop, haar_random_target, haar_sample, linspace, perturb_sweep, probability_histogram, Angle, HistogramMode, HistogramOptions,
    ParamSelector, PerturbMode,
};
use qwalk::engineer::{engineer_target, EngineerOptions};
use qwalk::optimizer::{evaluate, optimize_coins, OptimizerOptions};
use qwalk::state::balanced_target;
use qwalk::walk::plus_bra;
use qwalk::{CoinParams, Complex64};
use rand::Rng;

fn up() -> [Complex64; 2] {
    [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]
}

fn random_params(g: &mut impl Rng, n: usize) -> Vec<CoinParams> {
    (0..n)
        .map(|_| CoinParams::new(g.random_range(0.1..1.4), g.random_range(-3.0..3.0), g.random_range(-3.0..3.0)))
        .collect()
}

#[test]
fn central_differences_agree_across_step_sizes() {
    let mut g = common::rng(31);
    for i in 0..10 {
        let t = haar_sample(6, 8, i).unwrap();
        let params = random_params(&mut g, 5);
        let f = |p: &[CoinParams]| evaluate(p, up(), plus_bra(), &t).unwrap().0;
        for k in 0..5 {
            let grads: Vec<f64> = [1e-5, 1e-6, 1e-7]
                .iter()
                .map(|&h| {
                    let mut a = params.clone();
                    let mut b = params.clone();
                    a[k].theta += h;
                    b[k].theta -= h;
                    (f(&a) - f(&b)) / (2.0 * h)
                })
                .collect();
            let scale = grads[1].abs().max(1e-3);
            assert!((grads[0] - grads[1]).abs() / scale < 1e-3, "{grads:?}");
            assert!((grads[2] - grads[1]).abs() / scale < 1e-3, "{grads:?}");
        }
    }
}

#[test]
fn evaluate_stays_in_bounds() {
    let mut g = common::rng(32);
    for i in 0..200 {
        let t = haar_sample(5, 9, i).unwrap();
        let (f, p) = evaluate(&random_params(&mut g, 4), up(), plus_bra(), &t).unwrap();
        assert!((0.0..=1.0 + 1e-12).contains(&f) && (0.0..=1.0 + 1e-12).contains(&p));
    }
    let t = haar_sample(5, 9, 0).unwrap();
    assert!(evaluate(&random_params(&mut g, 3), up(), plus_bra(), &t).is_err());
}

#[test]
fn engineered_parameters_evaluate_to_unit_fidelity() {
    let t = balanced_target(6).unwrap();
    let (sols, _) = engineer_target(&t, &EngineerOptions::default()).unwrap();
    for s in &sols {
        let params: Vec<CoinParams> = s.coins.iter().map(|c| c.params()).collect();
        let (f, p) = evaluate(&params, s.initial_coin, s.projection, &t).unwrap();
        assert!(f > 1.0 - 1e-9 && (p - s.probability).abs() < 1e-9);
    }
}

#[test]
fn two_step_targets_are_always_solved() {
    for i in 0..5 {
        let t = haar_sample(3, 12, i).unwrap();
        let r = optimize_coins(
            &t,
            2,
            &OptimizerOptions {
                seed: i,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(r.fidelity > 1.0 - 1e-6, "F = {}", r.fidelity);
    }
}

#[test]
fn seeded_near_a_branch_the_optimizer_keeps_it() {
    let t = balanced_target(6).unwrap();
    let (sols, _) = engineer_target(&t, &EngineerOptions::default()).unwrap();
    let branch = sols.iter().find(|s| (s.probability - 1.0 / 6.0).abs() < 1e-6).unwrap();
    let mut g = common::rng(33);
    let guess: Vec<CoinParams> = branch
        .coins
        .iter()
        .map(|c| {
            let mut p = c.params();
            p.theta += g.random_range(-0.02..0.02);
            p.xi += g.random_range(-0.02..0.02);
            p
        })
        .collect();
    let opts = OptimizerOptions {
        initial_guess: Some(guess),
        restarts: 1,
        ..Default::default()
    };
    let r = optimize_coins(&t, 5, &opts).unwrap();
    assert!(
        r.fidelity > 0.999 && r.probability >= 1.0 / 6.0 - 0.01,
        "F={} p={}",
        r.fidelity,
        r.probability
    );
}

#[test]
fn haar_components_average_to_one_third() {
    let mut sums = [0.0; 3];
    let n = 10_000;
    for i in 0..n {
        let t = haar_sample(3, 77, i).unwrap();
        for (s, z) in sums.iter_mut().zip(t.amps()) {
            *s += z.norm_sqr();
        }
    }
    for s in sums {
        assert!((s / n as f64 - 1.0 / 3.0).abs() < 0.01);
    }
    assert_eq!(haar_random_target(4, 5).unwrap(), haar_random_target(4, 5).unwrap());
    assert!(haar_random_target(1, 5).is_err());
}

#[test]
fn histograms_are_reproducible() {
    let mut opts = HistogramOptions::new(2, 300, HistogramMode::DSystem);
    opts.seed = 6;
    let a = probability_histogram(&opts).unwrap();
    let b = probability_histogram(&opts).unwrap();
    assert_eq!(a.records, b.records);
    assert!(a.records.iter().all(|r| r.solutions == 1 && r.min_p == r.max_p));
    assert_eq!(a.min_p.as_ref().unwrap().total(), 300);
    let mut csv = Vec::new();
    a.write_records_csv(&mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 301);
}

#[test]
fn sweeps_start_at_the_solution_and_peak_there() {
    let t = balanced_target(4).unwrap();
    let (sols, _) = engineer_target(&t, &EngineerOptions::default()).unwrap();
    let s = &sols[0];
    let grid = linspace(-0.1, 0.1, 21);
    let pts = perturb_sweep(s, &t, ParamSelector::All, &grid, PerturbMode::Relative).unwrap();
    assert_eq!(pts.len(), 3 * 3 * 21);
    for p in &pts {
        if p.eps == 0.0 {
            assert!((p.fidelity - s.fidelity).abs() < 1e-12);
        }
        assert!(p.fidelity <= s.fidelity + 1e-12);
    }
    let theta1: Vec<f64> = pts
        .iter()
        .filter(|p| p.step == 1 && p.angle == Angle::Theta)
        .map(|p| p.fidelity)
        .collect();
    assert!(theta1[..10].windows(2).all(|w| w[1] >= w[0] - 1e-12));
    assert!(theta1[10..].windows(2).all(|w| w[1] <= w[0] + 1e-12));

    let bad = ParamSelector::One { step: 4, angle: Angle::Xi };
    assert!(perturb_sweep(s, &t, bad, &grid, PerturbMode::Absolute).is_err());
    let drop = fidelity_drop(s, &t, 0.1, PerturbMode::Absolute).unwrap();
    assert!(drop.max >= drop.mean && drop.mean > 0.0);
}
