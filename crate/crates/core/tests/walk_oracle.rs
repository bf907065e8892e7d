//! Walk dynamics, reachability and back-solving checked against independent
//! constructions.

mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use qwalk::backsolve::{backsolve, solve_last_coin};
use qwalk::reachability::{max_reachable_steps, reachability_residuals, residual_jacobian_rank, residuals_vanish};
use qwalk::walk::{apply_inverse_step_with_tol, apply_step, run_walk};
use qwalk::{CoinOperator, Complex64, WalkerState};

/// Dense `S (I (x) C)` on sites `1..=sites`, basis index `2 (site - 1) + coin`.
fn dense_step(sites: usize, coin: &CoinOperator) -> DMatrix<Complex64> {
    let dim = 2 * sites;
    let mut coin_layer = DMatrix::<Complex64>::zeros(dim, dim);
    for k in 0..sites {
        for r in 0..2 {
            for c in 0..2 {
                coin_layer[(2 * k + r, 2 * k + c)] = coin.matrix().m[r][c];
            }
        }
    }
    // S = sum_k |k><k| (x) |up><up| + |k+1><k| (x) |down><down|
    let mut shift = DMatrix::<Complex64>::zeros(dim, dim);
    for k in 0..sites {
        shift[(2 * k, 2 * k)] = Complex64::new(1.0, 0.0);
        if k + 1 < sites {
            shift[(2 * (k + 1) + 1, 2 * k + 1)] = Complex64::new(1.0, 0.0);
        }
    }
    shift * coin_layer
}

#[test]
fn run_walk_matches_dense_matrix_oracle() {
    let mut rng = rng(11);
    for n in 0..=6 {
        for _ in 0..20 {
            let coins = random_coins(&mut rng, n);
            let init = random_pair(&mut rng);
            let sites = n + 2;
            let mut psi = DVector::<Complex64>::zeros(2 * sites);
            psi[0] = init[0];
            psi[1] = init[1];
            for coin in &coins {
                psi = dense_step(sites, coin) * psi;
            }
            let out = run_walk(init, &coins).unwrap();
            for site in 1..=sites {
                for s in 0..2 {
                    let diff = (out.amp(site as i64, s) - psi[2 * (site - 1) + s]).norm();
                    assert!(diff < 1e-10, "n={n} site={site} coin={s} diff={diff}");
                }
            }
        }
    }
}

#[test]
fn walk_outputs_satisfy_all_residuals() {
    let mut rng = rng(12);
    for n in 1..=20 {
        let coins = random_coins(&mut rng, n);
        let out = run_walk(random_pair(&mut rng), &coins).unwrap();
        let res = reachability_residuals(&out, n).unwrap();
        assert_eq!(res.len(), n + 1);
        assert!(res.iter().all(|r| r.norm() < 1e-9), "n={n}");
        assert!(max_reachable_steps(&out, 1e-9) >= n);
    }
}

#[test]
fn generalized_reachability_counts_steps_exactly() {
    let mut rng = rng(13);
    for n in 1..=8 {
        for _ in 0..10 {
            let mut state = random_state(&mut rng, 3);
            assert_eq!(max_reachable_steps(&state, 1e-9), 0);
            for coin in random_coins(&mut rng, n) {
                state = apply_step(&state, &coin);
            }
            // Brute-force scan of every claimed step count.
            let m = state.site_count() - 1;
            let certified = (1..=m)
                .filter(|&k| residuals_vanish(&reachability_residuals(&state, k).unwrap(), 1e-9, 1.0))
                .max()
                .unwrap_or(0);
            assert_eq!(certified, n);
            assert_eq!(max_reachable_steps(&state, 1e-9), n);
        }
    }
}

#[test]
fn reachability_is_closed_under_steps() {
    let mut rng = rng(14);
    for trial in 0..500 {
        let n = 1 + trial % 8;
        let state = run_walk(random_pair(&mut rng), &random_coins(&mut rng, n)).unwrap();
        let next = apply_step(&state, &random_coin(&mut rng));
        let res = reachability_residuals(&next, n + 1).unwrap();
        assert!(residuals_vanish(&res, 1e-9, 1.0), "trial {trial}");
    }
}

#[test]
fn undoing_the_last_coin_keeps_lower_residuals() {
    let mut rng = rng(15);
    for trial in 0..200 {
        let n = 2 + trial % 9;
        let state = run_walk(random_pair(&mut rng), &random_coins(&mut rng, n)).unwrap();
        let coin = solve_last_coin(&state, 0.4).unwrap();
        let prev = apply_inverse_step_with_tol(&state, &coin, 1e-9).unwrap();
        assert_eq!(prev.site_count(), n);
        let res = reachability_residuals(&prev, n - 1).unwrap();
        assert!(residuals_vanish(&res, 1e-9, 1.0), "trial {trial}");
    }
}

#[test]
fn residual_jacobian_rank_at_reachable_points() {
    let mut rng = rng(16);
    for n in 2..=7 {
        let state = run_walk(random_pair(&mut rng), &random_coins(&mut rng, n)).unwrap();
        // Two complex endpoint conditions plus n - 1 complex sums, all independent:
        // 4n + 4 real amplitudes minus 2(n - 1) + 4 conditions leaves 2n + 2,
        // i.e. 2n after normalization and global phase.
        let rank = residual_jacobian_rank(&state, n).unwrap();
        assert_eq!(rank, 2 * (n - 1) + 4, "n={n}");
    }
}

#[test]
fn backsolve_round_trip() {
    let mut rng = rng(17);
    for trial in 0..1000 {
        let n = 1 + trial % 15;
        let init = random_pair(&mut rng);
        let state = run_walk(init, &random_coins(&mut rng, n)).unwrap();
        let coins = backsolve(&state, init, &[]).unwrap();
        assert_eq!(coins.len(), n);
        let again = run_walk(init, &coins).unwrap();
        let f = again.fidelity(&state);
        assert!(f > 1.0 - 1e-10, "trial {trial} n={n} fidelity {f}");
    }
}

#[test]
fn gauge_phases_change_coins_not_state() {
    let mut rng = rng(18);
    for _ in 0..50 {
        let n = 4;
        let init = random_pair(&mut rng);
        let state = run_walk(init, &random_coins(&mut rng, n)).unwrap();
        let a = backsolve(&state, init, &[]).unwrap();
        let b = backsolve(&state, init, &[0.3, -1.1, 2.0]).unwrap();
        assert!(a.iter().zip(&b).skip(1).any(|(x, y)| x.matrix().max_abs_diff(y.matrix()) > 1e-3));
        let sa = run_walk(init, &a).unwrap();
        let sb = run_walk(init, &b).unwrap();
        assert!(sa.fidelity(&state) > 1.0 - 1e-10);
        assert!(sb.fidelity(&state) > 1.0 - 1e-10);
    }
}

#[test]
fn last_coin_gauge_covariance() {
    let mut rng = rng(19);
    for _ in 0..200 {
        let n = 2 + rng_usize(&mut rng, 8);
        let state = run_walk(random_pair(&mut rng), &random_coins(&mut rng, n)).unwrap();
        let alpha = 2.0 * rng_f64(&mut rng) - 1.0;
        let base = solve_last_coin(&state, 0.0).unwrap();
        let phased = solve_last_coin(&state, alpha * 3.0).unwrap();
        let expect = base.with_column_phase(alpha * 3.0);
        assert!(phased.matrix().phase_distance(expect.matrix()) < 1e-10);
    }
}

fn rng_usize(rng: &mut impl rand::Rng, k: usize) -> usize {
    rng.random_range(0..k)
}

fn rng_f64(rng: &mut impl rand::Rng) -> f64 {
    rng.random_range(0.0..1.0)
}

#[test]
fn single_precision_round_trip() {
    use qwalk::{CoinOperatorF32, WalkerStateF32};
    let coins: Vec<CoinOperatorF32> = (0..5)
        .map(|k| CoinOperatorF32::from_params(0.3 + 0.2 * k as f32, 0.5 * k as f32, -0.7 + 0.1 * k as f32).unwrap())
        .collect();
    let init = [num_complex::Complex::new(1.0f32, 0.0), num_complex::Complex::new(0.0, 0.0)];
    let state: WalkerStateF32 = qwalk::walk::run_walk(init, &coins).unwrap();
    let back = qwalk::backsolve::backsolve_with_tol(&state, init, &[], 1e-4).unwrap();
    let again = qwalk::walk::run_walk(init, &back).unwrap();
    assert!(again.fidelity(&state) > 1.0 - 1e-5);
    let _ = WalkerState::localized(1, [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]);
}
