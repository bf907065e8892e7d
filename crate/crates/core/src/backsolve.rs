//! Constructive recovery of the coin sequence generating a reachable state.
//!
//! For a state on `n + 1` sites the last coin maps `(a, 0)` to `v_1` and
//! `(0, b)` to `v_n`, which fixes it up to the phase `alpha` between its
//! columns. Undoing that step leaves a state on `n` sites that again
//! satisfies the reachability conditions, and so on down to the first step,
//! where the coin is fixed by the initial coin state.

use num_complex::{Complex, Complex64};

use crate::coin::CoinOperator;
use crate::error::{QwError, Result};
use crate::mat2::Mat2;
use crate::precise::backsolve_precise;
use crate::reachability::orthogonality_sum;
use crate::scalar::{czero, normalize_pair, pair_norm_sqr, Real};
use crate::state::{norm_tol, zero_tol, WalkerState, DOWN, UP};
use crate::tol::TOL_REACH;
use crate::walk::{inverse_step_raw, run_walk_raw};

/// Last coin of a state on `n + 1 >= 2` sites, with column phase `alpha`.
///
/// The first column follows `v_1`; when `v_n` is the larger of the two the
/// second column follows `v_n` instead (same coin up to the gauge phase,
/// better conditioned). If both vanish the identity is returned.
pub fn solve_last_coin<T: Real>(state: &WalkerState<T>, alpha: T) -> Result<CoinOperator<T>> {
    let n = state.site_count().saturating_sub(1);
    if n == 0 {
        return Err(QwError::domain("the last coin needs a state on at least 2 sites"));
    }
    last_coin_raw(state.amps(), alpha, T::lit(TOL_REACH), n)
}

fn last_coin_raw<T: Real>(amps: &[[Complex<T>; 2]], alpha: T, tol: T, step: usize) -> Result<CoinOperator<T>> {
    let n = amps.len() - 1;
    let norm_sqr: T = amps.iter().map(pair_norm_sqr).sum();
    if n >= 2 {
        let r = orthogonality_sum(amps, 1);
        // r_1 = v_1^dagger v_n for a state on n + 1 sites
        if r.norm() > tol * norm_sqr.max(T::min_positive_value()) {
            return Err(QwError::NotReachable {
                step,
                residual: r.norm().to_f64_lossy(),
            });
        }
    }
    let first = [amps[0][UP], amps[1][DOWN]];
    let last = [amps[n - 1][UP], amps[n][DOWN]];
    let (nf, nl) = (pair_norm_sqr(&first).sqrt(), pair_norm_sqr(&last).sqrt());
    let tiny = zero_tol::<T>() * norm_sqr.sqrt().max(T::one());
    if nf <= tiny && nl <= tiny {
        return Ok(CoinOperator::identity());
    }
    if n == 1 || nf >= nl {
        CoinOperator::from_first_column(first, alpha)
    } else {
        CoinOperator::from_second_column(last, alpha)
    }
}

/// First coin: maps `initial_coin` to `(u_{1,up}, u_{2,down})` of a
/// one-step state on sites 1 and 2.
///
/// Among the admissible unitaries the one sending the orthogonal complement
/// `(-c_1^*, c_0^*)` of the initial coin to the orthogonal complement of the
/// image is returned; it is special-unitary.
pub fn solve_first_coin<T: Real>(state_after_1: &WalkerState<T>, initial_coin: [Complex<T>; 2]) -> Result<CoinOperator<T>> {
    if state_after_1.is_empty() || state_after_1.origin() < 1 || state_after_1.last_site() > 2 {
        return Err(QwError::domain("a one-step state must live on sites 1 and 2"));
    }
    let tiny = zero_tol::<T>();
    if state_after_1.amp(1, DOWN).norm() > tiny || state_after_1.amp(2, UP).norm() > tiny {
        return Err(QwError::domain("a one-step state needs u(1,down) = u(2,up) = 0"));
    }
    first_coin_raw([state_after_1.amp(1, UP), state_after_1.amp(2, DOWN)], initial_coin)
}

fn first_coin_raw<T: Real>(image: [Complex<T>; 2], initial: [Complex<T>; 2]) -> Result<CoinOperator<T>> {
    let tol = norm_tol::<T>();
    if (pair_norm_sqr(&initial) - T::one()).abs() > tol {
        return Err(QwError::domain("initial coin state must be normalized"));
    }
    if (pair_norm_sqr(&image) - T::one()).abs() > tol {
        return Err(QwError::domain(format!(
            "one-step layer has norm^2 {} but the initial coin has norm 1",
            pair_norm_sqr(&image)
        )));
    }
    let perp = |x: [Complex<T>; 2]| [-x[1].conj(), x[0].conj()];
    let out = Mat2::from_columns(image, perp(image));
    let inp = Mat2::from_columns(initial, perp(initial));
    CoinOperator::from_matrix(out * inp.adjoint())
}

/// Intermediate result of peeling back coins `n..2`.
#[derive(Debug, Clone)]
pub struct BackTrace<T> {
    /// Coins `C_2..C_n` in walk order.
    pub later_coins: Vec<CoinOperator<T>>,
    /// `(u_{1,up}, u_{2,down})` after the first step.
    pub first_layer: [Complex<T>; 2],
}

/// Undoes steps `n` down to `2` of a state on `n + 1` sites.
/// `alphas` holds one gauge phase per undone step, ordered `C_n, ..., C_2`;
/// an empty slice means all zeros.
///
/// The full residual vector is checked against `tol` up front. Later layers
/// are re-checked with `tol` inflated by the accumulated conditioning of
/// the coin columns, since round-off in small edge vectors is amplified by
/// each inverse step.
pub fn peel_to_first_layer<T: Real>(state: &WalkerState<T>, alphas: &[T], tol: T) -> Result<BackTrace<T>> {
    let n = state.site_count().saturating_sub(1);
    if n == 0 {
        return Err(QwError::domain("back-solving needs a state on at least 2 sites"));
    }
    if !alphas.is_empty() && alphas.len() != n - 1 {
        return Err(QwError::domain(format!(
            "expected {} gauge phases for a {n}-step state, got {}",
            n - 1,
            alphas.len()
        )));
    }
    let norm = state.norm();
    precheck(state.amps(), tol, norm)?;

    let mut amps = state.amps().to_vec();
    let mut kappa = T::one();
    let mut coins = Vec::with_capacity(n - 1);
    for (k, step) in (2..=n).rev().enumerate() {
        let alpha = alphas.get(k).copied().unwrap_or_else(T::zero);
        let last = amps.len() - 1;
        let edge = pair_norm_sqr(&[amps[0][UP], amps[1][DOWN]])
            .max(pair_norm_sqr(&[amps[last - 1][UP], amps[last][DOWN]]))
            .sqrt();
        if edge > T::zero() {
            kappa = kappa * (norm / edge).max(T::one());
        }
        let coin = last_coin_raw(&amps, alpha, tol * kappa, step)?;
        amps[0][DOWN] = czero();
        amps[last][UP] = czero();
        amps = inverse_step_raw(&amps, &coin);
        let last = amps.len() - 1;
        let leak = amps[0][DOWN].norm().max(amps[last][UP].norm());
        if leak > tol * kappa * norm {
            return Err(QwError::NotReachable {
                step,
                residual: leak.to_f64_lossy(),
            });
        }
        amps[0][DOWN] = czero();
        amps[last][UP] = czero();
        coins.push(coin);
    }
    coins.reverse();
    Ok(BackTrace {
        later_coins: coins,
        first_layer: [amps[0][UP], amps[1][DOWN]],
    })
}

/// Checks every residual of a state on `n + 1` sites. A failing sum `r_s`
/// surfaces when undoing step `n - s + 1`; failing endpoints at step `n`.
fn precheck<T: Real>(amps: &[[Complex<T>; 2]], tol: T, norm: T) -> Result<()> {
    let n = amps.len() - 1;
    let worst_end = amps[0][DOWN].norm().max(amps[n][UP].norm());
    if worst_end > tol * norm {
        return Err(QwError::NotReachable {
            step: n,
            residual: worst_end.to_f64_lossy(),
        });
    }
    for s in 1..n {
        let r = orthogonality_sum(amps, s).norm();
        if r > tol * norm * norm {
            return Err(QwError::NotReachable {
                step: n - s + 1,
                residual: r.to_f64_lossy(),
            });
        }
    }
    Ok(())
}

/// Coins `C_1..C_n` such that `run_walk(initial_coin, coins)` reproduces the
/// normalized state up to a global phase. `alphas` as in
/// [`peel_to_first_layer`].
pub fn backsolve<T: Real>(state: &WalkerState<T>, initial_coin: [Complex<T>; 2], alphas: &[T]) -> Result<Vec<CoinOperator<T>>> {
    backsolve_with_tol(state, initial_coin, alphas, T::lit(TOL_REACH))
}

pub fn backsolve_with_tol<T: Real>(
    state: &WalkerState<T>,
    initial_coin: [Complex<T>; 2],
    alphas: &[T],
    tol: T,
) -> Result<Vec<CoinOperator<T>>> {
    if !state.is_normalized() {
        return Err(QwError::domain("back-solving requires a normalized state"));
    }
    if (pair_norm_sqr(&initial_coin) - T::one()).abs() > norm_tol::<T>() {
        return Err(QwError::domain("initial coin state must be normalized"));
    }
    let n = state.site_count().saturating_sub(1);
    if n == 0 {
        return Err(QwError::domain("back-solving needs a state on at least 2 sites"));
    }
    if !alphas.is_empty() && alphas.len() != n - 1 {
        return Err(QwError::domain(format!(
            "expected {} gauge phases for a {n}-step state, got {}",
            n - 1,
            alphas.len()
        )));
    }
    precheck(state.amps(), tol, state.norm())?;
    // Round-off amplified along the peel shows up as a norm defect of the
    // first layer; the multiprecision fallback below takes over then.
    let peeled = peel_to_first_layer(state, alphas, tol)
        .ok()
        .and_then(|trace| normalize_pair(trace.first_layer).map(|layer| (trace, layer)));
    let mut coins = match peeled {
        Some((trace, layer)) => {
            let mut coins = Vec::with_capacity(trace.later_coins.len() + 1);
            coins.push(first_coin_raw(layer, initial_coin)?);
            coins.extend(trace.later_coins);
            coins
        }
        None => Vec::new(),
    };
    let defect = |coins: &[CoinOperator<T>]| {
        let got = WalkerState::from_raw(1, run_walk_raw(initial_coin, coins));
        T::one() - got.fidelity(state)
    };
    let mut d = if coins.len() == n { defect(&coins) } else { T::infinity() };
    let clean = T::epsilon() * T::lit(64.0 * n as f64);
    if d > clean && state.origin() == 1 {
        // Round-off in the state is amplified by the peel; redo it in
        // multiprecision arithmetic with growing precision.
        let c64 = |z: Complex<T>| Complex64::new(z.re.to_f64_lossy(), z.im.to_f64_lossy());
        let table: Vec<[Complex64; 2]> = state.amps().iter().map(|p| [c64(p[0]), c64(p[1])]).collect();
        let init = [c64(initial_coin[0]), c64(initial_coin[1])];
        let phases: Vec<Complex64> = alphas.iter().map(|a| Complex64::from_polar(1.0, a.to_f64_lossy())).collect();
        for bits in [192, 384, 768] {
            let Some(mats) = backsolve_precise(&table, init, &phases, bits) else {
                continue;
            };
            let back = |z: Complex64| Complex::new(T::lit(z.re), T::lit(z.im));
            let candidate: Option<Vec<CoinOperator<T>>> = mats
                .iter()
                .map(|m| CoinOperator::from_matrix(Mat2::new(back(m[0][0]), back(m[0][1]), back(m[1][0]), back(m[1][1]))).ok())
                .collect();
            if let Some(candidate) = candidate {
                let cd = defect(&candidate);
                if cd < d {
                    coins = candidate;
                    d = cd;
                }
                if d <= clean {
                    break;
                }
            }
        }
    }
    if !(d <= tol) {
        return Err(QwError::Numerical {
            message: "back-solved coins do not reproduce the state".into(),
            residual: d.to_f64_lossy(),
        });
    }
    Ok(coins)
}
