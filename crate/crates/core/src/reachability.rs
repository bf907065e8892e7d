//! Reachability conditions: which walker+coin states are outputs of at least
//! `n` walk steps.
//!
//! A state on `m + 1` sites is the output of `n <= m` steps iff
//! `u_{1,down} = u_{m+1,up} = 0` and, for `s = 1..n-1`,
//! `r_s = sum_{i=1}^{s} v_i^dagger v_{m-s+i} = 0`.

use nalgebra::DMatrix;
use num_complex::Complex;

use crate::error::{QwError, Result};
use crate::scalar::{pair_dot, Real};
use crate::state::{VVector, WalkerState, DOWN, UP};

/// `v_1..v_m` of a state on `m + 1` sites; empty for a single site.
pub fn v_vectors<T: Real>(state: &WalkerState<T>) -> Vec<VVector<T>> {
    state.v_vectors()
}

/// `r_s` for a raw table with `m + 1` sites, `1 <= s <= m`.
pub(crate) fn orthogonality_sum<T: Real>(amps: &[[Complex<T>; 2]], s: usize) -> Complex<T> {
    let m = amps.len() - 1;
    let v = |i: usize| [amps[i - 1][UP], amps[i][DOWN]];
    let mut acc = Complex::new(T::zero(), T::zero());
    for i in 1..=s {
        acc = acc + pair_dot(&v(i), &v(m - s + i));
    }
    acc
}

/// Residual vector `[u_{1,down}, u_{m+1,up}, r_1, ..., r_{n-1}]`.
///
/// All entries vanish iff the state is the output of at least `n` steps.
pub fn reachability_residuals<T: Real>(state: &WalkerState<T>, n: usize) -> Result<Vec<Complex<T>>> {
    residuals_raw(state.amps(), n)
}

pub(crate) fn residuals_raw<T: Real>(amps: &[[Complex<T>; 2]], n: usize) -> Result<Vec<Complex<T>>> {
    if n == 0 {
        return Err(QwError::domain("reachability needs at least one step"));
    }
    if amps.is_empty() || n > amps.len() - 1 {
        return Err(QwError::domain(format!("a state on {} sites cannot certify {n} steps", amps.len())));
    }
    let m = amps.len() - 1;
    let mut out = Vec::with_capacity(n + 1);
    out.push(amps[0][DOWN]);
    out.push(amps[m][UP]);
    for s in 1..n {
        out.push(orthogonality_sum(amps, s));
    }
    Ok(out)
}

/// Whether every residual is within `tol`; endpoint entries are compared
/// against `tol * |state|`, the quadratic sums against `tol * |state|^2`.
pub fn residuals_vanish<T: Real>(residuals: &[Complex<T>], tol: T, norm: T) -> bool {
    let lin = tol * norm.max(T::min_positive_value());
    let quad = tol * (norm * norm).max(T::min_positive_value());
    residuals.iter().enumerate().all(|(k, r)| {
        let bound = if k < 2 { lin } else { quad };
        r.norm() <= bound
    })
}

/// Largest `n` certified by the residuals at tolerance `tol`; zero when
/// the endpoint conditions fail or the state sits on a single site.
pub fn max_reachable_steps<T: Real>(state: &WalkerState<T>, tol: T) -> usize {
    let amps = state.amps();
    if amps.len() < 2 {
        return 0;
    }
    let m = amps.len() - 1;
    let norm = state.norm();
    let ends = [amps[0][DOWN], amps[m][UP]];
    if !residuals_vanish(&ends, tol, norm) {
        return 0;
    }
    let quad = tol * (norm * norm).max(T::min_positive_value());
    for s in 1..m {
        if orthogonality_sum(amps, s).norm() > quad {
            return s;
        }
    }
    m
}

/// Numerical rank of the Jacobian of the real residual map
/// `R^{4(m+1)} -> R^{2(n+1)}` at `state`, with singular-value cutoff
/// `1e-7 * sigma_max`.
pub fn residual_jacobian_rank(state: &WalkerState<f64>, n: usize) -> Result<usize> {
    let amps = state.amps().to_vec();
    let params = 4 * amps.len();
    let outputs = 2 * (n + 1);
    let h = 1e-6;
    let mut jac = DMatrix::<f64>::zeros(outputs, params);
    for p in 0..params {
        let (site, coin, imag) = (p / 4, (p / 2) % 2, p % 2 == 1);
        let shifted = |delta: f64| -> Result<Vec<Complex<f64>>> {
            let mut a = amps.clone();
            let d = if imag { Complex::new(0.0, delta) } else { Complex::new(delta, 0.0) };
            a[site][coin] += d;
            residuals_raw(&a, n)
        };
        let plus = shifted(h)?;
        let minus = shifted(-h)?;
        for (k, (a, b)) in plus.iter().zip(&minus).enumerate() {
            let g = (a - b) / (2.0 * h);
            jac[(2 * k, p)] = g.re;
            jac[(2 * k + 1, p)] = g.im;
        }
    }
    let sv = jac.singular_values();
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    Ok(sv.iter().filter(|&&s| s > 1e-7 * smax).count())
}
