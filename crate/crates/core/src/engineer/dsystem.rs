//! Multi-start root finding for the interior `d`-parameter system.
//!
//! For a target `u_1..u_{n+1}` the unknowns are `d_2..d_n` (with `d_1 = 0`
//! and `d_{n+1} = u_{n+1}`) and the conditions are, for `s = 1..n-1`,
//!
//! ```text
//! E_s = sum_{i=1}^{s} (u_i - d_i)^* (u_{n-s+i} - d_{n-s+i}) + d_{i+1}^* d_{n-s+i+1} = 0
//! ```
//!
//! i.e. `2(n-1)` real quadratic equations in `2(n-1)` real unknowns. They are
//! not holomorphic in `d`, so the solver works on real and imaginary parts
//! with an exact real Jacobian.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::rng;

/// Unknown `d_k` as seen from the residual: a constant or `sign * d_k`
/// plus a constant.
#[derive(Clone, Copy)]
struct Operand {
    value: Complex64,
    var: Option<usize>,
    sign: f64,
}

/// `d_1..d_{n+1}` (1-based in the formulas, 0-based here) with the pinned
/// ends.
fn full_d(target: &[Complex64], d: &[Complex64]) -> Vec<Complex64> {
    let n = target.len() - 1;
    let mut out = Vec::with_capacity(n + 1);
    out.push(Complex64::new(0.0, 0.0));
    out.extend_from_slice(d);
    out.push(target[n]);
    out
}

/// Residuals `E_1..E_{n-1}` for `d = (d_2..d_n)`.
pub fn d_residuals(target: &[Complex64], d: &[Complex64]) -> Vec<Complex64> {
    let n = target.len() - 1;
    let dd = full_d(target, d);
    (1..n)
        .map(|s| {
            (1..=s)
                .map(|i| {
                    let j = n - s + i;
                    (target[i - 1] - dd[i - 1]).conj() * (target[j - 1] - dd[j - 1]) + dd[i].conj() * dd[j]
                })
                .sum()
        })
        .collect()
}

/// Real residual vector and Jacobian at `x = (re d_2, im d_2, ..., re d_n, im d_n)`.
fn residual_and_jacobian(target: &[Complex64], x: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = target.len() - 1;
    let m = 2 * (n - 1);
    let d: Vec<Complex64> = (0..n - 1).map(|k| Complex64::new(x[2 * k], x[2 * k + 1])).collect();
    let dd = full_d(target, &d);
    // variable column of d_k (1-based k), if it is an unknown
    let var = |k: usize| (2..=n).contains(&k).then(|| 2 * (k - 2));
    let shifted = |k: usize| Operand {
        value: target[k - 1] - dd[k - 1],
        var: var(k),
        sign: -1.0,
    };
    let plain = |k: usize| Operand {
        value: dd[k - 1],
        var: var(k),
        sign: 1.0,
    };
    let mut f = DVector::zeros(m);
    let mut jac = DMatrix::zeros(m, m);
    let i_unit = Complex64::new(0.0, 1.0);
    for s in 1..n {
        let (re, im) = (2 * (s - 1), 2 * (s - 1) + 1);
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 1..=s {
            let j = n - s + i;
            for (a, b) in [(shifted(i), shifted(j)), (plain(i + 1), plain(j + 1))] {
                acc += a.value.conj() * b.value;
                if let Some(col) = a.var {
                    let dre = a.sign * b.value;
                    let dim = -i_unit * a.sign * b.value;
                    jac[(re, col)] += dre.re;
                    jac[(im, col)] += dre.im;
                    jac[(re, col + 1)] += dim.re;
                    jac[(im, col + 1)] += dim.im;
                }
                if let Some(col) = b.var {
                    let dre = a.value.conj() * b.sign;
                    let dim = i_unit * b.sign * a.value.conj();
                    jac[(re, col)] += dre.re;
                    jac[(im, col)] += dre.im;
                    jac[(re, col + 1)] += dim.re;
                    jac[(im, col + 1)] += dim.im;
                }
            }
        }
        f[re] = acc.re;
        f[im] = acc.im;
    }
    (f, jac)
}

fn max_abs(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

/// Newton with a Levenberg-Marquardt fallback on a square system given by
/// `eval`. Returns the final point and its residual max-norm.
fn local_solve<F>(eval: F, mut x: DVector<f64>, max_iter: usize) -> (DVector<f64>, f64)
where
    F: Fn(&DVector<f64>) -> (DVector<f64>, DMatrix<f64>),
{
    let (mut f, mut jac) = eval(&x);
    let mut cost = f.norm_squared();
    let mut mu: f64 = 1e-3;
    for _ in 0..max_iter {
        if max_abs(&f) < 1e-16 {
            break;
        }
        let mut accepted = false;
        if let Some(step) = jac.clone().lu().solve(&f) {
            let trial = &x - step;
            let (tf, tj) = eval(&trial);
            let tc = tf.norm_squared();
            if tc < cost {
                (x, f, jac, cost) = (trial, tf, tj, tc);
                mu = (mu * 0.3).max(1e-12);
                accepted = true;
            }
        }
        if !accepted {
            let jt = jac.transpose();
            let jtj = &jt * &jac;
            let g = &jt * &f;
            for _ in 0..30 {
                let mut a = jtj.clone();
                for k in 0..a.nrows() {
                    a[(k, k)] += mu * (1.0 + jtj[(k, k)]);
                }
                let Some(step) = a.cholesky().map(|c| c.solve(&g)) else {
                    mu *= 10.0;
                    continue;
                };
                let trial = &x - step;
                let (tf, tj) = eval(&trial);
                let tc = tf.norm_squared();
                if tc < cost {
                    (x, f, jac, cost) = (trial, tf, tj, tc);
                    mu = (mu * 0.3).max(1e-12);
                    accepted = true;
                    break;
                }
                mu *= 10.0;
            }
        }
        if !accepted {
            break;
        }
    }
    let r = max_abs(&f);
    (x, r)
}

/// The homogenized system in `y = (D, w)` with `d = D / w`, `w` real:
/// `w^2 E(D / w) = E_{w u}(D)`, plus the normalization `(|y|^2 - 1) / 2`.
/// Roots with large `|d|` become well-conditioned points with small `w`.
fn projective_residual_and_jacobian(target: &[Complex64], y: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let m = y.len() - 1;
    let w = y[m];
    let x = y.rows(0, m).into_owned();
    let scaled = |w: f64| target.iter().map(|u| u * w).collect::<Vec<_>>();
    let (f, jd) = residual_and_jacobian(&scaled(w), &x);
    // the residual is quadratic in w, so a unit central difference is exact
    let fp = residual_and_jacobian(&scaled(w + 1.0), &x).0;
    let fm = residual_and_jacobian(&scaled(w - 1.0), &x).0;
    let mut g = DVector::zeros(m + 1);
    let mut jac = DMatrix::zeros(m + 1, m + 1);
    g.rows_mut(0, m).copy_from(&f);
    g[m] = 0.5 * (y.norm_squared() - 1.0);
    jac.view_mut((0, 0), (m, m)).copy_from(&jd);
    jac.view_mut((0, m), (m, 1)).copy_from(&((fp - fm) * 0.5));
    jac.row_mut(m).copy_from(&y.transpose());
    (g, jac)
}

/// Smallest singular value of the real Jacobian at `d`, relative to the
/// largest; zero for a non-isolated solution.
pub fn d_jacobian_conditioning(target: &[Complex64], d: &[Complex64]) -> f64 {
    let x = DVector::from_iterator(d.len() * 2, d.iter().flat_map(|z| [z.re, z.im]));
    let (_, jac) = residual_and_jacobian(target, &x);
    let sv = jac.singular_values();
    let hi = sv.max();
    if hi > 0.0 {
        sv.min() / hi
    } else {
        0.0
    }
}

/// Settings of the multi-start search.
#[derive(Debug, Clone)]
pub struct DSystemOptions {
    /// Random starts; `None` means `200 n`.
    pub restarts: Option<usize>,
    pub seed: u64,
    /// Two roots closer than this (max-norm in `d`, relative to
    /// `max(1, |d|)`) are merged.
    pub dedup_radius: f64,
    /// Accepted residual max-norm `max |E_s|`. Far roots may exceed it by
    /// the rounding floor `64 eps |Phi|^2` of the quadratic terms; a
    /// relative bound would also admit points near the solution curves at
    /// infinity.
    pub residual_tol: f64,
    /// Roots with `|d|` beyond this are treated as lying at infinity.
    pub max_d_norm: f64,
    pub max_iterations: usize,
}

impl Default for DSystemOptions {
    fn default() -> Self {
        Self {
            restarts: None,
            seed: 0,
            dedup_radius: 1e-6,
            residual_tol: 1e-9,
            max_d_norm: 1e8,
            max_iterations: 200,
        }
    }
}

/// `|Phi|^2` of the unnormalized assembled state.
fn phi_norm_sqr(target: &[Complex64], d: &[Complex64]) -> f64 {
    let n = target.len() - 1;
    target[0].norm_sqr()
        + target[n].norm_sqr()
        + target[1..n]
            .iter()
            .zip(d)
            .map(|(u, di)| (u - di).norm_sqr() + di.norm_sqr())
            .sum::<f64>()
}

/// One start: Newton on the homogenized system from a uniform point of the
/// sphere, then a polish in `d` coordinates. Returns `d` and the absolute
/// residual max-norm.
fn solve_from(target: &[Complex64], y0: DVector<f64>, opts: &DSystemOptions) -> Option<(Vec<Complex64>, f64)> {
    let m = y0.len() - 1;
    let (y, res) = local_solve(|y| projective_residual_and_jacobian(target, y), y0, opts.max_iterations);
    let w = y[m];
    if !(res < 1e-14) || !(w.abs() * opts.max_d_norm > 1.0) {
        return None;
    }
    let x0 = y.rows(0, m) / w;
    let (x, res) = local_solve(|x| residual_and_jacobian(target, x), x0, 20);
    if x.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let d: Vec<Complex64> = (0..m / 2).map(|k| Complex64::new(x[2 * k], x[2 * k + 1])).collect();
    let floor = 64.0 * f64::EPSILON * phi_norm_sqr(target, &d);
    (res <= opts.residual_tol + floor).then_some((d, res))
}

/// Newton/LM polish of an approximate root `d0 = (d_2..d_n)`; returns the
/// root and its residual max-norm if it meets `residual_tol`. Used to track
/// a branch while the target changes slightly.
pub fn refine_root(target: &[Complex64], d0: &[Complex64], opts: &DSystemOptions) -> Option<(Vec<Complex64>, f64)> {
    if target.len() < 3 || d0.len() + 2 != target.len() {
        return None;
    }
    let x0 = DVector::from_iterator(2 * d0.len(), d0.iter().flat_map(|z| [z.re, z.im]));
    let (x, res) = local_solve(|x| residual_and_jacobian(target, x), x0, opts.max_iterations);
    let d: Vec<Complex64> = (0..d0.len()).map(|k| Complex64::new(x[2 * k], x[2 * k + 1])).collect();
    let floor = 64.0 * f64::EPSILON * phi_norm_sqr(target, &d);
    (res <= opts.residual_tol + floor && d.iter().all(|z| z.re.is_finite() && z.im.is_finite())).then_some((d, res))
}

/// Roots found from the random starts, deduplicated, in restart order.
pub(crate) fn find_roots(target: &[Complex64], opts: &DSystemOptions) -> (Vec<(Vec<Complex64>, f64)>, usize) {
    let n = target.len() - 1;
    let dim = 2 * (n - 1) + 1;
    let restarts = opts.restarts.unwrap_or(200 * n);
    let converged: Vec<Option<(Vec<Complex64>, f64)>> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut g = rng::stream(opts.seed, r as u64);
            let y0 = DVector::from_iterator(
                dim,
                (0..dim).map(|_| rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut g)),
            );
            let mut y0: DVector<f64> = y0.normalize();
            if y0[dim - 1] < 0.0 {
                y0 = -y0;
            }
            solve_from(target, y0, opts)
        })
        .collect();
    let mut roots: Vec<(Vec<Complex64>, f64)> = Vec::new();
    for (d, res) in converged.into_iter().flatten() {
        let scale = d.iter().fold(1.0f64, |a, z| a.max(z.norm()));
        let dup = roots
            .iter_mut()
            .find(|(e, _)| e.iter().zip(&d).all(|(a, b)| (a - b).norm() <= opts.dedup_radius * scale));
        match dup {
            Some(existing) => {
                if res < existing.1 {
                    *existing = (d, res);
                }
            }
            None => roots.push((d, res)),
        }
    }
    (roots, restarts)
}
