//! Jones matrices of wave plates, their inversion for arbitrary coins, and
//! the q-plate mapping.

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::conventions::{ANGLE_PERIOD, HWP_RETARDANCE, QWP_RETARDANCE};
use crate::error::{QwError, Result};
use crate::mat2::Mat2;
use crate::scalar::{cis, wrap_angle, Real};
use crate::{CoinOperator, Complex64};

/// Wave-plate type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PlateKind {
    Qwp,
    Hwp,
}

impl PlateKind {
    pub fn retardance(self) -> f64 {
        match self {
            PlateKind::Qwp => QWP_RETARDANCE,
            PlateKind::Hwp => HWP_RETARDANCE,
        }
    }
}

/// A wave plate with its fast axis at `angle` radians from horizontal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JonesElement {
    pub kind: PlateKind,
    pub angle: f64,
}

impl JonesElement {
    pub fn qwp(angle: f64) -> Self {
        Self {
            kind: PlateKind::Qwp,
            angle,
        }
    }

    pub fn hwp(angle: f64) -> Self {
        Self {
            kind: PlateKind::Hwp,
            angle,
        }
    }

    /// Jones matrix in the circular basis.
    pub fn matrix<T: Real>(&self) -> Mat2<T> {
        waveplate_matrix(T::lit(self.kind.retardance()), T::lit(self.angle))
    }
}

/// Circular-basis Jones matrix of a plate with retardance `delta` and fast
/// axis at `phi`:
/// `e^{i delta/2} [[cos(delta/2), -i sin(delta/2) e^{-2i phi}], [-i sin(delta/2) e^{2i phi}, cos(delta/2)]]`.
pub fn waveplate_matrix<T: Real>(delta: T, phi: T) -> Mat2<T> {
    let half = delta / T::lit(2.0);
    let (s, c) = half.sin_cos();
    let mi = Complex::new(T::zero(), -T::one());
    let two_phi = phi + phi;
    Mat2::new(
        Complex::new(c, T::zero()),
        mi * cis(-two_phi) * s,
        mi * cis(two_phi) * s,
        Complex::new(c, T::zero()),
    )
    .scale(cis(half))
}

/// `J(QWP, qwp2) J(HWP, hwp) J(QWP, qwp1)`: light meets `qwp1` first.
pub fn waveplates_to_jones<T: Real>(qwp1: T, hwp: T, qwp2: T) -> Mat2<T> {
    let q = T::lit(QWP_RETARDANCE);
    let h = T::lit(HWP_RETARDANCE);
    waveplate_matrix(q, qwp2) * waveplate_matrix(h, hwp) * waveplate_matrix(q, qwp1)
}

/// Angles realizing a unitary with a QWP-HWP-QWP sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveplateAngles {
    pub qwp1: f64,
    pub hwp: f64,
    pub qwp2: f64,
    /// `waveplates_to_jones(qwp1, hwp, qwp2) = e^{i global_phase} U`.
    pub global_phase: f64,
}

/// Real residual `J(x) - e^{i chi} U` at the best-aligning phase `chi`.
fn decomposition_residual(u: &Mat2<f64>, x: &Vector3<f64>) -> ([f64; 8], Complex64) {
    let j = waveplates_to_jones(x[0], x[1], x[2]);
    let overlap = (u.adjoint() * j).trace();
    let phase = if overlap.norm() > 0.0 {
        overlap / overlap.norm()
    } else {
        Complex64::new(1.0, 0.0)
    };
    let mut r = [0.0; 8];
    for a in 0..2 {
        for b in 0..2 {
            let d = j.m[a][b] - phase * u.m[a][b];
            r[4 * a + 2 * b] = d.re;
            r[4 * a + 2 * b + 1] = d.im;
        }
    }
    (r, phase)
}

fn residual_norm(r: &[f64; 8]) -> f64 {
    r.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Levenberg-Marquardt on the 8 residuals with a central-difference
/// Jacobian.
fn refine(u: &Mat2<f64>, mut x: Vector3<f64>) -> (Vector3<f64>, f64) {
    let (mut r, _) = decomposition_residual(u, &x);
    let mut cost = residual_norm(&r);
    let mut mu = 1e-3;
    for _ in 0..100 {
        if cost < 1e-14 {
            break;
        }
        let h = 1e-7;
        let mut jac = [[0.0; 3]; 8];
        for k in 0..3 {
            let mut xp = x;
            xp[k] += h;
            let mut xm = x;
            xm[k] -= h;
            let (rp, _) = decomposition_residual(u, &xp);
            let (rm, _) = decomposition_residual(u, &xm);
            for i in 0..8 {
                jac[i][k] = (rp[i] - rm[i]) / (2.0 * h);
            }
        }
        let mut jtj = Matrix3::zeros();
        let mut g = Vector3::zeros();
        for i in 0..8 {
            for a in 0..3 {
                g[a] += jac[i][a] * r[i];
                for b in 0..3 {
                    jtj[(a, b)] += jac[i][a] * jac[i][b];
                }
            }
        }
        let mut improved = false;
        for _ in 0..20 {
            let mut a = jtj;
            for k in 0..3 {
                a[(k, k)] += mu * (1.0 + jtj[(k, k)]);
            }
            let Some(step) = a.lu().solve(&g) else {
                mu *= 10.0;
                continue;
            };
            let xn = x - step;
            let (rn, _) = decomposition_residual(u, &xn);
            let cn = residual_norm(&rn);
            if cn < cost {
                (x, r, cost) = (xn, rn, cn);
                mu = (mu * 0.3).max(1e-15);
                improved = true;
                break;
            }
            mu *= 10.0;
        }
        if !improved {
            break;
        }
    }
    (x, cost)
}

/// Accepted operator distance of a decomposition.
pub const DECOMPOSITION_TOL: f64 = 1e-10;

/// QWP-HWP-QWP angles realizing the unitary `u` up to a global phase. A
/// deterministic grid over the three angles seeds a Levenberg-Marquardt
/// refinement; the best grid points are tried in order.
pub fn unitary_to_waveplates(u: &Mat2<f64>) -> Result<WaveplateAngles> {
    if u.unitarity_residual() > 1e-9 {
        return Err(QwError::domain("only unitary matrices can be realized by wave plates"));
    }
    const GRID: usize = 8;
    let step = ANGLE_PERIOD / GRID as f64;
    let mut starts: Vec<(f64, Vector3<f64>)> = Vec::with_capacity(GRID * GRID * GRID);
    for a in 0..GRID {
        for b in 0..GRID {
            for c in 0..GRID {
                let x = Vector3::new(a as f64 * step, b as f64 * step, c as f64 * step);
                starts.push((residual_norm(&decomposition_residual(u, &x).0), x));
            }
        }
    }
    starts.sort_by(|p, q| p.0.total_cmp(&q.0));
    let mut best = (f64::INFINITY, Vector3::zeros());
    for (_, x0) in starts.iter().take(16) {
        let (x, cost) = refine(u, *x0);
        if cost < best.0 {
            best = (cost, x);
        }
        if best.0 < DECOMPOSITION_TOL * 1e-2 {
            break;
        }
    }
    let x = best.1;
    let j = waveplates_to_jones(x[0], x[1], x[2]);
    let residual = j.phase_distance(u);
    if !(residual < DECOMPOSITION_TOL) {
        return Err(QwError::Numerical {
            message: "wave-plate decomposition did not converge".into(),
            residual,
        });
    }
    let (_, phase) = decomposition_residual(u, &x);
    Ok(WaveplateAngles {
        qwp1: wrap_angle(x[0], ANGLE_PERIOD),
        hwp: wrap_angle(x[1], ANGLE_PERIOD),
        qwp2: wrap_angle(x[2], ANGLE_PERIOD),
        global_phase: phase.arg(),
    })
}

/// QWP-HWP-QWP angles realizing `coin` (in the `|up> = |L>` basis) up to a
/// global phase.
pub fn coin_to_waveplates(coin: &CoinOperator) -> Result<WaveplateAngles> {
    unitary_to_waveplates(coin.matrix())
}

/// Circular polarization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Polarization {
    L,
    R,
}

/// Action of a q-plate of charge `q` on `|m, pol>`:
/// `|m, R> -> |m - 2q, L>` and `|m, L> -> |m + 2q, R>`.
pub fn qplate_action(m: i64, pol: Polarization, q: f64) -> Result<(i64, Polarization)> {
    let two_q = 2.0 * q;
    if !two_q.is_finite() || two_q.fract() != 0.0 {
        return Err(QwError::Domain(format!("q-plate charge must be a half-integer, got {q}")));
    }
    let shift = two_q as i64;
    Ok(match pol {
        Polarization::L => (m + shift, Polarization::R),
        Polarization::R => (m - shift, Polarization::L),
    })
}
