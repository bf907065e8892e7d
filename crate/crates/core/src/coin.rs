//! Coin operators and their SU(2) parametrization.
//!
//! The canonical form is
//!
//! ```text
//! C(theta, xi, zeta) = [  e^{i xi}   cos(theta)    e^{i zeta} sin(theta) ]
//!                      [ -e^{-i zeta} sin(theta)   e^{-i xi}  cos(theta) ]
//! ```
//!
//! with `theta` in `[0, pi/2]`. Coins built any other way (column
//! construction, raw matrices) are general unitaries; [`CoinOperator::params`]
//! recovers the canonical angles together with the global phase that was
//! factored out.

use num_complex::Complex;

use crate::error::{QwError, Result};
use crate::mat2::Mat2;
use crate::scalar::{cis, normalize_pair, Real};
use crate::tol::{TOL_UNITARY, TOL_ZERO};

/// Canonical angles of a coin plus the global phase separating it from SU(2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoinParams<T> {
    pub theta: T,
    pub xi: T,
    pub zeta: T,
    /// `matrix = e^{i phase} C(theta, xi, zeta)`.
    pub phase: T,
}

impl<T: Real> CoinParams<T> {
    pub fn new(theta: T, xi: T, zeta: T) -> Self {
        Self {
            theta,
            xi,
            zeta,
            phase: T::zero(),
        }
    }

    /// Angle by index: 0 = theta, 1 = xi, 2 = zeta.
    pub fn angle(&self, which: usize) -> T {
        match which {
            0 => self.theta,
            1 => self.xi,
            2 => self.zeta,
            _ => panic!("coin angle index {which} out of range"),
        }
    }

    pub fn angle_mut(&mut self, which: usize) -> &mut T {
        match which {
            0 => &mut self.theta,
            1 => &mut self.xi,
            2 => &mut self.zeta,
            _ => panic!("coin angle index {which} out of range"),
        }
    }

    /// Evaluates the canonical matrix times the stored global phase, without
    /// any range check on `theta`.
    pub fn matrix_unchecked(&self) -> Mat2<T> {
        let (s, c) = self.theta.sin_cos();
        let m = Mat2::new(cis(self.xi) * c, cis(self.zeta) * s, -cis(-self.zeta) * s, cis(-self.xi) * c);
        if self.phase == T::zero() {
            m
        } else {
            m.scale(cis(self.phase))
        }
    }
}

/// A 2x2 unitary coin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoinOperator<T> {
    matrix: Mat2<T>,
}

fn unitary_tol<T: Real>() -> T {
    T::lit(TOL_UNITARY).max(T::epsilon() * T::lit(64.0))
}

fn zero_tol<T: Real>() -> T {
    T::lit(TOL_ZERO).max(T::epsilon() * T::lit(8.0))
}

impl<T: Real> CoinOperator<T> {
    pub fn identity() -> Self {
        Self { matrix: Mat2::identity() }
    }

    /// Canonical special-unitary coin. `theta` must lie in `[0, pi/2]`.
    pub fn from_params(theta: T, xi: T, zeta: T) -> Result<Self> {
        let slack = T::epsilon() * T::lit(4.0);
        if !(theta >= -slack && theta <= T::FRAC_PI_2() + slack) || !xi.is_finite() || !zeta.is_finite() {
            return Err(QwError::domain(format!("theta = {theta} outside [0, pi/2] or non-finite phase")));
        }
        Ok(Self {
            matrix: CoinParams::new(theta, xi, zeta).matrix_unchecked(),
        })
    }

    /// Coin whose first column is proportional (positive real scale) to
    /// `col`, with second column `e^{i alpha} (-col_1^*, col_0^*)` normalized.
    pub fn from_first_column(col: [Complex<T>; 2], alpha: T) -> Result<Self> {
        let c = normalize_pair(col).ok_or_else(|| QwError::domain("first column of a coin cannot be zero"))?;
        let ph = cis(alpha);
        Ok(Self {
            matrix: Mat2::from_columns(c, [-ph * c[1].conj(), ph * c[0].conj()]),
        })
    }

    /// Coin whose second column is `e^{i alpha}` times `col` normalized.
    ///
    /// Equivalent to [`from_first_column`](Self::from_first_column) applied
    /// to `(col_1^*, -col_0^*)`, so the `alpha` convention is shared.
    pub fn from_second_column(col: [Complex<T>; 2], alpha: T) -> Result<Self> {
        let w = normalize_pair(col).ok_or_else(|| QwError::domain("second column of a coin cannot be zero"))?;
        Self::from_first_column([w[1].conj(), -w[0].conj()], alpha)
    }

    /// Wraps an arbitrary matrix after checking unitarity.
    pub fn from_matrix(matrix: Mat2<T>) -> Result<Self> {
        let res = matrix.unitarity_residual();
        if !(res <= unitary_tol::<T>()) {
            return Err(QwError::domain(format!(
                "matrix is not unitary (residual {:e})",
                res.to_f64_lossy()
            )));
        }
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &Mat2<T> {
        &self.matrix
    }

    pub fn adjoint(&self) -> Self {
        Self {
            matrix: self.matrix.adjoint(),
        }
    }

    pub fn apply(&self, v: [Complex<T>; 2]) -> [Complex<T>; 2] {
        self.matrix.apply(v)
    }

    /// Right-multiplies by `diag(1, e^{i alpha})`.
    pub fn with_column_phase(&self, alpha: T) -> Self {
        let ph = cis(alpha);
        let m = &self.matrix.m;
        Self {
            matrix: Mat2::new(m[0][0], m[0][1] * ph, m[1][0], m[1][1] * ph),
        }
    }

    /// Recovers `(theta, xi, zeta)` and the global phase.
    ///
    /// Where an angle is undefined (`zeta` at `theta = 0`, `xi` at
    /// `theta = pi/2`) it is set to zero.
    pub fn params(&self) -> CoinParams<T> {
        let det = self.matrix.det();
        let phase = det.arg() / T::lit(2.0);
        let v = self.matrix.scale(cis(-phase));
        let a = v.m[0][0];
        let b = v.m[0][1];
        let theta = b.norm().atan2(a.norm());
        let tiny = zero_tol::<T>();
        let xi = if a.norm() > tiny { a.arg() } else { T::zero() };
        let zeta = if b.norm() > tiny { b.arg() } else { T::zero() };
        CoinParams { theta, xi, zeta, phase }
    }

    pub fn from_coin_params(p: &CoinParams<T>) -> Result<Self> {
        let c = Self::from_params(p.theta, p.xi, p.zeta)?;
        Ok(if p.phase == T::zero() {
            c
        } else {
            Self {
                matrix: c.matrix.scale(cis(p.phase)),
            }
        })
    }

    /// Like [`from_coin_params`](Self::from_coin_params) but accepts any real
    /// `theta`; perturbation sweeps push angles outside the canonical range.
    pub fn from_coin_params_unchecked(p: &CoinParams<T>) -> Self {
        Self {
            matrix: p.matrix_unchecked(),
        }
    }
}
