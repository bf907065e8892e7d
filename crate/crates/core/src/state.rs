//! Walker+coin states and site-only targets.

use num_complex::Complex;

use crate::error::{QwError, Result};
use crate::scalar::{cone, czero, pair_norm_sqr, Real};
use crate::tol::{TOL_NORM, TOL_ZERO};

/// Coin basis index of the stand-still component.
pub const UP: usize = 0;
/// Coin basis index of the move-right component.
pub const DOWN: usize = 1;

/// Amplitude table `u[i][s]` over a contiguous block of sites.
///
/// `origin` is the 1-based label of the first stored site. States built with
/// [`WalkerState::new`] are trimmed: the first and last stored sites both
/// carry an amplitude above the zero tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkerState<T> {
    origin: i64,
    amps: Vec<[Complex<T>; 2]>,
}

pub(crate) fn zero_tol<T: Real>() -> T {
    T::lit(TOL_ZERO).max(T::epsilon() * T::lit(8.0))
}

pub(crate) fn norm_tol<T: Real>() -> T {
    T::lit(TOL_NORM).max(T::epsilon() * T::lit(64.0))
}

impl<T: Real> WalkerState<T> {
    /// Builds a state and trims negligible sites at both ends.
    pub fn new(origin: i64, amps: Vec<[Complex<T>; 2]>) -> Self {
        Self::from_raw(origin, amps).trimmed()
    }

    /// Builds a state keeping the table exactly as given.
    pub fn from_raw(origin: i64, amps: Vec<[Complex<T>; 2]>) -> Self {
        Self { origin, amps }
    }

    /// `|site> (x) (coin_up |up> + coin_down |down>)`.
    pub fn localized(site: i64, coin: [Complex<T>; 2]) -> Self {
        Self::new(site, vec![coin])
    }

    /// 1-based label of the first stored site.
    pub fn origin(&self) -> i64 {
        self.origin
    }

    /// Label of the last stored site.
    pub fn last_site(&self) -> i64 {
        self.origin + self.amps.len() as i64 - 1
    }

    pub fn amps(&self) -> &[[Complex<T>; 2]] {
        &self.amps
    }

    pub fn into_amps(self) -> Vec<[Complex<T>; 2]> {
        self.amps
    }

    /// Number of stored sites.
    pub fn site_count(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    /// Amplitude at a site label; zero outside the stored range.
    pub fn amp(&self, site: i64, coin: usize) -> Complex<T> {
        let k = site - self.origin;
        if k < 0 || k as usize >= self.amps.len() {
            czero()
        } else {
            self.amps[k as usize][coin]
        }
    }

    pub fn norm_sqr(&self) -> T {
        self.amps.iter().map(pair_norm_sqr).sum()
    }

    pub fn norm(&self) -> T {
        self.norm_sqr().sqrt()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - T::one()).abs() <= norm_tol::<T>()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if !(n > T::zero()) || !n.is_finite() {
            return Err(QwError::domain("cannot normalize a zero or non-finite state"));
        }
        Ok(self.scaled(Complex::new(T::one() / n, T::zero())))
    }

    pub fn scaled(&self, s: Complex<T>) -> Self {
        Self {
            origin: self.origin,
            amps: self.amps.iter().map(|p| [p[0] * s, p[1] * s]).collect(),
        }
    }

    /// Drops leading and trailing sites whose amplitudes are all below the
    /// zero tolerance.
    pub fn trimmed(mut self) -> Self {
        let tiny = zero_tol::<T>();
        let keep = |p: &[Complex<T>; 2]| p[0].norm() > tiny || p[1].norm() > tiny;
        match self.amps.iter().position(keep) {
            None => Self {
                origin: self.origin,
                amps: Vec::new(),
            },
            Some(first) => {
                let last = self.amps.iter().rposition(keep).unwrap_or(first);
                self.amps.truncate(last + 1);
                self.amps.drain(..first);
                self.origin += first as i64;
                self
            }
        }
    }

    fn union_range(&self, other: &Self) -> (i64, i64) {
        match (self.is_empty(), other.is_empty()) {
            (true, true) => (1, 0),
            (true, false) => (other.origin, other.last_site()),
            (false, true) => (self.origin, self.last_site()),
            (false, false) => (self.origin.min(other.origin), self.last_site().max(other.last_site())),
        }
    }

    /// `<self|other>` over the union of both site ranges.
    pub fn inner(&self, other: &Self) -> Complex<T> {
        let (lo, hi) = self.union_range(other);
        let mut acc = czero();
        for site in lo..=hi {
            for s in [UP, DOWN] {
                acc = acc + self.amp(site, s).conj() * other.amp(site, s);
            }
        }
        acc
    }

    /// `|<a|b>|^2 / (<a|a><b|b>)`; zero if either state vanishes.
    pub fn fidelity(&self, other: &Self) -> T {
        let den = self.norm_sqr() * other.norm_sqr();
        if den <= T::zero() {
            return T::zero();
        }
        self.inner(other).norm_sqr() / den
    }

    /// Largest elementwise modulus of `self - other` over the union range.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        let (lo, hi) = self.union_range(other);
        let mut worst = T::zero();
        for site in lo..=hi {
            for s in [UP, DOWN] {
                worst = worst.max((self.amp(site, s) - other.amp(site, s)).norm());
            }
        }
        worst
    }

    /// `a self + b other` on the union range, untrimmed.
    pub fn combine(&self, a: Complex<T>, other: &Self, b: Complex<T>) -> Self {
        let (lo, hi) = self.union_range(other);
        let amps = (lo..=hi)
            .map(|site| {
                [
                    a * self.amp(site, UP) + b * other.amp(site, UP),
                    a * self.amp(site, DOWN) + b * other.amp(site, DOWN),
                ]
            })
            .collect();
        Self::from_raw(lo, amps)
    }

    /// Multiplies by the global phase that makes the first non-negligible
    /// amplitude real and positive.
    pub fn phase_canonical(&self) -> Self {
        let tiny = zero_tol::<T>();
        let first = self.amps.iter().flat_map(|p| p.iter()).find(|a| a.norm() > tiny).copied();
        match first {
            Some(a) => self.scaled(a.conj() / a.norm()),
            None => self.clone(),
        }
    }

    /// `v_i = (u_{i,up}, u_{i+1,down})` for consecutive stored sites.
    pub fn v_vectors(&self) -> Vec<VVector<T>> {
        self.amps
            .windows(2)
            .enumerate()
            .map(|(k, w)| VVector {
                site: self.origin + k as i64,
                v: [w[0][UP], w[1][DOWN]],
            })
            .collect()
    }
}

/// Amplitude pair `(u_{i,up}, u_{i+1,down})` straddling sites `i` and `i+1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VVector<T> {
    /// Label of the left site `i`.
    pub site: i64,
    pub v: [Complex<T>; 2],
}

/// Normalized site superposition `sum_i u_i |i>` over sites `1..=len`.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetSuperposition<T> {
    amps: Vec<Complex<T>>,
}

impl<T: Real> TargetSuperposition<T> {
    /// Normalizes `amps`. Needs at least two sites and a nonzero vector.
    pub fn new(amps: Vec<Complex<T>>) -> Result<Self> {
        if amps.len() < 2 {
            return Err(QwError::domain(format!("a target needs at least 2 sites, got {}", amps.len())));
        }
        let n: T = amps.iter().map(|a| a.norm_sqr()).sum::<T>().sqrt();
        if !(n > T::zero()) || !n.is_finite() {
            return Err(QwError::domain("target vector is zero or non-finite"));
        }
        Ok(Self {
            amps: amps.into_iter().map(|a| a / n).collect(),
        })
    }

    pub fn from_real(amps: &[T]) -> Result<Self> {
        Self::new(amps.iter().map(|&x| Complex::new(x, T::zero())).collect())
    }

    pub fn amps(&self) -> &[Complex<T>] {
        &self.amps
    }

    /// Number of sites `n + 1`.
    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    /// Number of walk steps needed to span the target, `len - 1`.
    pub fn steps(&self) -> usize {
        self.amps.len() - 1
    }

    /// `|<self|other>|^2 / |other|^2` with `other` given on sites `1..`;
    /// zero for a vanishing `other`. Entries beyond the target are compared
    /// against zero.
    pub fn fidelity_with(&self, other: &[Complex<T>]) -> T {
        let den: T = other.iter().map(|a| a.norm_sqr()).sum();
        if !(den > T::zero()) {
            return T::zero();
        }
        let mut ov = czero::<T>();
        for (a, b) in self.amps.iter().zip(other) {
            ov = ov + a.conj() * *b;
        }
        ov.norm_sqr() / den
    }
}

/// Balanced superposition `(1, ..., 1)/sqrt(len)`.
pub fn balanced_target<T: Real>(len: usize) -> Result<TargetSuperposition<T>> {
    TargetSuperposition::new(vec![cone(); len])
}
