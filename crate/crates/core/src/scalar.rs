//! Scalar abstraction shared by the walk kernels.
//!
//! Every amplitude-level routine (coins, steps, reachability, back-solving,
//! Jones matrices) is written against [`Real`] so it runs in `f32` or `f64`.
//! Search-based routines (root finding, optimization) are fixed to `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive};

/// Real scalar usable as the component type of walk amplitudes.
pub trait Real: Float + FloatConst + FromPrimitive + Default + Debug + Display + Sum + Send + Sync + 'static {
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    /// Lossy conversion to `f64`, used for reporting and serialization.
    #[inline]
    fn to_f64_lossy(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Complex amplitude over a [`Real`] scalar.
pub type Amp<T> = Complex<T>;

/// Unit-modulus phase factor `e^{i phi}`.
#[inline]
pub fn cis<T: Real>(phi: T) -> Complex<T> {
    Complex::new(phi.cos(), phi.sin())
}

#[inline]
pub fn czero<T: Real>() -> Complex<T> {
    Complex::new(T::zero(), T::zero())
}

#[inline]
pub fn cone<T: Real>() -> Complex<T> {
    Complex::new(T::one(), T::zero())
}

#[inline]
pub fn creal<T: Real>(x: T) -> Complex<T> {
    Complex::new(x, T::zero())
}

/// Squared modulus of a two-component complex vector.
#[inline]
pub fn pair_norm_sqr<T: Real>(p: &[Complex<T>; 2]) -> T {
    p[0].norm_sqr() + p[1].norm_sqr()
}

/// Hermitian inner product `a^dagger b` of two complex pairs.
#[inline]
pub fn pair_dot<T: Real>(a: &[Complex<T>; 2], b: &[Complex<T>; 2]) -> Complex<T> {
    a[0].conj() * b[0] + a[1].conj() * b[1]
}

/// Normalizes a complex pair. Returns `None` for the zero pair.
pub fn normalize_pair<T: Real>(p: [Complex<T>; 2]) -> Option<[Complex<T>; 2]> {
    let n = pair_norm_sqr(&p).sqrt();
    if n <= T::min_positive_value() || !n.is_finite() {
        return None;
    }
    Some([p[0] / n, p[1] / n])
}

/// Maps an angle into `[0, period)`.
pub fn wrap_angle<T: Real>(x: T, period: T) -> T {
    let r = x % period;
    let r = if r < T::zero() { r + period } else { r };
    if r >= period {
        T::zero()
    } else {
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_angle_into_range() {
        let pi = std::f64::consts::PI;
        assert!((wrap_angle(-0.5, pi) - (pi - 0.5)).abs() < 1e-15);
        assert!((wrap_angle(3.0 * pi + 0.25, pi) - 0.25).abs() < 1e-12);
        assert_eq!(wrap_angle(0.0, pi), 0.0);
    }

    #[test]
    fn pair_helpers() {
        let a = [Complex::new(1.0f32, 0.0), Complex::new(0.0, 1.0)];
        let n = normalize_pair(a).unwrap();
        assert!((pair_norm_sqr(&n) - 1.0).abs() < 1e-6);
        assert!(normalize_pair([czero::<f64>(), czero()]).is_none());
        assert!((pair_dot(&a, &a).re - 2.0).abs() < 1e-6);
    }
}
