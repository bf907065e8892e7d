//! Forward and inverse walk steps, multi-step walks and coin projection.
//!
//! Shift convention: the `UP` coin component stands still, the `DOWN`
//! component moves one site to the right. One step with coin `C` maps
//! `(u_{i,up}, u_{i,down})` to `(u'_{i,up}, u'_{i+1,down}) = C (u_{i,up}, u_{i,down})`.

use num_complex::Complex;

use crate::coin::CoinOperator;
use crate::error::{QwError, Result};
use crate::scalar::{czero, pair_norm_sqr, Real};
use crate::state::{norm_tol, zero_tol, TargetSuperposition, WalkerState, DOWN, UP};

/// Raw forward step on an amplitude table; output has one more site.
pub(crate) fn step_raw<T: Real>(amps: &[[Complex<T>; 2]], coin: &CoinOperator<T>) -> Vec<[Complex<T>; 2]> {
    if amps.is_empty() {
        return Vec::new();
    }
    let mut out = vec![[czero(), czero()]; amps.len() + 1];
    for (k, pair) in amps.iter().enumerate() {
        let w = coin.apply(*pair);
        out[k][UP] = out[k][UP] + w[0];
        out[k + 1][DOWN] = out[k + 1][DOWN] + w[1];
    }
    out
}

/// Raw inverse step; output has one site fewer. The caller is responsible
/// for the extremal-amplitude check.
pub(crate) fn inverse_step_raw<T: Real>(amps: &[[Complex<T>; 2]], coin: &CoinOperator<T>) -> Vec<[Complex<T>; 2]> {
    if amps.len() < 2 {
        return Vec::new();
    }
    let inv = coin.adjoint();
    amps.windows(2).map(|w| inv.apply([w[0][UP], w[1][DOWN]])).collect()
}

/// Applies one walk step. Never renormalizes.
pub fn apply_step<T: Real>(state: &WalkerState<T>, coin: &CoinOperator<T>) -> WalkerState<T> {
    WalkerState::new(state.origin(), step_raw(state.amps(), coin))
}

/// Inverts one walk step.
///
/// The step is a bijection on the unbounded line, so the pre-image always
/// exists; it spans `[first - 1, last]` before trimming. It is rejected when
/// it would place amplitude left of site 1, i.e. when `u_{1,down}` does not
/// vanish for a state starting at site 1.
pub fn apply_inverse_step<T: Real>(state: &WalkerState<T>, coin: &CoinOperator<T>) -> Result<WalkerState<T>> {
    apply_inverse_step_with_tol(state, coin, zero_tol::<T>())
}

/// [`apply_inverse_step`] with an explicit tolerance on the leaking
/// amplitude, relative to `max(1, |state|)`.
pub fn apply_inverse_step_with_tol<T: Real>(state: &WalkerState<T>, coin: &CoinOperator<T>, tol: T) -> Result<WalkerState<T>> {
    if state.is_empty() {
        return Ok(state.clone());
    }
    let (first, last) = (state.origin(), state.last_site());
    let first_down = state.amp(first, DOWN).norm();
    let scale = state.norm().max(T::one());
    if first <= 1 && first_down > tol * scale {
        return Err(QwError::NotInImage {
            first_down: first_down.to_f64_lossy(),
            last_up: state.amp(last, UP).norm().to_f64_lossy(),
        });
    }
    let mut padded = Vec::with_capacity(state.site_count() + 2);
    padded.push([czero(), czero()]);
    padded.extend_from_slice(state.amps());
    padded.push([czero(), czero()]);
    Ok(WalkerState::new(first - 1, inverse_step_raw(&padded, coin)))
}

/// Runs the walk from `|1> (x) initial_coin` through `coins` in order.
pub fn run_walk<T: Real>(initial_coin: [Complex<T>; 2], coins: &[CoinOperator<T>]) -> Result<WalkerState<T>> {
    if (pair_norm_sqr(&initial_coin) - T::one()).abs() > norm_tol::<T>() {
        return Err(QwError::domain("initial coin state must be normalized"));
    }
    Ok(WalkerState::new(1, run_walk_raw(initial_coin, coins)))
}

/// Untrimmed walk from site 1: the table always has `coins.len() + 1` sites.
pub(crate) fn run_walk_raw<T: Real>(initial_coin: [Complex<T>; 2], coins: &[CoinOperator<T>]) -> Vec<[Complex<T>; 2]> {
    let mut amps = vec![initial_coin];
    for coin in coins {
        amps = step_raw(&amps, coin);
    }
    amps
}

/// Outcome of projecting the coin onto a bra.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionResult<T> {
    /// Label of the first entry of `site_amps`.
    pub origin: i64,
    /// Unnormalized projected amplitudes `conj(a) u_{i,up} + conj(b) u_{i,down}`.
    pub site_amps: Vec<Complex<T>>,
    /// `sum_i |site_amps_i|^2`.
    pub probability: T,
    /// `site_amps / sqrt(probability)`; empty when the probability vanishes.
    pub normalized: Vec<Complex<T>>,
}

impl<T: Real> ProjectionResult<T> {
    /// Fidelity against a target living on sites `1..=target.len()`.
    pub fn fidelity_to(&self, target: &TargetSuperposition<T>) -> T {
        if self.normalized.is_empty() {
            return T::zero();
        }
        let mut ov = czero::<T>();
        for (k, a) in self.normalized.iter().enumerate() {
            let label = self.origin + k as i64;
            if label >= 1 && (label as usize) <= target.len() {
                ov = ov + target.amps()[label as usize - 1].conj() * *a;
            }
        }
        ov.norm_sqr()
    }
}

/// Projects the coin of `state` onto `<bra|` with `bra = (a, b)` normalized.
pub fn project_coin<T: Real>(state: &WalkerState<T>, bra: [Complex<T>; 2]) -> Result<ProjectionResult<T>> {
    let n = pair_norm_sqr(&bra);
    if !(n > T::zero()) {
        return Err(QwError::domain("projection bra cannot be zero"));
    }
    if (n - T::one()).abs() > norm_tol::<T>() {
        return Err(QwError::domain("projection bra must be normalized"));
    }
    Ok(project_unchecked(state.origin(), state.amps(), bra))
}

pub(crate) fn project_unchecked<T: Real>(origin: i64, amps: &[[Complex<T>; 2]], bra: [Complex<T>; 2]) -> ProjectionResult<T> {
    let (a, b) = (bra[0].conj(), bra[1].conj());
    let site_amps: Vec<Complex<T>> = amps.iter().map(|p| a * p[UP] + b * p[DOWN]).collect();
    let probability: T = site_amps.iter().map(|x| x.norm_sqr()).sum();
    let normalized = if probability > T::zero() {
        let s = probability.sqrt();
        site_amps.iter().map(|x| *x / s).collect()
    } else {
        Vec::new()
    };
    ProjectionResult {
        origin,
        site_amps,
        probability,
        normalized,
    }
}

/// The `|+> = (|up> + |down>)/sqrt(2)` bra used by default.
pub fn plus_bra<T: Real>() -> [Complex<T>; 2] {
    let h = T::FRAC_1_SQRT_2();
    [Complex::new(h, T::zero()), Complex::new(h, T::zero())]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4, PI};

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }
    const ZERO: Complex<f64> = Complex::new(0.0, 0.0);
    const ONE: Complex<f64> = Complex::new(1.0, 0.0);

    fn up_at_1() -> WalkerState<f64> {
        WalkerState::localized(1, [ONE, ZERO])
    }

    #[test]
    fn identity_keeps_up_in_place() {
        let out = apply_step(&up_at_1(), &CoinOperator::identity());
        assert_eq!(out, up_at_1());
    }

    #[test]
    fn identity_shifts_down_right() {
        let s = WalkerState::localized(1, [ZERO, ONE]);
        let out = apply_step(&s, &CoinOperator::identity());
        assert_eq!(out, WalkerState::localized(2, [ZERO, ONE]));
    }

    #[test]
    fn eighth_turn_splits_amplitude() {
        let coin = CoinOperator::from_params(FRAC_PI_4, 0.0, 0.0).unwrap();
        let out = apply_step(&up_at_1(), &coin);
        let h = FRAC_1_SQRT_2;
        let expect = WalkerState::new(1, vec![[c(h, 0.0), ZERO], [ZERO, c(-h, 0.0)]]);
        assert!(out.max_abs_diff(&expect) < 1e-15);

        let back = apply_inverse_step(&expect, &coin).unwrap();
        assert!(back.max_abs_diff(&up_at_1()) < 1e-15);
    }

    #[test]
    fn inverse_of_trimmed_identity_step() {
        let back = apply_inverse_step(&up_at_1(), &CoinOperator::identity()).unwrap();
        assert_eq!(back, up_at_1());
    }

    #[test]
    fn inverse_of_pure_shift() {
        let s = WalkerState::localized(2, [ZERO, ONE]);
        let back = apply_inverse_step(&s, &CoinOperator::identity()).unwrap();
        assert_eq!(back, WalkerState::localized(1, [ZERO, ONE]));
    }

    #[test]
    fn inverse_rejects_states_outside_image() {
        let s = WalkerState::new(1, vec![[ONE, ONE], [ONE, ZERO]]);
        match apply_inverse_step(&s, &CoinOperator::identity()) {
            Err(QwError::NotInImage { first_down, last_up }) => {
                assert_eq!(first_down, 1.0);
                assert_eq!(last_up, 1.0);
            }
            other => panic!("expected NotInImage, got {other:?}"),
        }
    }

    #[test]
    fn run_walk_examples() {
        let out = run_walk([ONE, ZERO], &[CoinOperator::identity()]).unwrap();
        assert_eq!(out, up_at_1());

        let coin = CoinOperator::from_params(FRAC_PI_4, 0.0, 0.0).unwrap();
        let two = run_walk([ONE, ZERO], &[coin, coin]).unwrap();
        // Hand expansion of two eighth-turn steps from |1,up>.
        let expect = WalkerState::new(1, vec![[c(0.5, 0.0), ZERO], [c(-0.5, 0.0), c(-0.5, 0.0)], [ZERO, c(-0.5, 0.0)]]);
        assert!(two.max_abs_diff(&expect) < 1e-15);

        let empty = run_walk([ONE, ZERO], &[]).unwrap();
        assert_eq!(empty, up_at_1());
        assert!(run_walk([ONE, ONE], &[]).is_err());
    }

    #[test]
    fn five_random_steps_span_six_sites() {
        let coins: Vec<_> = (0..5)
            .map(|k| CoinOperator::from_params(0.2 + 0.2 * k as f64, 0.3 * k as f64, 1.0 - 0.4 * k as f64).unwrap())
            .collect();
        let out = run_walk([c(0.6, 0.0), c(0.0, 0.8)], &coins).unwrap();
        assert_eq!(out.site_count(), 6);
        assert_eq!(out.origin(), 1);
        assert_eq!(out.amp(1, DOWN), ZERO);
        assert_eq!(out.amp(6, UP), ZERO);
    }

    #[test]
    fn projection_examples() {
        let p = project_coin(&up_at_1(), [ONE, ZERO]).unwrap();
        assert_eq!(p.probability, 1.0);
        assert_eq!(p.normalized, vec![ONE]);
        let q = project_coin(&up_at_1(), [ZERO, ONE]).unwrap();
        assert_eq!(q.probability, 0.0);
        assert!(q.normalized.is_empty());
        assert!(project_coin(&up_at_1(), [ZERO, ZERO]).is_err());
        assert!(project_coin(&up_at_1(), [ONE, ONE]).is_err());
    }

    #[test]
    fn single_precision_walk() {
        let coin = CoinOperator::<f32>::from_params(0.7, 0.1, -0.4).unwrap();
        let out = run_walk([Complex::new(1.0f32, 0.0), Complex::new(0.0, 0.0)], &[coin; 6]).unwrap();
        assert!((out.norm_sqr() - 1.0).abs() < 1e-5);
        assert_eq!(out.site_count(), 7);
        let _ = FRAC_PI_2;
    }

    fn arb_pair() -> impl Strategy<Value = [Complex<f64>; 2]> {
        prop::array::uniform4(-1.0f64..1.0).prop_map(|x| [c(x[0], x[1]), c(x[2], x[3])])
    }

    fn arb_state() -> impl Strategy<Value = WalkerState<f64>> {
        prop::collection::vec(arb_pair(), 1..8).prop_map(|a| WalkerState::from_raw(1, a))
    }

    fn arb_coin() -> impl Strategy<Value = CoinOperator<f64>> {
        (0.0f64..FRAC_PI_2, -PI..PI, -PI..PI).prop_map(|(t, x, z)| CoinOperator::from_params(t, x, z).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn step_conserves_norm(s in arb_state(), coin in arb_coin()) {
            let out = apply_step(&s, &coin);
            prop_assert!((out.norm() - s.norm()).abs() < 1e-12);
        }

        #[test]
        fn inverse_undoes_step(s in arb_state(), coin in arb_coin()) {
            let s = s.trimmed();
            prop_assume!(!s.is_empty());
            let back = apply_inverse_step(&apply_step(&s, &coin), &coin).unwrap();
            prop_assert!(back.max_abs_diff(&s) < 1e-10);
        }
    }

    proptest! {
        #[test]
        fn step_is_linear(
            s1 in arb_state(), s2 in arb_state(), coin in arb_coin(),
            a in arb_pair(),
        ) {
            let (alpha, beta) = (a[0], a[1]);
            let lhs = apply_step(&s1.combine(alpha, &s2, beta), &coin);
            let rhs = apply_step(&s1, &coin).combine(alpha, &apply_step(&s2, &coin), beta);
            prop_assert!(lhs.max_abs_diff(&rhs) < 1e-12);
        }

        #[test]
        fn orthonormal_bras_split_probability(s in arb_state(), b in arb_pair()) {
            let s = s.trimmed();
            prop_assume!(!s.is_empty());
            let s = s.normalized().unwrap();
            let b = crate::scalar::normalize_pair(b);
            prop_assume!(b.is_some());
            let b = b.unwrap();
            let perp = [-b[1].conj(), b[0].conj()];
            let p1 = project_coin(&s, b).unwrap().probability;
            let p2 = project_coin(&s, perp).unwrap().probability;
            prop_assert!((p1 + p2 - 1.0).abs() < 1e-12);
        }
    }
}
