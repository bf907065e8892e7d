//! Closed-form treatment of two-step targets `(u_1, u_2, u_3)`.
//!
//! The single condition is `u_1^* (u_2 - d) + d^* u_3 = 0`. For
//! `|u_1| != |u_3|` it has the unique solution
//! `d = u_1 (u_1^* u_2 + u_2^* u_3) / (|u_1|^2 - |u_3|^2)`.
//!
//! For `|u_1| = |u_3| = r > 0` write `k = e^{i (arg u_1 + arg u_3) / 2}`.
//! The component of `d` along `k` drops out of the condition, which leaves
//! the one-parameter family `d = u_2 / 2 + t k` with `t` real, provided
//! `Re(u_2 k^*) = 0`; otherwise there is no solution.
//! Along the family `|Phi|^2 = 2 r^2 + |u_2|^2 / 2 + 2 t^2`, so the
//! projection probability peaks at `t = 0`.

use num_complex::Complex64;

use super::{d_probability, DSolution, SolveOutcome};
use crate::engineer::dsystem::d_residuals;
use crate::error::{QwError, Result};
use crate::TargetSuperposition;

/// `| |u_1|^2 - |u_3|^2 |` below this is treated as the degenerate branch.
pub const DEGENERATE_TOL: f64 = 1e-12;

/// Sampled values of the free family parameter `t` in the degenerate
/// branch.
pub const FAMILY_GRID: [f64; 9] = [0.0, 0.25, -0.25, 0.5, -0.5, 1.0, -1.0, 2.0, -2.0];

fn solution(target: &[Complex64], d: Complex64, family_t: Option<f64>) -> DSolution {
    let residual_max = d_residuals(target, &[d]).iter().fold(0.0f64, |a, z| a.max(z.norm()));
    DSolution {
        d: vec![d],
        residual_max,
        probability: d_probability(target, &[d]),
        family_t,
    }
}

/// Unit direction `k` of the degenerate family.
pub fn family_direction(u1: Complex64, u3: Complex64) -> Complex64 {
    Complex64::from_polar(1.0, 0.5 * (u1.arg() + u3.arg()))
}

/// All solutions of the two-step condition for a 3-site target.
pub fn solve_d2(target: &TargetSuperposition) -> Result<SolveOutcome> {
    if target.len() != 3 {
        return Err(QwError::domain(format!(
            "the two-step solver needs 3 amplitudes, got {}",
            target.len()
        )));
    }
    let u = target.amps();
    let (u1, u2, u3) = (u[0], u[1], u[2]);
    let gap = u1.norm_sqr() - u3.norm_sqr();
    if gap.abs() > DEGENERATE_TOL {
        let d = u1 * (u1.conj() * u2 + u2.conj() * u3) / gap;
        return Ok(SolveOutcome::found(vec![solution(u, d, None)]));
    }
    if u1.norm() <= DEGENERATE_TOL.sqrt() {
        // u_1 = u_3 = 0: the condition is void; report the most probable point.
        let d = u2 * 0.5;
        return Ok(SolveOutcome {
            solutions: vec![solution(u, d, Some(0.0))],
            diagnostic: Some("u1 = u3 = 0: every d solves the condition; returning d = u2/2 (maximum probability)".into()),
            starts: 0,
        });
    }
    let k = family_direction(u1, u3);
    let consistency = (u2 * k.conj()).re;
    if consistency.abs() > 1e-9 {
        let mut msg = format!(
            "|u1| = |u3| and Re(u2 k*) = {consistency:.3e} != 0 with k = e^{{i(arg u1 + arg u3)/2}}: target is not reachable in 2 steps"
        );
        let real = u.iter().all(|z| z.im.abs() <= 1e-12);
        if real && (u1 - u3).norm() <= DEGENERATE_TOL.sqrt() {
            msg.push_str("; for real u1 = u3 the analytic d diverges and the projection probability tends to 0");
        }
        return Ok(SolveOutcome {
            solutions: Vec::new(),
            diagnostic: Some(msg),
            starts: 0,
        });
    }
    if (u1 + u3).norm() <= DEGENERATE_TOL.sqrt() {
        // Removable singularity of the analytic formula: its limit is the
        // t = 0 member of the family.
        return Ok(SolveOutcome {
            solutions: vec![solution(u, u2 * 0.5, Some(0.0))],
            diagnostic: Some("u1 = -u3: removable singularity, returning the limit d = u2/2".into()),
            starts: 0,
        });
    }
    let mut solutions: Vec<DSolution> = FAMILY_GRID.iter().map(|&t| solution(u, u2 * 0.5 + k * t, Some(t))).collect();
    super::sort_solutions(&mut solutions);
    Ok(SolveOutcome {
        solutions,
        diagnostic: Some(format!(
            "|u1| = |u3|: one-parameter family d = u2/2 + t k, k = {:.6}{:+.6}i, sampled at t in {FAMILY_GRID:?}",
            k.re, k.im
        )),
        starts: 0,
    })
}

/// Projection probability of the two-step solution for a real target
/// `(u_1, u_2, u_3)` with `u_3 = sqrt(1 - u_1^2 - u_2^2) >= 0`:
/// `p = (u_1 - u_3)^2 / (2 (1 - u_2^2)(1 - 2 u_1 u_3))`, and 0 at `u_1 = u_3`.
pub fn projection_probability_2step_closed_form(u1: f64, u2: f64) -> Result<f64> {
    let rest = 1.0 - u1 * u1 - u2 * u2;
    if !(rest >= -1e-12) || !u1.is_finite() || !u2.is_finite() {
        return Err(QwError::domain(format!("u1^2 + u2^2 = {} exceeds 1", u1 * u1 + u2 * u2)));
    }
    let u3 = rest.max(0.0).sqrt();
    let num = (u1 - u3).powi(2);
    if num <= 1e-30 {
        return Ok(0.0);
    }
    Ok(num / (2.0 * (1.0 - u2 * u2) * (1.0 - 2.0 * u1 * u3)))
}
