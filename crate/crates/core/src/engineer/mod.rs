//! Target engineering: from a site superposition to a reachable full state
//! and the coins that produce it.
//!
//! Every full state
//!
//! ```text
//! Phi = N ( u_1 |1,up> + u_{n+1} |n+1,down> + sum_{i=2}^{n} (u_i - d_i) |i,up> + d_i |i,down> )
//! ```
//!
//! projects onto the target on the `|+>` coin state, whatever the interior
//! parameters `d_i`. Choosing `d` such that `Phi` is reachable turns the
//! problem into the quadratic system of [`dsystem`]; the coins then follow
//! from [`crate::backsolve`].

pub mod dsystem;
pub mod two_step;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::backsolve::{backsolve, peel_to_first_layer};
use crate::error::{QwError, Result};
use crate::scalar::normalize_pair;
use crate::state::{DOWN, UP};
use crate::tol::TOL_REACH;
use crate::walk::{plus_bra, project_coin, run_walk};
use crate::{CoinOperator, TargetSuperposition, WalkerState};

pub use dsystem::{d_jacobian_conditioning, d_residuals, refine_root, DSystemOptions};
pub use two_step::{projection_probability_2step_closed_form, solve_d2};

/// Largest step count handled by the polynomial route; beyond it use the
/// fidelity optimizer.
pub const N_MAX_POLY: usize = 6;

/// One root of the `d` system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DSolution {
    /// `d_2..d_n`.
    pub d: Vec<Complex64>,
    pub residual_max: f64,
    /// Projection probability on `|+>` of the assembled state.
    pub probability: f64,
    /// Free parameter of a degenerate two-step family, if any.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub family_t: Option<f64>,
}

/// Roots plus an explanation when the list is empty or special.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub solutions: Vec<DSolution>,
    pub diagnostic: Option<String>,
    /// Random starts used (0 for closed forms).
    pub starts: usize,
}

impl SolveOutcome {
    fn found(solutions: Vec<DSolution>) -> Self {
        Self {
            solutions,
            diagnostic: None,
            starts: 0,
        }
    }
}

/// `1 / (2 |Phi|^2)` for the unnormalized assembled state of a normalized
/// target.
pub fn d_probability(target: &[Complex64], d: &[Complex64]) -> f64 {
    let n = target.len() - 1;
    let mut norm = target[0].norm_sqr() + target[n].norm_sqr();
    for (u, di) in target[1..n].iter().zip(d) {
        norm += (u - di).norm_sqr() + di.norm_sqr();
    }
    1.0 / (2.0 * norm)
}

/// Descending probability, then lexicographic `(re, im)` of `d`.
fn sort_solutions(sols: &mut [DSolution]) {
    sols.sort_by(|a, b| {
        b.probability.total_cmp(&a.probability).then_with(|| {
            let key = |s: &DSolution| s.d.iter().flat_map(|z| [z.re, z.im]).collect::<Vec<_>>();
            let (ka, kb) = (key(a), key(b));
            ka.iter()
                .zip(&kb)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
}

/// Normalized full state for interior parameters `d = (d_2..d_n)`; always
/// stored on sites `1..=n+1`.
pub fn assemble_full_state(target: &TargetSuperposition, d: &[Complex64]) -> Result<WalkerState> {
    let u = target.amps();
    let n = u.len() - 1;
    if d.len() + 2 != u.len() {
        return Err(QwError::domain(format!(
            "a {}-site target needs {} interior parameters, got {}",
            u.len(),
            u.len() - 2,
            d.len()
        )));
    }
    let zero = Complex64::new(0.0, 0.0);
    let mut amps = Vec::with_capacity(n + 1);
    amps.push([u[0], zero]);
    for (ui, di) in u[1..n].iter().zip(d) {
        amps.push([ui - di, *di]);
    }
    amps.push([zero, u[n]]);
    let norm = amps.iter().map(|p| p[UP].norm_sqr() + p[DOWN].norm_sqr()).sum::<f64>().sqrt();
    let amps = amps.into_iter().map(|p| [p[0] / norm, p[1] / norm]).collect();
    Ok(WalkerState::from_raw(1, amps))
}

/// All roots found for a target on `n + 1` sites, `2 <= n <= N_MAX_POLY`,
/// sorted by descending probability. Counts are "found", not certified.
pub fn solve_d_system(target: &TargetSuperposition) -> Result<SolveOutcome> {
    solve_d_system_with(target, &DSystemOptions::default())
}

pub fn solve_d_system_with(target: &TargetSuperposition, opts: &DSystemOptions) -> Result<SolveOutcome> {
    let n = target.steps();
    if !(2..=N_MAX_POLY).contains(&n) {
        return Err(QwError::domain(format!(
            "the d system is solved for 2..={N_MAX_POLY} steps, got {n}; use the optimizer"
        )));
    }
    let u = target.amps();
    let (roots, starts) = dsystem::find_roots(u, opts);
    let mut solutions: Vec<DSolution> = roots
        .into_iter()
        .map(|(d, residual_max)| DSolution {
            probability: d_probability(u, &d),
            d,
            residual_max,
            family_t: None,
        })
        .collect();
    sort_solutions(&mut solutions);
    let diagnostic = solutions
        .is_empty()
        .then(|| format!("no root found from {starts} starts; the target may be degenerate"));
    Ok(SolveOutcome {
        solutions,
        diagnostic,
        starts,
    })
}

/// How the initial coin state of an engineered walk is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialCoinPolicy {
    /// A fixed normalized coin state; the first coin absorbs the rest.
    Fixed([Complex64; 2]),
    /// The first back-solved layer itself, which makes the first coin the
    /// identity.
    PreImage,
}

impl Default for InitialCoinPolicy {
    fn default() -> Self {
        Self::Fixed([Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)])
    }
}

#[derive(Debug, Clone, Default)]
pub struct EngineerOptions {
    pub initial_coin: InitialCoinPolicy,
    /// Gauge phases for the back-solver (`C_n..C_2`); empty means zeros.
    pub alphas: Vec<f64>,
    pub d_system: DSystemOptions,
    pub max_solutions: Option<usize>,
}

/// A complete recipe producing a target: interior parameters, full state,
/// coins, initial coin and projection, with forward-verified figures.
#[derive(Debug, Clone)]
pub struct EngineeringSolution {
    /// `d_2..d_n`; empty for solutions that did not come from the `d` system.
    pub d: Vec<Complex64>,
    pub full_state: WalkerState,
    pub coins: Vec<CoinOperator>,
    pub initial_coin: [Complex64; 2],
    /// Coin bra `(a, b)` of the final projection.
    pub projection: [Complex64; 2],
    pub probability: f64,
    pub fidelity: f64,
}

impl EngineeringSolution {
    /// Runs the walk and projects; returns `(probability, fidelity)`.
    pub fn forward_check(&self, target: &TargetSuperposition) -> Result<(f64, f64)> {
        let state = run_walk(self.initial_coin, &self.coins)?;
        let proj = project_coin(&state, self.projection)?;
        Ok((proj.probability, proj.fidelity_to(target)))
    }
}

/// Turns a full reachable state into an [`EngineeringSolution`].
pub fn solution_from_state(
    target: &TargetSuperposition,
    d: Vec<Complex64>,
    state: WalkerState,
    opts: &EngineerOptions,
) -> Result<EngineeringSolution> {
    let initial_coin = match opts.initial_coin {
        InitialCoinPolicy::Fixed(c) => c,
        InitialCoinPolicy::PreImage => if state.site_count() < 3 {
            normalize_pair([state.amp(1, UP), state.amp(2, DOWN)])
        } else {
            let trace = peel_to_first_layer(&state, &opts.alphas, TOL_REACH)?;
            normalize_pair(trace.first_layer)
        }
        .ok_or_else(|| QwError::Numerical {
            message: "first layer vanished".into(),
            residual: 0.0,
        })?,
    };
    let coins = backsolve(&state, initial_coin, &opts.alphas)?;
    let mut sol = EngineeringSolution {
        d,
        full_state: state,
        coins,
        initial_coin,
        projection: plus_bra(),
        probability: 0.0,
        fidelity: 0.0,
    };
    let (p, f) = sol.forward_check(target)?;
    sol.probability = p;
    sol.fidelity = f;
    Ok(sol)
}

/// Fidelity below `1 - ENGINEER_FIDELITY_TOL` rejects a solution.
pub const ENGINEER_FIDELITY_TOL: f64 = 1e-9;

/// Full pipeline: roots of the `d` system (closed form for two steps),
/// assembly, back-solving and forward verification.
pub fn engineer_target(target: &TargetSuperposition, opts: &EngineerOptions) -> Result<(Vec<EngineeringSolution>, Option<String>)> {
    let n = target.steps();
    let outcome = match n {
        1 => SolveOutcome::found(vec![DSolution {
            d: Vec::new(),
            residual_max: 0.0,
            probability: d_probability(target.amps(), &[]),
            family_t: None,
        }]),
        2 => solve_d2(target)?,
        _ => solve_d_system_with(target, &opts.d_system)?,
    };
    let mut out = Vec::new();
    let mut failures = Vec::new();
    for ds in outcome.solutions {
        let state = assemble_full_state(target, &ds.d)?;
        match solution_from_state(target, ds.d.clone(), state, opts) {
            Ok(sol) if sol.fidelity > 1.0 - ENGINEER_FIDELITY_TOL => out.push(sol),
            Ok(sol) => failures.push(format!("fidelity {:.3e} below threshold", 1.0 - sol.fidelity)),
            Err(e) => failures.push(e.to_string()),
        }
        if opts.max_solutions.is_some_and(|k| out.len() >= k) {
            break;
        }
    }
    let mut diagnostic = outcome.diagnostic;
    if !failures.is_empty() {
        let msg = format!("{} root(s) rejected: {}", failures.len(), failures.join("; "));
        diagnostic = Some(match diagnostic {
            Some(d) => format!("{d}; {msg}"),
            None => msg,
        });
    }
    Ok((out, diagnostic))
}
