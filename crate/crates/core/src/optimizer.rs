//! Direct maximization of the output fidelity over coin angles.
//!
//! Each coin contributes its three canonical angles `(theta, xi, zeta)`;
//! optionally the projection bra and the initial coin state contribute two
//! angles each, `(a, b) -> (cos a, e^{i b} sin a)`. A restart runs an
//! adaptive Nelder-Mead simplex phase followed by BFGS on central-difference
//! gradients. Restarts are independent, run in parallel and are aggregated
//! deterministically by fidelity, then probability among fidelity ties,
//! then restart index.

use std::f64::consts::{FRAC_PI_2, TAU};

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rayon::prelude::*;

use crate::coin::CoinParams as GenericCoinParams;
use crate::engineer::EngineeringSolution;
use crate::error::{QwError, Result};
use crate::walk::{plus_bra, project_unchecked, run_walk_raw};
use crate::{rng, CoinOperator, CoinParams, Complex64, TargetSuperposition, WalkerState};

/// Settings of [`optimize_coins`].
#[derive(Debug, Clone)]
pub struct OptimizerOptions {
    /// Iteration budget per restart (simplex plus gradient iterations);
    /// `None` means `2000 n`.
    pub max_iterations: Option<usize>,
    pub restarts: usize,
    pub optimize_projection: bool,
    pub optimize_initial_coin: bool,
    pub seed: u64,
    /// Weight `lambda` of the probability in the objective `F + lambda p`.
    pub prob_weight: f64,
    /// Starting coins for restart 0 instead of a random draw.
    pub initial_guess: Option<Vec<CoinParams>>,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            max_iterations: None,
            restarts: 8,
            optimize_projection: false,
            optimize_initial_coin: false,
            seed: 0,
            prob_weight: 0.0,
            initial_guess: None,
        }
    }
}

/// Best solution over all restarts.
#[derive(Debug, Clone)]
pub struct OptimizeResult {
    pub solution: EngineeringSolution,
    pub params: Vec<CoinParams>,
    pub fidelity: f64,
    pub probability: f64,
    /// Iterations used by the winning restart.
    pub iterations: usize,
    /// Whether the winning restart stopped on a convergence test rather
    /// than on the iteration budget.
    pub converged: bool,
    pub restart: usize,
    /// Best fidelity so far after each iteration of the winning restart.
    pub trace: Vec<f64>,
}

/// Runs the walk and projects; returns `(fidelity, probability)`. A
/// vanishing projection gives `(0, 0)`.
pub fn evaluate(
    params: &[CoinParams],
    initial_coin: [Complex64; 2],
    bra: [Complex64; 2],
    target: &TargetSuperposition,
) -> Result<(f64, f64)> {
    if params.len() + 1 < target.len() {
        return Err(QwError::Domain(format!(
            "{} coins cannot reach a {}-site target",
            params.len(),
            target.len()
        )));
    }
    Ok(eval_raw(params, initial_coin, bra, target))
}

fn eval_raw(params: &[CoinParams], initial_coin: [Complex64; 2], bra: [Complex64; 2], target: &TargetSuperposition) -> (f64, f64) {
    let coins: Vec<CoinOperator> = params.iter().map(CoinOperator::from_coin_params_unchecked).collect();
    let amps = run_walk_raw(initial_coin, &coins);
    let proj = project_unchecked(1, &amps, bra);
    if !(proj.probability > 0.0) {
        return (0.0, 0.0);
    }
    (proj.fidelity_to(target), proj.probability)
}

fn pair_from_angles(a: f64, b: f64) -> [Complex64; 2] {
    [Complex64::new(a.cos(), 0.0), Complex64::from_polar(a.sin(), b)]
}

/// Layout of the parameter vector.
struct Problem<'a> {
    target: &'a TargetSuperposition,
    steps: usize,
    projection: bool,
    initial: bool,
    prob_weight: f64,
}

impl Problem<'_> {
    fn dim(&self) -> usize {
        3 * self.steps + 2 * usize::from(self.projection) + 2 * usize::from(self.initial)
    }

    fn decode(&self, x: &[f64]) -> (Vec<CoinParams>, [Complex64; 2], [Complex64; 2]) {
        let params = x[..3 * self.steps]
            .chunks(3)
            .map(|c| GenericCoinParams::new(c[0], c[1], c[2]))
            .collect();
        let mut k = 3 * self.steps;
        let bra = if self.projection {
            k += 2;
            pair_from_angles(x[k - 2], x[k - 1])
        } else {
            plus_bra()
        };
        let init = if self.initial {
            pair_from_angles(x[k], x[k + 1])
        } else {
            [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]
        };
        (params, init, bra)
    }

    fn fidelity_probability(&self, x: &[f64]) -> (f64, f64) {
        let (params, init, bra) = self.decode(x);
        eval_raw(&params, init, bra, self.target)
    }

    /// Minimized objective `-(F + lambda p)`.
    fn cost(&self, x: &[f64]) -> f64 {
        let (f, p) = self.fidelity_probability(x);
        -(f + self.prob_weight * p)
    }

    fn gradient(&self, x: &DVector<f64>, h: f64) -> DVector<f64> {
        let mut g = DVector::zeros(x.len());
        let mut xp = x.clone();
        for k in 0..x.len() {
            let v = x[k];
            xp[k] = v + h;
            let fp = self.cost(xp.as_slice());
            xp[k] = v - h;
            let fm = self.cost(xp.as_slice());
            xp[k] = v;
            g[k] = (fp - fm) / (2.0 * h);
        }
        g
    }

    fn random_start(&self, rng: &mut rng::Rng) -> DVector<f64> {
        let mut x = Vec::with_capacity(self.dim());
        for _ in 0..self.steps {
            x.push(rng.random::<f64>() * FRAC_PI_2);
            x.push(rng.random::<f64>() * TAU);
            x.push(rng.random::<f64>() * TAU);
        }
        for _ in 0..usize::from(self.projection) + usize::from(self.initial) {
            x.push(rng.random::<f64>() * FRAC_PI_2);
            x.push(rng.random::<f64>() * TAU);
        }
        DVector::from_vec(x)
    }
}

/// Outcome of one restart.
struct Run {
    x: DVector<f64>,
    cost: f64,
    iterations: usize,
    converged: bool,
    trace: Vec<f64>,
}

/// Records the best cost after every iteration as a best-so-far fidelity.
struct Tracker {
    best: f64,
    trace: Vec<f64>,
}

impl Tracker {
    fn push(&mut self, problem: &Problem, cost: f64, x: &[f64]) {
        if cost < self.best {
            self.best = cost;
        }
        let f = if problem.prob_weight == 0.0 {
            -self.best
        } else {
            problem.fidelity_probability(x).0
        };
        let last = self.trace.last().copied().unwrap_or(f64::NEG_INFINITY);
        self.trace.push(f.max(last));
    }
}

/// Adaptive Nelder-Mead (dimension-dependent coefficients). Returns the
/// best vertex, its cost and the iterations used.
fn nelder_mead(problem: &Problem, x0: &DVector<f64>, budget: usize, tracker: &mut Tracker) -> (DVector<f64>, f64, usize) {
    let dim = x0.len();
    let d = dim as f64;
    let (alpha, beta, gamma, delta) = (1.0, 1.0 + 2.0 / d, 0.75 - 1.0 / (2.0 * d), 1.0 - 1.0 / d);
    let mut simplex: Vec<(DVector<f64>, f64)> = Vec::with_capacity(dim + 1);
    simplex.push((x0.clone(), problem.cost(x0.as_slice())));
    for k in 0..dim {
        let mut v = x0.clone();
        v[k] += 0.3;
        let c = problem.cost(v.as_slice());
        simplex.push((v, c));
    }
    let mut iterations = 0;
    while iterations < budget {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = simplex[dim].1 - simplex[0].1;
        if spread.abs() < 1e-13 {
            break;
        }
        iterations += 1;
        let centroid = simplex[..dim].iter().fold(DVector::zeros(dim), |acc, (v, _)| acc + v) / d;
        let worst = simplex[dim].clone();
        let xr = &centroid + (&centroid - &worst.0) * alpha;
        let fr = problem.cost(xr.as_slice());
        if fr < simplex[0].1 {
            let xe = &centroid + (&xr - &centroid) * beta;
            let fe = problem.cost(xe.as_slice());
            simplex[dim] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[dim - 1].1 {
            simplex[dim] = (xr, fr);
        } else {
            let (xc, fc) = if fr < worst.1 {
                let xc = &centroid + (&xr - &centroid) * gamma;
                let fc = problem.cost(xc.as_slice());
                (xc, fc)
            } else {
                let xc = &centroid - (&centroid - &worst.0) * gamma;
                let fc = problem.cost(xc.as_slice());
                (xc, fc)
            };
            if fc < fr.min(worst.1) {
                simplex[dim] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for vertex in simplex.iter_mut().skip(1) {
                    let v = &best + (&vertex.0 - &best) * delta;
                    let c = problem.cost(v.as_slice());
                    *vertex = (v, c);
                }
            }
        }
        let best = simplex.iter().min_by(|a, b| a.1.total_cmp(&b.1)).expect("non-empty simplex");
        tracker.push(problem, best.1, best.0.as_slice());
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, c) = simplex.swap_remove(0);
    (x, c, iterations)
}

/// BFGS with Armijo backtracking on central-difference gradients. Returns
/// the final point, its cost, the iterations used and whether a
/// convergence test fired.
fn bfgs(problem: &Problem, x0: DVector<f64>, f0: f64, budget: usize, tracker: &mut Tracker) -> (DVector<f64>, f64, usize, bool) {
    const H: f64 = 1e-6;
    let dim = x0.len();
    let mut x = x0;
    let mut f = f0;
    let mut g = problem.gradient(&x, H);
    let mut hinv = DMatrix::<f64>::identity(dim, dim);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < budget {
        let perfect = problem.prob_weight == 0.0 && f <= -1.0 + 1e-14;
        if g.amax() < 1e-9 || perfect {
            converged = true;
            break;
        }
        iterations += 1;
        let mut dir = -(&hinv * &g);
        let mut slope = g.dot(&dir);
        if !(slope < 0.0) {
            hinv = DMatrix::identity(dim, dim);
            dir = -g.clone();
            slope = -g.norm_squared();
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let xn = &x + &dir * t;
            let fnew = problem.cost(xn.as_slice());
            if fnew <= f + 1e-4 * t * slope {
                accepted = Some((xn, fnew));
                break;
            }
            t *= 0.5;
        }
        let Some((xn, fnew)) = accepted else {
            if hinv != DMatrix::identity(dim, dim) {
                hinv = DMatrix::identity(dim, dim);
                tracker.push(problem, f, x.as_slice());
                continue;
            }
            converged = true;
            tracker.push(problem, f, x.as_slice());
            break;
        };
        let gn = problem.gradient(&xn, H);
        let s = &xn - &x;
        let y = &gn - &g;
        let sy = s.dot(&y);
        if sy > 1e-14 * s.norm() * y.norm() {
            let rho = 1.0 / sy;
            let hy = &hinv * &y;
            let yhy = y.dot(&hy);
            hinv += (&s * s.transpose()) * (rho * rho * yhy + rho) - (&hy * s.transpose() + &s * hy.transpose()) * rho;
        }
        let improvement = f - fnew;
        (x, f, g) = (xn, fnew, gn);
        tracker.push(problem, f, x.as_slice());
        if improvement.abs() < 1e-15 {
            converged = true;
            break;
        }
    }
    (x, f, iterations, converged)
}

fn run_restart(problem: &Problem, x0: DVector<f64>, budget: usize) -> Run {
    let mut tracker = Tracker {
        best: f64::INFINITY,
        trace: Vec::new(),
    };
    let nm_budget = budget / 4;
    let (x, f, nm_iters) = nelder_mead(problem, &x0, nm_budget, &mut tracker);
    let (x, f, bfgs_iters, converged) = bfgs(problem, x, f, budget - nm_iters, &mut tracker);
    Run {
        x,
        cost: f,
        iterations: nm_iters + bfgs_iters,
        converged,
        trace: tracker.trace,
    }
}

/// Restarts whose fidelities tie within this are ranked by probability.
pub const FIDELITY_TIE_TOL: f64 = 1e-9;

/// Best restart: highest objective; among restarts within
/// [`FIDELITY_TIE_TOL`] of it the higher projection probability wins, then
/// the lower restart index.
fn pick_best(problem: &Problem, runs: Vec<Run>) -> (usize, Run) {
    let best_cost = runs.iter().map(|r| r.cost).fold(f64::INFINITY, f64::min);
    let (restart, _) = runs
        .iter()
        .enumerate()
        .filter(|(_, r)| r.cost <= best_cost + FIDELITY_TIE_TOL)
        .map(|(i, r)| (i, problem.fidelity_probability(r.x.as_slice()).1))
        .fold(None, |acc: Option<(usize, f64)>, (i, p)| match acc {
            Some((_, bp)) if bp >= p => acc,
            _ => Some((i, p)),
        })
        .expect("at least one restart");
    let run = runs.into_iter().nth(restart).expect("index in range");
    (restart, run)
}

/// Maximizes the fidelity to `target` with `steps` coins. Always returns
/// the best point found; deterministic for a fixed seed.
pub fn optimize_coins(target: &TargetSuperposition, steps: usize, opts: &OptimizerOptions) -> Result<OptimizeResult> {
    if steps + 1 < target.len() {
        return Err(QwError::Domain(format!(
            "{steps} steps cannot reach a {}-site target",
            target.len()
        )));
    }
    if opts.restarts == 0 || opts.max_iterations == Some(0) {
        return Err(QwError::domain("restarts and max_iterations must be at least 1"));
    }
    if let Some(guess) = &opts.initial_guess {
        if guess.len() != steps {
            return Err(QwError::Domain(format!(
                "initial guess has {} coins, expected {steps}",
                guess.len()
            )));
        }
    }
    let problem = Problem {
        target,
        steps,
        projection: opts.optimize_projection,
        initial: opts.optimize_initial_coin,
        prob_weight: opts.prob_weight,
    };
    let budget = opts.max_iterations.unwrap_or(2000 * steps.max(1));
    let runs: Vec<Run> = (0..opts.restarts)
        .into_par_iter()
        .map(|r| {
            let mut g = rng::stream(opts.seed, r as u64);
            let mut x0 = problem.random_start(&mut g);
            if let (0, Some(guess)) = (r, &opts.initial_guess) {
                for (k, p) in guess.iter().enumerate() {
                    x0[3 * k] = p.theta;
                    x0[3 * k + 1] = p.xi;
                    x0[3 * k + 2] = p.zeta;
                }
                let mut k = 3 * steps;
                if problem.projection {
                    x0[k] = std::f64::consts::FRAC_PI_4;
                    x0[k + 1] = 0.0;
                    k += 2;
                }
                if problem.initial {
                    x0[k] = 0.0;
                    x0[k + 1] = 0.0;
                }
            }
            run_restart(&problem, x0, budget)
        })
        .collect();
    let (restart, best) = pick_best(&problem, runs);
    let (params, initial_coin, projection) = problem.decode(best.x.as_slice());
    let params: Vec<CoinParams> = params.into_iter().map(canonical_params).collect();
    let coins: Vec<CoinOperator> = params.iter().map(CoinOperator::from_coin_params_unchecked).collect();
    let full_state = WalkerState::new(1, run_walk_raw(initial_coin, &coins));
    let (fidelity, probability) = eval_raw(&params, initial_coin, projection, target);
    Ok(OptimizeResult {
        solution: EngineeringSolution {
            d: Vec::new(),
            full_state,
            coins,
            initial_coin,
            projection,
            probability,
            fidelity,
        },
        params,
        fidelity,
        probability,
        iterations: best.iterations,
        converged: best.converged,
        restart,
        trace: best.trace,
    })
}

/// Maps arbitrary optimizer angles to the canonical range; the global
/// phase keeps the matrix unchanged.
fn canonical_params(p: CoinParams) -> CoinParams {
    CoinOperator::from_coin_params_unchecked(&p).params()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engineer::{engineer_target, EngineerOptions};
    use crate::state::balanced_target;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn up() -> [Complex64; 2] {
        [c(1.0, 0.0), c(0.0, 0.0)]
    }

    #[test]
    fn engineered_coins_evaluate_to_unit_fidelity() {
        let t = balanced_target(4).unwrap();
        let (sols, _) = engineer_target(&t, &EngineerOptions::default()).unwrap();
        for s in &sols {
            let params: Vec<CoinParams> = s.coins.iter().map(|k| k.params()).collect();
            let (f, p) = evaluate(&params, s.initial_coin, s.projection, &t).unwrap();
            assert!((f - 1.0).abs() < 1e-9);
            assert!((p - s.probability).abs() < 1e-9);
        }
    }

    #[test]
    fn identity_coins_miss_a_spread_target() {
        let t = balanced_target(3).unwrap();
        let params = vec![CoinParams::new(0.0, 0.0, 0.0); 2];
        let (f, p) = evaluate(&params, up(), plus_bra(), &t).unwrap();
        assert!(f < 1.0);
        assert!((p - 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_projection_gives_zero() {
        let t = balanced_target(2).unwrap();
        let params = vec![CoinParams::new(0.0, 0.0, 0.0)];
        let bra = [c(0.0, 0.0), c(1.0, 0.0)];
        assert_eq!(evaluate(&params, up(), bra, &t).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn too_few_coins_is_rejected() {
        let t = balanced_target(4).unwrap();
        assert!(evaluate(&[CoinParams::new(0.1, 0.0, 0.0)], up(), plus_bra(), &t).is_err());
        assert!(optimize_coins(&t, 2, &OptimizerOptions::default()).is_err());
    }

    #[test]
    fn two_step_target_is_solved() {
        let t = TargetSuperposition::new(vec![c(0.3, 0.2), c(-0.5, 0.4), c(0.1, -0.6)]).unwrap();
        let r = optimize_coins(&t, 2, &OptimizerOptions::default()).unwrap();
        assert!(r.fidelity > 1.0 - 1e-6, "F = {}", r.fidelity);
        let (p, f) = r.solution.forward_check(&t).unwrap();
        assert!((f - r.fidelity).abs() < 1e-12 && (p - r.probability).abs() < 1e-12);
    }

    #[test]
    fn trace_is_monotone_and_seeded_runs_repeat() {
        let t = balanced_target(4).unwrap();
        let opts = OptimizerOptions {
            restarts: 3,
            max_iterations: Some(600),
            seed: 7,
            optimize_projection: true,
            ..Default::default()
        };
        let a = optimize_coins(&t, 3, &opts).unwrap();
        let b = optimize_coins(&t, 3, &opts).unwrap();
        assert!(a.trace.windows(2).all(|w| w[1] >= w[0]));
        let bits = |r: &OptimizeResult| {
            r.params
                .iter()
                .flat_map(|p| [p.theta.to_bits(), p.xi.to_bits(), p.zeta.to_bits()])
                .collect::<Vec<_>>()
        };
        assert_eq!(bits(&a), bits(&b));
        assert!(a.iterations <= 600);
    }
}
