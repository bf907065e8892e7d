//! Haar sampling, projection-probability histograms and coin-parameter
//! stability sweeps.
//!
//! Every random draw comes from [`rng::stream`]`(seed, index)`, so a sample
//! depends only on the master seed and its index, never on thread
//! scheduling.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engineer::{solve_d2, solve_d_system_with, DSystemOptions, EngineeringSolution, N_MAX_POLY};
use crate::error::{QwError, Result};
use crate::optimizer::{optimize_coins, OptimizerOptions};
use crate::walk::{project_unchecked, run_walk_raw};
use crate::{rng, CoinOperator, CoinParams, TargetSuperposition};

/// Haar-random normalized vector of dimension `dim`: the sample at
/// `index` of the stream of `seed`.
pub fn haar_sample(dim: usize, seed: u64, index: u64) -> Result<TargetSuperposition> {
    if dim < 2 {
        return Err(QwError::Domain(format!("Haar targets need dim >= 2, got {dim}")));
    }
    let mut g = rng::stream(seed, index);
    TargetSuperposition::new((0..dim).map(|_| rng::complex_normal(&mut g)).collect())
}

/// First Haar sample of the stream of `seed`.
pub fn haar_random_target(dim: usize, seed: u64) -> Result<TargetSuperposition> {
    haar_sample(dim, seed, 0)
}

/// How each sampled target is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HistogramMode {
    /// All roots of the `d` system; records the extreme probabilities.
    DSystem,
    /// Direct fidelity optimization; records `(p, F)`.
    Optimizer,
}

/// Fidelity thresholds `t` of the optimizer mode: a sample is retained
/// at level `t` when `F >= 1 - 10^-t` (`t = 0` keeps everything).
pub const FIDELITY_LEVELS: [u32; 5] = [0, 2, 5, 10, 12];

/// Counts over `bins` equal-width bins of `[lo, hi]`; values equal to `hi`
/// fall in the last bin, values outside the range are dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn new(lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if bins == 0 || !(hi > lo) {
            return Err(QwError::Domain(format!("bad histogram range [{lo}, {hi}] with {bins} bins")));
        }
        Ok(Self {
            lo,
            hi,
            counts: vec![0; bins],
        })
    }

    pub fn bin_of(&self, x: f64) -> Option<usize> {
        if !(x >= self.lo && x <= self.hi) {
            return None;
        }
        let k = ((x - self.lo) / (self.hi - self.lo) * self.counts.len() as f64) as usize;
        Some(k.min(self.counts.len() - 1))
    }

    pub fn add(&mut self, x: f64) {
        if let Some(k) = self.bin_of(x) {
            self.counts[k] += 1;
        }
    }

    /// `bins + 1` edges.
    pub fn edges(&self) -> Vec<f64> {
        let n = self.counts.len();
        (0..=n).map(|k| self.lo + (self.hi - self.lo) * k as f64 / n as f64).collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// One sampled target. Unused fields are `None` for the other mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub index: u64,
    pub solutions: usize,
    pub min_p: Option<f64>,
    pub max_p: Option<f64>,
    pub p: Option<f64>,
    pub fidelity: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct HistogramOptions {
    pub steps: usize,
    pub samples: usize,
    pub mode: HistogramMode,
    pub bins: usize,
    pub range: (f64, f64),
    pub seed: u64,
    /// Additional targets recorded after the Haar samples (indices continue
    /// from `samples`).
    pub extra_targets: Vec<TargetSuperposition>,
    pub d_system: DSystemOptions,
    pub optimizer: OptimizerOptions,
}

impl HistogramOptions {
    pub fn new(steps: usize, samples: usize, mode: HistogramMode) -> Self {
        Self {
            steps,
            samples,
            mode,
            bins: 50,
            range: (0.0, 1.0),
            seed: 0,
            extra_targets: Vec::new(),
            d_system: DSystemOptions::default(),
            optimizer: OptimizerOptions::default(),
        }
    }
}

/// Raw records plus binned counts. In d-system mode `min_p` / `max_p` hold
/// the extreme probabilities per sample; in optimizer mode `by_level[k]`
/// bins the probabilities of samples retained at [`FIDELITY_LEVELS`]`[k]`.
#[derive(Debug, Clone)]
pub struct HistogramTable {
    pub mode: HistogramMode,
    pub steps: usize,
    pub records: Vec<SampleRecord>,
    pub min_p: Option<Histogram>,
    pub max_p: Option<Histogram>,
    pub by_level: Vec<(u32, Histogram)>,
}

impl HistogramTable {
    /// Fraction of samples retained at fidelity level `t`.
    pub fn retained_fraction(&self, t: u32) -> f64 {
        let kept = self
            .records
            .iter()
            .filter(|r| r.fidelity.is_some_and(|f| f >= 1.0 - 10f64.powi(-(t as i32))))
            .count();
        kept as f64 / self.records.len().max(1) as f64
    }

    /// Raw per-sample CSV.
    pub fn write_records_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.records {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Binned CSV: one row per bin with its edges and one count column per
    /// histogram.
    pub fn write_bins_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut columns: Vec<(String, &Histogram)> = Vec::new();
        if let Some(h) = &self.min_p {
            columns.push(("min_p".into(), h));
        }
        if let Some(h) = &self.max_p {
            columns.push(("max_p".into(), h));
        }
        for (t, h) in &self.by_level {
            columns.push((format!("p_t{t}"), h));
        }
        let Some((_, first)) = columns.first() else {
            return Ok(());
        };
        let edges = first.edges();
        let mut header = vec!["bin_lo".to_string(), "bin_hi".to_string()];
        header.extend(columns.iter().map(|(name, _)| name.clone()));
        w.write_record(&header)?;
        for k in 0..first.counts.len() {
            let mut row = vec![format!("{:.6}", edges[k]), format!("{:.6}", edges[k + 1])];
            row.extend(columns.iter().map(|(_, h)| h.counts[k].to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn record_d_system(index: u64, target: &TargetSuperposition, opts: &HistogramOptions) -> Result<SampleRecord> {
    let outcome = if opts.steps == 2 {
        solve_d2(target)?
    } else {
        let d_opts = DSystemOptions {
            seed: opts.d_system.seed ^ index,
            ..opts.d_system.clone()
        };
        solve_d_system_with(target, &d_opts)?
    };
    let ps: Vec<f64> = outcome.solutions.iter().map(|s| s.probability).collect();
    Ok(SampleRecord {
        index,
        solutions: ps.len(),
        min_p: ps.iter().copied().reduce(f64::min),
        max_p: ps.iter().copied().reduce(f64::max),
        p: None,
        fidelity: None,
    })
}

fn record_optimizer(index: u64, target: &TargetSuperposition, opts: &HistogramOptions) -> Result<SampleRecord> {
    let o = OptimizerOptions {
        seed: opts.optimizer.seed ^ index,
        ..opts.optimizer.clone()
    };
    let r = optimize_coins(target, opts.steps, &o)?;
    Ok(SampleRecord {
        index,
        solutions: 1,
        min_p: None,
        max_p: None,
        p: Some(r.probability),
        fidelity: Some(r.fidelity),
    })
}

/// Samples `samples` Haar targets on `steps + 1` sites (plus any extra
/// targets), solves each and bins the projection probabilities.
pub fn probability_histogram(opts: &HistogramOptions) -> Result<HistogramTable> {
    if opts.steps < 1 {
        return Err(QwError::domain("histograms need at least one step"));
    }
    if opts.mode == HistogramMode::DSystem && !(2..=N_MAX_POLY).contains(&opts.steps) {
        return Err(QwError::Domain(format!(
            "d-system histograms need 2..={N_MAX_POLY} steps, got {}",
            opts.steps
        )));
    }
    if let Some(t) = opts.extra_targets.iter().find(|t| t.len() != opts.steps + 1) {
        return Err(QwError::Domain(format!(
            "extra target has {} sites, expected {}",
            t.len(),
            opts.steps + 1
        )));
    }
    let total = opts.samples + opts.extra_targets.len();
    let records: Vec<SampleRecord> = (0..total as u64)
        .into_par_iter()
        .map(|i| {
            let target = match opts.extra_targets.get((i as usize).wrapping_sub(opts.samples)) {
                Some(t) if i as usize >= opts.samples => t.clone(),
                _ => haar_sample(opts.steps + 1, opts.seed, i)?,
            };
            match opts.mode {
                HistogramMode::DSystem => record_d_system(i, &target, opts),
                HistogramMode::Optimizer => record_optimizer(i, &target, opts),
            }
        })
        .collect::<Result<_>>()?;
    let (lo, hi) = opts.range;
    let mut table = HistogramTable {
        mode: opts.mode,
        steps: opts.steps,
        records,
        min_p: None,
        max_p: None,
        by_level: Vec::new(),
    };
    match opts.mode {
        HistogramMode::DSystem => {
            let mut hmin = Histogram::new(lo, hi, opts.bins)?;
            let mut hmax = Histogram::new(lo, hi, opts.bins)?;
            for r in &table.records {
                if let (Some(a), Some(b)) = (r.min_p, r.max_p) {
                    hmin.add(a);
                    hmax.add(b);
                }
            }
            table.min_p = Some(hmin);
            table.max_p = Some(hmax);
        }
        HistogramMode::Optimizer => {
            for t in FIDELITY_LEVELS {
                let mut h = Histogram::new(lo, hi, opts.bins)?;
                let floor = 1.0 - 10f64.powi(-(t as i32));
                for r in &table.records {
                    if let (Some(p), Some(f)) = (r.p, r.fidelity) {
                        if f >= floor {
                            h.add(p);
                        }
                    }
                }
                table.by_level.push((t, h));
            }
        }
    }
    Ok(table)
}

/// A coin angle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Angle {
    Theta,
    Xi,
    Zeta,
}

impl Angle {
    pub const ALL: [Angle; 3] = [Angle::Theta, Angle::Xi, Angle::Zeta];

    pub fn index(self) -> usize {
        match self {
            Angle::Theta => 0,
            Angle::Xi => 1,
            Angle::Zeta => 2,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "theta" | "0" => Ok(Angle::Theta),
            "xi" | "1" => Ok(Angle::Xi),
            "zeta" | "2" => Ok(Angle::Zeta),
            _ => Err(QwError::Domain(format!("unknown coin angle {s:?}; use theta, xi or zeta"))),
        }
    }
}

/// Which parameters a sweep perturbs, one at a time. Steps are 1-based
/// (`C_1` acts first).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamSelector {
    One { step: usize, angle: Angle },
    All,
}

/// How `eps` changes the selected angle `x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PerturbMode {
    /// `x + eps`.
    Absolute,
    /// `x (1 + eps)`.
    Relative,
    /// `eps x`; `eps = 1` is the unperturbed point.
    Scale,
}

impl PerturbMode {
    pub fn apply(self, x: f64, eps: f64) -> f64 {
        match self {
            PerturbMode::Absolute => x + eps,
            PerturbMode::Relative => x * (1.0 + eps),
            PerturbMode::Scale => x * eps,
        }
    }

    /// The `eps` that leaves the parameter unchanged.
    pub fn identity(self) -> f64 {
        match self {
            PerturbMode::Absolute | PerturbMode::Relative => 0.0,
            PerturbMode::Scale => 1.0,
        }
    }
}

/// `eps` from -0.3 to 0.3 rad in 61 points.
pub fn default_eps_grid() -> Vec<f64> {
    linspace(-0.3, 0.3, 61)
}

/// `k` equally spaced points from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, k: usize) -> Vec<f64> {
    match k {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..k).map(|i| a + (b - a) * i as f64 / (k - 1) as f64).collect(),
    }
}

/// One point of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub step: usize,
    pub angle: Angle,
    pub eps: f64,
    pub fidelity: f64,
    pub probability: f64,
}

/// Fidelity and probability with one coin angle replaced.
fn perturbed(
    solution: &EngineeringSolution,
    params: &[CoinParams],
    target: &TargetSuperposition,
    step: usize,
    angle: Angle,
    value: f64,
) -> (f64, f64) {
    let coins: Vec<CoinOperator> = params
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let mut q = *p;
            if k + 1 == step {
                *q.angle_mut(angle.index()) = value;
            }
            CoinOperator::from_coin_params_unchecked(&q)
        })
        .collect();
    let amps = run_walk_raw(solution.initial_coin, &coins);
    let proj = project_unchecked(1, &amps, solution.projection);
    (proj.fidelity_to(target), proj.probability)
}

/// Re-runs the walk of `solution` with each selected angle perturbed by
/// each `eps`, returning `F(eps)` and `p(eps)` against `target`.
pub fn perturb_sweep(
    solution: &EngineeringSolution,
    target: &TargetSuperposition,
    selector: ParamSelector,
    eps_grid: &[f64],
    mode: PerturbMode,
) -> Result<Vec<SweepPoint>> {
    let n = solution.coins.len();
    let selected: Vec<(usize, Angle)> = match selector {
        ParamSelector::One { step, angle } => {
            if !(1..=n).contains(&step) {
                return Err(QwError::Domain(format!("step {step} out of range 1..={n}")));
            }
            vec![(step, angle)]
        }
        ParamSelector::All => (1..=n).flat_map(|s| Angle::ALL.map(|a| (s, a))).collect(),
    };
    let params: Vec<CoinParams> = solution.coins.iter().map(|c| c.params()).collect();
    let mut out = Vec::with_capacity(selected.len() * eps_grid.len());
    for (step, angle) in selected {
        let x = params[step - 1].angle(angle.index());
        for &eps in eps_grid {
            let (fidelity, probability) = if eps == mode.identity() {
                let (p, f) = solution.forward_check(target)?;
                (f, p)
            } else {
                perturbed(solution, &params, target, step, angle, mode.apply(x, eps))
            };
            out.push(SweepPoint {
                step,
                angle,
                eps,
                fidelity,
                probability,
            });
        }
    }
    Ok(out)
}

/// Largest and mean fidelity loss `F(0) - F(+-eps)` over every coin angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FidelityDrop {
    pub max: f64,
    pub mean: f64,
}

/// Loss at distance `eps` from the unperturbed point, both signs.
pub fn fidelity_drop(solution: &EngineeringSolution, target: &TargetSuperposition, eps: f64, mode: PerturbMode) -> Result<FidelityDrop> {
    let base = solution.forward_check(target)?.1;
    let grid = [mode.identity() - eps, mode.identity() + eps];
    let pts = perturb_sweep(solution, target, ParamSelector::All, &grid, mode)?;
    let drops: Vec<f64> = pts.iter().map(|p| base - p.fidelity).collect();
    Ok(FidelityDrop {
        max: drops.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        mean: drops.iter().sum::<f64>() / drops.len().max(1) as f64,
    })
}

/// Sweep table as CSV.
pub fn write_sweep_csv<W: Write>(points: &[SweepPoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for p in points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}
