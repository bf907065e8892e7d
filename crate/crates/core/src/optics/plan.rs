//! Lowering an engineered walk to an optical train and simulating it in
//! the OAM basis.
//!
//! Each unit is QWP-HWP-QWP followed by a `q = 1/2` plate. The plate flips
//! the polarization while it shifts `L` by `+1` and `R` by `-1`, so the
//! wave plates of unit `t` realize `sigma_x C_t`: the coin output `up`
//! enters the plate as `R`, moves to `m - 1` and leaves as `L`, while `down`
//! enters as `L`, moves to `m + 1` and leaves as `R`. The coin basis
//! `up = L` is therefore restored after every unit and site `i` after `t`
//! units sits at `m = 2(i - 1) - t`.

use std::collections::BTreeMap;

use nalgebra::Vector2;
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::conventions::{oam_to_site, site_to_oam, ANGLE_PERIOD, ANGLE_RESOLUTION, UNIT_Q};
use super::jones::{qplate_action, unitary_to_waveplates, waveplate_matrix, JonesElement, Polarization};
use crate::engineer::EngineeringSolution;
use crate::error::{QwError, Result};
use crate::mat2::Mat2;
use crate::scalar::{cis, wrap_angle};
use crate::walk::project_coin;
use crate::Complex64;

/// One step of the optical walk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpticalUnit {
    pub qwp1: f64,
    pub hwp: f64,
    pub qwp2: f64,
    /// Topological charge of the q-plate.
    pub q: f64,
    /// The wave plates realize `e^{i global_phase} sigma_x C`.
    pub global_phase: f64,
}

impl OpticalUnit {
    pub fn elements(&self) -> [JonesElement; 3] {
        [
            JonesElement::qwp(self.qwp1),
            JonesElement::hwp(self.hwp),
            JonesElement::qwp(self.qwp2),
        ]
    }

    fn jones(&self) -> Mat2<f64> {
        let [a, b, c] = self.elements();
        c.matrix() * b.matrix() * a.matrix()
    }
}

/// Measurement: optional QWP, then an HWP, then a PBS transmitting `H`.
/// The transmitted amplitude is `e^{i global_phase} <bra|psi>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionStage {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub qwp: Option<f64>,
    pub hwp: f64,
    /// Measured coin bra `(a, b)` in the `up = L` basis.
    pub bra: [Complex64; 2],
    pub global_phase: f64,
}

impl ProjectionStage {
    fn jones(&self) -> Mat2<f64> {
        let h: Mat2<f64> = JonesElement::hwp(self.hwp).matrix();
        match self.qwp {
            Some(q) => h * JonesElement::qwp(q).matrix(),
            None => h,
        }
    }
}

/// Element counts of a plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElementCounts {
    pub wave_plates: usize,
    pub q_plates: usize,
    pub projection_plates: usize,
}

/// Complete optical recipe for an engineered state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    /// Input polarization `(L, R)` of the photon, injected at `m = 0`.
    pub input_polarization: [Complex64; 2],
    pub units: Vec<OpticalUnit>,
    pub projection: ProjectionStage,
    /// Output site `i` is read at OAM `m = 2(i - 1) - n`.
    pub site_to_oam: String,
    pub counts: ElementCounts,
}

impl ExperimentPlan {
    /// Sum of the unit phases: the simulated pre-measurement state equals
    /// `e^{i total_phase}` times the walk state.
    pub fn total_unit_phase(&self) -> f64 {
        self.units.iter().map(|u| u.global_phase).sum()
    }

    /// Copy with every angle reduced modulo `pi` and rounded to
    /// [`ANGLE_RESOLUTION`], as written to plan files.
    pub fn rounded(&self) -> Self {
        let r = |x: f64| {
            let y = (wrap_angle(x, ANGLE_PERIOD) / ANGLE_RESOLUTION).round() * ANGLE_RESOLUTION;
            if y >= ANGLE_PERIOD - ANGLE_RESOLUTION / 2.0 {
                0.0
            } else {
                y
            }
        };
        let mut out = self.clone();
        for u in &mut out.units {
            u.qwp1 = r(u.qwp1);
            u.hwp = r(u.hwp);
            u.qwp2 = r(u.qwp2);
        }
        out.projection.hwp = r(out.projection.hwp);
        out.projection.qwp = out.projection.qwp.map(r);
        out
    }
}

fn sigma_x() -> Mat2<f64> {
    let (z, o) = (Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0));
    Mat2::new(z, o, o, z)
}

/// `|H>` and `|V>` in the circular basis.
fn h_ket() -> [Complex64; 2] {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    [Complex64::new(h, 0.0), Complex64::new(h, 0.0)]
}

fn v_ket() -> [Complex64; 2] {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    [Complex64::new(0.0, -h), Complex64::new(0.0, h)]
}

fn dot(a: &[Complex64; 2], b: &[Complex64; 2]) -> Complex64 {
    a[0].conj() * b[0] + a[1].conj() * b[1]
}

/// `<V| J |bra>` for the projection optics, as a real 2-vector.
fn leak(j: &Mat2<f64>, bra: &[Complex64; 2]) -> Vector2<f64> {
    let z = dot(&v_ket(), &j.apply(*bra));
    Vector2::new(z.re, z.im)
}

/// Plates sending the polarization `bra` to `H`, so that the PBS measures
/// `<bra|`. Linear polarizations need only the HWP.
fn projection_stage(bra: [Complex64; 2]) -> Result<ProjectionStage> {
    let hwp_only = |h: f64| waveplate_matrix(std::f64::consts::PI, h);
    let finish = |qwp: Option<f64>, hwp: f64| -> ProjectionStage {
        let mut stage = ProjectionStage {
            qwp: qwp.map(|q| wrap_angle(q, ANGLE_PERIOD)),
            hwp: wrap_angle(hwp, ANGLE_PERIOD),
            bra,
            global_phase: 0.0,
        };
        // transmitted amplitude <H|J|psi> = e^{i chi} <bra|psi> with
        // J^dagger |H> = e^{-i chi} |bra>
        let back = stage.jones().adjoint().apply(h_ket());
        stage.global_phase = -dot(&bra, &back).arg();
        stage
    };
    // linear case: |<L|bra>| = |<R|bra>|; HWP at h maps to H iff the
    // relative phase matches, solved in closed form
    if (bra[0].norm() - bra[1].norm()).abs() < 1e-12 {
        let rel = (bra[1] / bra[0]).arg();
        let h = rel / 4.0;
        for cand in [h, h + std::f64::consts::FRAC_PI_2] {
            if leak(&hwp_only(cand), &bra).norm() < 1e-12 {
                return Ok(finish(None, cand));
            }
        }
    }
    // elliptical: Newton on <V| J(h) J(q) |bra> = 0 from a coarse grid
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for a in 0..16 {
        for b in 0..16 {
            let (q, h) = (a as f64 * ANGLE_PERIOD / 16.0, b as f64 * ANGLE_PERIOD / 16.0);
            let j = hwp_only(h) * waveplate_matrix(std::f64::consts::FRAC_PI_2, q);
            let r = leak(&j, &bra).norm();
            if r < best.0 {
                best = (r, q, h);
            }
        }
    }
    let (_, mut q, mut h) = best;
    let f = |q: f64, h: f64| leak(&(hwp_only(h) * waveplate_matrix(std::f64::consts::FRAC_PI_2, q)), &bra);
    for _ in 0..100 {
        let r = f(q, h);
        if r.norm() < 1e-15 {
            break;
        }
        let e = 1e-7;
        let jq = (f(q + e, h) - f(q - e, h)) / (2.0 * e);
        let jh = (f(q, h + e) - f(q, h - e)) / (2.0 * e);
        let jac = nalgebra::Matrix2::from_columns(&[jq, jh]);
        let Some(step) = jac.lu().solve(&r) else { break };
        q -= step[0];
        h -= step[1];
    }
    let residual = f(q, h).norm();
    if !(residual < 1e-10) {
        return Err(QwError::Numerical {
            message: "projection optics did not converge".into(),
            residual,
        });
    }
    Ok(finish(Some(q), h))
}

/// Compiles a solution into one unit per coin plus the projection stage.
pub fn compile_experiment(solution: &EngineeringSolution) -> Result<ExperimentPlan> {
    let units = solution
        .coins
        .iter()
        .map(|coin| {
            let w = unitary_to_waveplates(&(sigma_x() * *coin.matrix()))?;
            Ok(OpticalUnit {
                qwp1: w.qwp1,
                hwp: w.hwp,
                qwp2: w.qwp2,
                q: UNIT_Q,
                global_phase: w.global_phase,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let projection = projection_stage(solution.projection)?;
    let n = units.len();
    Ok(ExperimentPlan {
        input_polarization: solution.initial_coin,
        counts: ElementCounts {
            wave_plates: 3 * n,
            q_plates: n,
            projection_plates: 1 + usize::from(projection.qwp.is_some()),
        },
        units,
        projection,
        site_to_oam: format!("m = 2(i - 1) - {n}"),
    })
}

/// Photon state over OAM values: `m -> (L, R)` amplitudes.
pub type OamState = BTreeMap<i64, [Complex64; 2]>;

/// Result of propagating a photon through a plan.
#[derive(Debug, Clone)]
pub struct PlanSimulation {
    /// State before the projection stage.
    pub state: OamState,
    /// Amplitude transmitted by the PBS at each `m`.
    pub transmitted: BTreeMap<i64, Complex64>,
    pub probability: f64,
}

/// Propagates the input photon through the plan, plate by plate, using
/// [`qplate_action`] for the shifts.
pub fn simulate_plan(plan: &ExperimentPlan) -> Result<PlanSimulation> {
    let mut state: OamState = BTreeMap::new();
    state.insert(0, plan.input_polarization);
    for unit in &plan.units {
        let j = unit.jones();
        let mut next: OamState = BTreeMap::new();
        for (&m, amps) in &state {
            let out = j.apply(*amps);
            for (pol, amp) in [(Polarization::L, out[0]), (Polarization::R, out[1])] {
                let (m2, pol2) = qplate_action(m, pol, unit.q)?;
                let slot = next.entry(m2).or_insert([Complex::new(0.0, 0.0); 2]);
                slot[match pol2 {
                    Polarization::L => 0,
                    Polarization::R => 1,
                }] += amp;
            }
        }
        state = next;
    }
    let jp = plan.projection.jones();
    let transmitted: BTreeMap<i64, Complex64> = state.iter().map(|(&m, a)| (m, dot(&h_ket(), &jp.apply(*a)))).collect();
    let probability = transmitted.values().map(|z| z.norm_sqr()).sum();
    Ok(PlanSimulation {
        state,
        transmitted,
        probability,
    })
}

/// Largest elementwise difference between the plan's OAM output and the
/// walk of `solution` under `m = 2(i - 1) - n`, after removing the plan's
/// recorded global phases; covers both the pre-measurement state and the
/// transmitted amplitudes.
pub fn plan_walk_discrepancy(plan: &ExperimentPlan, solution: &EngineeringSolution) -> Result<f64> {
    let sim = simulate_plan(plan)?;
    let n = plan.units.len();
    let walk = crate::walk::run_walk(solution.initial_coin, &solution.coins)?;
    let unit_phase = cis(-plan.total_unit_phase());
    let mut worst: f64 = 0.0;
    for (&m, amps) in &sim.state {
        let expected = match oam_to_site(m, n) {
            Some(site) => [walk.amp(site, 0), walk.amp(site, 1)],
            None => [Complex::new(0.0, 0.0); 2],
        };
        for k in 0..2 {
            worst = worst.max((amps[k] * unit_phase - expected[k]).norm());
        }
    }
    for site in walk.origin()..=walk.last_site() {
        if !sim.state.contains_key(&site_to_oam(site, n)) {
            worst = worst.max(walk.amp(site, 0).norm().max(walk.amp(site, 1).norm()));
        }
    }
    let proj = project_coin(&walk, solution.projection)?;
    let phase = cis(-plan.total_unit_phase() - plan.projection.global_phase);
    for (k, amp) in proj.site_amps.iter().enumerate() {
        let m = site_to_oam(proj.origin + k as i64, n);
        let got = sim.transmitted.get(&m).copied().unwrap_or_default();
        worst = worst.max((got * phase - amp).norm());
    }
    worst = worst.max((sim.probability - proj.probability).abs());
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engineer::{engineer_target, EngineerOptions};
    use crate::state::balanced_target;

    #[test]
    fn balanced_four_site_plan_projects_with_quarter_probability() {
        let t = balanced_target(4).unwrap();
        let (sols, _) = engineer_target(&t, &EngineerOptions::default()).unwrap();
        for sol in &sols {
            let plan = compile_experiment(sol).unwrap();
            assert_eq!(plan.units.len(), 3);
            assert_eq!(plan.counts.wave_plates, 9);
            assert_eq!(plan.counts.projection_plates, 1);
            let sim = simulate_plan(&plan).unwrap();
            assert!((sim.probability - 0.25).abs() < 1e-9);
            assert!(plan_walk_discrepancy(&plan, sol).unwrap() < 1e-8);
            assert!(plan_walk_discrepancy(&plan.rounded(), sol).unwrap() < 1e-8);
        }
    }

    #[test]
    fn plus_projection_is_a_bare_half_wave_plate() {
        let stage = projection_stage(crate::walk::plus_bra()).unwrap();
        assert!(stage.qwp.is_none());
        let stage = projection_stage([Complex64::new(0.8, 0.0), Complex64::new(0.0, 0.6)]).unwrap();
        assert!(stage.qwp.is_some());
    }

    #[test]
    fn site_oam_round_trip() {
        for layer in 0..5 {
            for site in 1..7 {
                assert_eq!(oam_to_site(site_to_oam(site, layer), layer), Some(site));
            }
        }
        assert_eq!(oam_to_site(1, 0), None);
    }
}
