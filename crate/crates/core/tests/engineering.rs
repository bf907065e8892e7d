//! Target engineering through the interior `d` system and the two-step
//! closed form, checked against forward simulation.

mod common;

use qwalk::analysis::{haar_sample, probability_histogram, HistogramMode, HistogramOptions};
use qwalk::engineer::{
    d_probability, d_residuals, engineer_target, projection_probability_2step_closed_form, solve_d2, solve_d_system, EngineerOptions,
    InitialCoinPolicy, N_MAX_POLY,
};
use qwalk::state::balanced_target;
use qwalk::{Complex64, QwError, TargetSuperposition};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[test]
fn engineered_solutions_forward_verify_on_haar_targets() {
    for n in 2..=4 {
        for i in 0..20 {
            let t = haar_sample(n + 1, 40 + n as u64, i).unwrap();
            let (sols, _) = engineer_target(&t, &EngineerOptions::default()).unwrap();
            assert!(!sols.is_empty());
            for s in &sols {
                let (p, f) = s.forward_check(&t).unwrap();
                assert!(f > 1.0 - 1e-9, "n={n} F={f}");
                assert!((p - s.probability).abs() < 1e-12);
                assert!((p - d_probability(t.amps(), &s.d)).abs() < 1e-9);
                assert_eq!(s.coins.len(), n);
            }
            assert!(sols.windows(2).all(|w| w[0].probability >= w[1].probability));
        }
    }
}

#[test]
fn roots_satisfy_the_d_system() {
    for i in 0..10 {
        let t = haar_sample(5, 3, i).unwrap();
        let out = solve_d_system(&t).unwrap();
        for s in &out.solutions {
            let worst = d_residuals(t.amps(), &s.d).iter().fold(0.0f64, |a, z| a.max(z.norm()));
            assert!(worst < 1e-9, "residual {worst}");
        }
    }
}

#[test]
fn closed_form_two_step_agrees_with_numeric_roots() {
    let mut g = common::rng(11);
    let mut checked = 0;
    while checked < 300 {
        let t = TargetSuperposition::new((0..3).map(|_| qwalk::rng::complex_normal(&mut g)).collect()).unwrap();
        let u = t.amps();
        if (u[0].norm() - u[2].norm()).abs() < 1e-3 {
            continue;
        }
        checked += 1;
        let a = solve_d2(&t).unwrap().solutions;
        let b = solve_d_system(&t).unwrap().solutions;
        assert_eq!((a.len(), b.len()), (1, 1));
        assert!((a[0].d[0] - b[0].d[0]).norm() < 1e-8);
    }
}

#[test]
fn closed_form_probability_matches_pipeline() {
    for &(u1, u2) in &[(0.1, 0.3), (-0.6, 0.2), (0.5, -0.5), (0.0, 0.9), (-0.2, -0.7)] {
        let u3 = (1.0f64 - u1 * u1 - u2 * u2).sqrt();
        let t = TargetSuperposition::from_real(&[u1, u2, u3]).unwrap();
        let (sols, _) = engineer_target(&t, &EngineerOptions::default()).unwrap();
        let p = projection_probability_2step_closed_form(u1, u2).unwrap();
        assert!((sols[0].probability - p).abs() < 1e-10);
    }
    assert!(projection_probability_2step_closed_form(0.9, 0.9).is_err());
}

#[test]
fn removable_singularity_keeps_probability() {
    // u1 = -u3: the general formula is 0/0 but the limit is finite.
    let a = 0.5;
    let u2 = (1.0f64 - 2.0 * a * a).sqrt();
    let t = TargetSuperposition::from_real(&[a, u2, -a]).unwrap();
    let out = solve_d2(&t).unwrap();
    assert_eq!(out.solutions.len(), 1);
    let p = out.solutions[0].probability;
    let near = TargetSuperposition::from_real(&[a + 1e-6, u2, -a]).unwrap();
    let p_near = solve_d2(&near).unwrap().solutions[0].probability;
    assert!(p > 0.0 && (p - p_near).abs() < 1e-5);
    let (sols, _) = engineer_target(&t, &EngineerOptions::default()).unwrap();
    assert!(sols[0].fidelity > 1.0 - 1e-9);
}

#[test]
fn degenerate_family_follows_the_probability_law() {
    let t = TargetSuperposition::new(vec![c(0.0, 0.5), c(0.2, 0.0), c(0.0, 0.5)]).unwrap();
    let u = t.amps();
    let out = solve_d2(&t).unwrap();
    assert_eq!(out.solutions.len(), 9);
    for s in &out.solutions {
        let d_i = s.family_t.unwrap();
        assert!((s.d[0] - c(u[1].re / 2.0, d_i)).norm() < 1e-12);
        let law = 1.0 / (2.0 * (2.0 * u[0].im.powi(2) + u[1].re.powi(2) / 2.0 + 2.0 * d_i * d_i));
        assert!((s.probability - law).abs() < 1e-12);
    }
}

#[test]
fn unreachable_degenerate_target_is_empty_with_diagnostic() {
    let t = TargetSuperposition::from_real(&[1.0, 1.0, 1.0]).unwrap();
    let (sols, diag) = engineer_target(&t, &EngineerOptions::default()).unwrap();
    assert!(sols.is_empty());
    assert!(diag.unwrap().contains("not reachable"));
}

#[test]
fn preimage_policy_makes_first_coin_trivial() {
    let t = balanced_target(4).unwrap();
    let opts = EngineerOptions {
        initial_coin: InitialCoinPolicy::PreImage,
        ..Default::default()
    };
    let (sols, _) = engineer_target(&t, &opts).unwrap();
    assert_eq!(sols.len(), 2);
    for s in &sols {
        assert!(s.coins[0].params().theta.abs() < 1e-9);
        assert!((s.probability - 0.25).abs() < 1e-9);
    }
}

#[test]
fn long_targets_are_refused() {
    let t = balanced_target(N_MAX_POLY + 2).unwrap();
    assert!(matches!(solve_d_system(&t), Err(QwError::Domain(_))));
}

#[test]
fn histogram_bins_the_balanced_target() {
    let mut opts = HistogramOptions::new(3, 40, HistogramMode::DSystem);
    opts.seed = 2;
    opts.extra_targets = vec![balanced_target(4).unwrap()];
    let table = probability_histogram(&opts).unwrap();
    assert_eq!(table.records.len(), 41);
    let max_p = table.max_p.as_ref().unwrap();
    assert_eq!(max_p.total(), 41);
    assert!(max_p.counts[max_p.bin_of(0.25).unwrap()] >= 1);
    let edges = max_p.edges();
    assert_eq!(edges.len(), opts.bins + 1);
    assert_eq!((edges[0], edges[opts.bins]), opts.range);
}
