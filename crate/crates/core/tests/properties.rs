use std::f64::consts::PI;

use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use circreg::bands::{simultaneous_band, BandSettings};
use circreg::diagnostics::gof_report;
use circreg::select::{select_cv, select_rot, RotConstants, SearchSpec};
use circreg::sim::{sample_dgp, DgpSpec, Regression};
use circreg::{signed_diff, Bandwidths, Estimator, KernelSpec, MixedSample};

fn random_sample(seed: u64, n: usize, levels: usize) -> MixedSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<f64> = (0..n).map(|_| rng.random()).collect();
    let z: Vec<u32> = (0..n).map(|_| rng.random_range(0..levels as u32)).collect();
    let t: Vec<f64> = (0..n).map(|_| rng.random_range(-PI..PI)).collect();
    MixedSample::univariate(&x, &z, levels, &t).unwrap()
}

#[test]
fn zero_lambda_matches_subsample_fits() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut compared = 0;
    for case in 0..100 {
        let n = rng.random_range(5..=50);
        let s = random_sample(case, n, 3);
        let bw = Bandwidths::new(vec![rng.random_range(0.05..0.6)], vec![0.0]).unwrap();
        let z = rng.random_range(0..3u32);
        let rows = s.rows_at_level(0, z);
        if rows.is_empty() {
            continue;
        }
        let sub = s.select_rows(&rows).unwrap();
        let x0 = rng.random_range(0.0..1.0);
        for est in [
            Estimator::nw(KernelSpec::gaussian()),
            Estimator::ll(KernelSpec::gaussian(), false),
        ] {
            if let (Ok(a), Ok(b)) = (
                est.fit_point(&s, &bw, &[x0], &[z]),
                est.fit_point(&sub, &bw, &[x0], &[z]),
            ) {
                assert!(signed_diff(a.angle, b.angle).abs() < 1e-10, "case {case}");
                compared += 1;
            }
        }
    }
    assert!(compared > 150);
}

#[test]
fn design_fits_match_pointwise_fits() {
    let s = random_sample(4, 40, 3);
    let bw = Bandwidths::new(vec![0.2], vec![0.3]).unwrap();
    let est = Estimator::nw(KernelSpec::gaussian());
    let design = est.fitted_at_design(&s, &bw).unwrap();
    for (i, f) in design.iter().enumerate() {
        let p = est.fit_point(&s, &bw, s.x_row(i), s.z_row(i)).unwrap();
        assert_eq!(f.angle, p.angle);
    }
}

#[test]
fn selected_fit_beats_flat_fit_on_structured_data() {
    let spec = DgpSpec::new(Regression::R1, 10.0, 150).unwrap();
    let s = sample_dgp(&spec, 12).unwrap();
    let est = Estimator::nw(KernelSpec::gaussian());
    let sel = select_cv(&s, &SearchSpec::with_counts(&s, 12, 6).unwrap(), &est).unwrap();
    let fitted: Vec<f64> = est
        .fitted_at_design(&s, &sel.bandwidths)
        .unwrap()
        .iter()
        .map(|f| f.angle)
        .collect();
    let report = gof_report(&s, &fitted, 0).unwrap();
    assert!(report.r2_circ.unwrap() > 0.5);
    let weighted: f64 = report
        .by_level
        .iter()
        .map(|l| l.n as f64 * l.case_obs.unwrap())
        .sum::<f64>()
        / report.n as f64;
    assert_abs_diff_eq!(report.case_obs, weighted, epsilon = 1e-12);
}

#[test]
fn band_is_reproducible_and_contains_center() {
    let s = sample_dgp(&DgpSpec::new(Regression::R2, 3.0, 60).unwrap(), 5).unwrap();
    let bw = Bandwidths::new(vec![0.15], vec![0.1]).unwrap();
    let est = Estimator::nw(KernelSpec::gaussian());
    let grid = [0.2, 0.4, 0.6, 0.8];
    let settings = BandSettings {
        replicates: 60,
        seed: 8,
        ..BandSettings::default()
    };
    let a = simultaneous_band(&s, &bw, &est, &[2], &grid, &settings).unwrap();
    let b = simultaneous_band(&s, &bw, &est, &[2], &grid, &settings).unwrap();
    assert_eq!(a, b);
    assert!(a.alpha_final >= 0.05 / 4.0 - 1e-15 && a.alpha_final <= 0.05);
    for j in 0..grid.len() {
        assert!(a.lower_offset[j] <= a.upper_offset[j]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn rot_scales_with_covariate(seed in 0u64..1000, a in 0.1f64..20.0) {
        let s = random_sample(seed, 30, 2);
        let x: Vec<f64> = (0..s.n()).map(|i| s.x_row(i)[0] * a).collect();
        let scaled = MixedSample::univariate(&x, &s.z_column(0), 2, s.theta()).unwrap();
        let h0 = select_rot(&s, &RotConstants::default()).unwrap().bandwidths;
        let h1 = select_rot(&scaled, &RotConstants::default()).unwrap().bandwidths;
        prop_assert!((h1.h[0] - a * h0.h[0]).abs() <= 1e-12 * h1.h[0].max(1.0));
        prop_assert_eq!(h0.lambda, h1.lambda);
    }

    #[test]
    fn fits_rotate_with_responses(seed in 0u64..1000, c in -PI..PI) {
        let s = random_sample(seed, 25, 3);
        let rotated = s.with_theta(s.theta().iter().map(|t| t + c).collect()).unwrap();
        let bw = Bandwidths::new(vec![0.25], vec![0.2]).unwrap();
        let est = Estimator::ll(KernelSpec::gaussian(), true);
        if let Ok(f) = est.fit_point(&s, &bw, &[0.5], &[0]) {
            let g = est.fit_point(&rotated, &bw, &[0.5], &[0]).unwrap();
            prop_assert!(signed_diff(g.angle, f.angle + c).abs() < 1e-10);
        }
    }
}
