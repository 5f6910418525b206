mod common;

use common::{fro, laplace, water_level_sorted};
use densemimo::baselines::*;
use densemimo::estimator::{plan_information, posterior_mean, PilotBatch};
use densemimo::icefill::design_2dif;
use densemimo::kernels::CovKernel;
use densemimo::numkit::{c, sample_complex_gaussian_seeded, vectorize, CMatrix, CVector};
use densemimo::sim::transmit;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn two_point_dft_plan() {
    let plan = design_dft_plan(1, 2, 1, 1.0, dft_pilot_count(1, 2, 1)).unwrap();
    assert_eq!(plan.n_pilots(), 2);
    let s = 0.5f64.sqrt();
    let w0 = &plan.combiners[0];
    let w1 = &plan.combiners[1];
    let ratio0 = w0[(1, 0)] / w0[(0, 0)];
    let ratio1 = w1[(1, 0)] / w1[(0, 0)];
    assert!((w0[(0, 0)].norm() - s).abs() < 1e-12 && (w1[(0, 0)].norm() - s).abs() < 1e-12);
    assert!((ratio0 - c(1.0, 0.0)).norm() < 1e-12);
    assert!((ratio1 - c(-1.0, 0.0)).norm() < 1e-12);
}

#[test]
fn dft_blocks_are_scaled_isometries_and_span_the_channel() {
    let plan = design_dft_plan(3, 7, 2, 2.0, dft_pilot_count(3, 7, 2)).unwrap();
    for q in 0..plan.n_pilots() {
        let b = plan.block(q);
        assert!(fro(&(b.adjoint() * &b - CMatrix::identity(2, 2) * c(2.0, 0.0))) < 1e-10);
    }
    let x = plan.obs_matrix();
    let sv = x.svd(false, false).singular_values;
    assert_eq!(sv.iter().filter(|s| **s > 1e-8).count(), 21);
}

#[test]
fn least_squares_is_exact_without_noise() {
    let plan = design_dft_plan(2, 5, 2, 1.0, dft_pilot_count(2, 5, 2)).unwrap();
    let h = sample_complex_gaussian_seeded(5, 2, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let batch = transmit(&plan, &h, 0.0, &mut rng);
    assert!((estimate_ls(&batch).unwrap() - vectorize(&h)).norm() < 1e-8);
    let zero = PilotBatch {
        y: CVector::zeros(batch.y.len()),
        ..batch
    };
    assert_eq!(estimate_ls(&zero).unwrap().norm(), 0.0);
}

#[test]
fn lmmse_on_dft_plan_beats_least_squares_in_nmse() {
    let k = laplace(2, 16, 0.125, 3.0);
    let noise = k.energy() / 10.0;
    let plan = design_dft_plan(2, 16, 2, 1.0, dft_pilot_count(2, 16, 2)).unwrap();
    let root = k.full().cholesky().unwrap().l();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (mut mmse, mut ls) = (0.0, 0.0);
    for t in 0..500 {
        let hv = &root * vectorize(&sample_complex_gaussian_seeded(32, 1, 1000 + t));
        let h = CMatrix::from_column_slice(16, 2, hv.as_slice());
        let batch = transmit(&plan, &h, noise, &mut rng);
        mmse += (posterior_mean(&k, &batch).unwrap() - &hv).norm_squared() / hv.norm_squared();
        ls += (estimate_ls(&batch).unwrap() - &hv).norm_squared() / hv.norm_squared();
    }
    assert!(mmse < ls, "{mmse} vs {ls}");
}

#[test]
fn equal_eigenvalues_share_power_equally() {
    let k = CovKernel::identity(2, 4);
    let wf = design_waterfilling(&k, 3, 2, 1.5, 0.5).unwrap();
    assert!(wf.powers.iter().all(|p| (p - 1.5).abs() < 1e-12));
    assert!((wf.beta - (0.5 + 1.5)).abs() < 1e-12);
}

#[test]
fn water_level_agrees_with_active_set_formula() {
    let mut levels = vec![
        1.1, 1.2, 1.8, 1.9, 2.1, 2.1, 2.5, 3.0, 3.0, 4.5, 2.5, 3.2, 3.3, 4.6, 5.0,
    ];
    levels.sort_by(f64::total_cmp);
    levels.truncate(12);
    let (beta, powers) = water_level(&levels, 24.0).unwrap();
    assert!((beta - water_level_sorted(&levels, 24.0)).abs() < 1e-12);
    assert!((beta - 4.31).abs() <= 0.01);
    assert!((powers.iter().sum::<f64>() - 24.0).abs() < 1e-9);
}

#[test]
fn column_ice_filling_with_one_transmit_antenna_is_2dif() {
    let k = laplace(1, 8, 0.125, 2.0);
    let a = design_if_plan(&k, 5, 1.0, 0.1).unwrap();
    let b = design_2dif(&k, 5, 1, 1.0, 0.1).unwrap();
    assert_eq!(a.selections, b.selections);
}

#[test]
fn one_pilot_per_column_uses_top_receive_eigenvector() {
    let k = laplace(3, 8, 0.125, 2.0);
    let plan = design_if_plan(&k, 3, 1.0, 0.1).unwrap();
    for (n, sel) in plan.selections.iter().enumerate() {
        assert_eq!(sel.n_t, n);
        assert_eq!(sel.n_r, vec![0]);
        assert!((plan.precoders[n][n] - c(1.0, 0.0)).norm() < 1e-12);
    }
}

#[test]
fn column_ice_filling_does_not_beat_2dif() {
    for k in [laplace(2, 16, 0.125, 3.0), laplace(4, 8, 0.125, 2.0)] {
        let (q, n_rf, noise) = (6, 2, 0.1);
        let full =
            plan_information(&k, &design_2dif(&k, q, n_rf, 1.0, noise).unwrap(), noise).unwrap();
        let cols = plan_information(
            &k,
            &design_if_plan(&k, q * n_rf, 1.0, noise).unwrap(),
            noise,
        )
        .unwrap();
        assert!(cols <= full + 1e-9, "{cols} vs {full}");
    }
}

#[test]
fn random_plans_are_worse_on_average() {
    let k = laplace(2, 8, 0.125, 3.0);
    let greedy = plan_information(&k, &design_2dif(&k, 4, 2, 1.0, 0.1).unwrap(), 0.1).unwrap();
    let mean: f64 = (0..100)
        .map(|s| {
            plan_information(&k, &design_random_plan(2, 8, 2, 4, 1.0, s).unwrap(), 0.1).unwrap()
        })
        .sum::<f64>()
        / 100.0;
    assert!(mean < greedy);
    assert_ne!(
        design_random_plan(2, 8, 2, 4, 1.0, 1).unwrap(),
        design_random_plan(2, 8, 2, 4, 1.0, 2).unwrap()
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn water_filling_satisfies_kkt(seed in 0u64..100_000, q in 1usize..6, n_rf in 1usize..3) {
        let g = sample_complex_gaussian_seeded(3, 3, seed);
        let r = sample_complex_gaussian_seeded(5, 5, seed + 1);
        let k = CovKernel::new(&g * g.adjoint(), &r * r.adjoint()).unwrap();
        let (p, noise) = (1.0, 0.2);
        let wf = design_waterfilling(&k, q, n_rf, p, noise).unwrap();
        let total = p * (q * n_rf) as f64;
        prop_assert!((wf.powers.iter().sum::<f64>() - total).abs() < 1e-8 * total);
        for (pw, l) in wf.powers.iter().zip(&wf.eigenvalues) {
            let level = noise / l;
            if *pw > 0.0 {
                prop_assert!((pw + level - wf.beta).abs() < 1e-8 * wf.beta);
            } else {
                prop_assert!(wf.beta <= level + 1e-8 * wf.beta);
            }
        }
        let greedy = plan_information(&k, &design_2dif(&k, q, n_rf, p, noise).unwrap(), noise).unwrap();
        prop_assert!(greedy <= wf.information_bits() + 1e-9);
    }
}
