mod common;

use common::laplace;
use densemimo::icefill::design_2dif;
use densemimo::kernels::{CovKernel, KernelFamily};
use densemimo::numkit::{frobenius, CMatrix};
use densemimo::schemes::SchemeRegistry;
use densemimo::sim::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small(family: KernelFamily) -> ScenarioConfig {
    ScenarioConfig {
        n_t: 2,
        n_r: 8,
        n_rf: 2,
        pilots: 4,
        family,
        methods: vec!["2dif".into(), "dft-mmse".into()],
        trials: 200,
        seed: 3,
        ..Default::default()
    }
}

#[test]
fn channel_energy_matches_kernel_trace() {
    let ch = ChannelModel::from_model(
        &small(KernelFamily::Laplace { eta: 2.0 })
            .kernel_model()
            .unwrap(),
        &KernelFamily::Laplace { eta: 2.0 },
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 10_000;
    let mean: f64 = (0..n)
        .map(|_| frobenius(&ch.synthesize(&mut rng)).powi(2))
        .sum::<f64>()
        / n as f64;
    let want = ch.kernel().energy();
    assert!((mean / want - 1.0).abs() < 0.03, "{mean} vs {want}");
}

#[test]
fn received_noise_has_the_modelled_covariance() {
    let k = laplace(2, 6, 0.25, 1.0);
    let mut plan = design_2dif(&k, 3, 2, 1.0, 0.1).unwrap();
    plan.combiners[0] *= num_complex::Complex64::new(2.0, 0.0);
    let h = CMatrix::zeros(6, 2);
    let noise = 0.7;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let n = 10_000;
    let mut cov = CMatrix::zeros(6, 6);
    let mut xi = CMatrix::zeros(6, 6);
    for _ in 0..n {
        let b = transmit(&plan, &h, noise, &mut rng);
        cov += &b.y * b.y.adjoint();
        xi = b.xi;
    }
    cov /= num_complex::Complex64::new(n as f64, 0.0);
    assert!(frobenius(&(&cov - &xi)) / frobenius(&xi) < 0.05);
}

#[test]
fn default_snr_reference() {
    let k = CovKernel::identity(4, 64);
    assert!((snr_to_noise(10.0, 1.0, &k) - 25.6).abs() < 1e-12);
    assert!((snr_to_noise(0.0, 2.0, &CovKernel::identity(1, 1)) - 2.0).abs() < 1e-12);
}

#[test]
fn sweep_report_has_one_row_per_method_and_point() {
    let cfg = small(KernelFamily::Laplace { eta: 3.0 });
    let report = run_sweep(
        &cfg,
        SweepAxis::Snr,
        &[0.0, 10.0, 20.0],
        &SchemeRegistry::default(),
    )
    .unwrap();
    let csv = report.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], CSV_HEADER);
    assert_eq!(lines.len(), 1 + 6);
    let nmse: Vec<f64> = report.method("2dif").iter().map(|r| r.nmse_db).collect();
    assert!(nmse[0] > nmse[1] && nmse[1] > nmse[2]);
    assert_eq!(
        csv,
        run_sweep(
            &cfg,
            SweepAxis::Snr,
            &[0.0, 10.0, 20.0],
            &SchemeRegistry::default()
        )
        .unwrap()
        .to_csv()
    );
}

#[test]
fn more_pilots_lower_the_error() {
    let cfg = ScenarioConfig {
        methods: vec!["2dif".into()],
        ..small(KernelFamily::Laplace { eta: 3.0 })
    };
    let report = run_sweep(
        &cfg,
        SweepAxis::Pilots,
        &[2.0, 4.0, 8.0],
        &SchemeRegistry::default(),
    )
    .unwrap();
    let rows = report.method("2dif");
    assert_eq!(rows.len(), 3);
    assert!(rows
        .windows(2)
        .all(|w| w[1].nmse_db < w[0].nmse_db && w[1].mi_bits > w[0].mi_bits));
}

#[test]
fn thread_count_does_not_change_results() {
    let base = small(KernelFamily::Laplace { eta: 3.0 });
    let one = run_sweep(
        &ScenarioConfig {
            threads: 1,
            ..base.clone()
        },
        SweepAxis::Snr,
        &[5.0],
        &SchemeRegistry::default(),
    )
    .unwrap();
    let four = run_sweep(
        &ScenarioConfig { threads: 4, ..base },
        SweepAxis::Snr,
        &[5.0],
        &SchemeRegistry::default(),
    )
    .unwrap();
    assert_eq!(one.to_csv(), four.to_csv());
}

#[test]
fn unknown_method_is_rejected() {
    let cfg = ScenarioConfig {
        methods: vec!["nope".into()],
        ..small(KernelFamily::Identity)
    };
    assert!(run_sweep(&cfg, SweepAxis::Snr, &[0.0], &SchemeRegistry::default()).is_err());
}

#[test]
fn invalid_configs_are_rejected() {
    let bad = [
        ScenarioConfig {
            n_rf: 9,
            ..small(KernelFamily::Identity)
        },
        ScenarioConfig {
            pilots: 0,
            ..small(KernelFamily::Identity)
        },
        ScenarioConfig {
            power: -1.0,
            ..small(KernelFamily::Identity)
        },
        ScenarioConfig {
            trials: 0,
            ..small(KernelFamily::Identity)
        },
    ];
    for cfg in bad {
        assert!(cfg.validate().is_err(), "{cfg:?}");
    }
}

#[test]
fn adaptive_report_shape_and_schedules() {
    let cfg = ScenarioConfig {
        snr_db: 15.0,
        ..small(KernelFamily::Laplace { eta: 3.0 })
    };
    let opts = AdaptiveOptions {
        frames: 30,
        eval_channels: 32,
        ..Default::default()
    };
    let report = run_adaptive(&cfg, &opts).unwrap();
    let csv = report.to_csv();
    assert_eq!(csv.lines().next(), Some("frame,nmse_db,kernel_error"));
    assert_eq!(csv.lines().count(), 31);
    let last = report.frames.last().unwrap();
    assert!(last.nmse_db >= report.perfect_nmse_db - 0.5);
    assert!(last.kernel_error < report.frames[0].kernel_error);

    let literal = run_adaptive(
        &cfg,
        &AdaptiveOptions {
            schedule: AdaptiveSchedule::Literal,
            posterior_correction: false,
            ..opts
        },
    )
    .unwrap();
    assert!(literal.frames.last().unwrap().nmse_db > last.nmse_db);
}
