use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use densemimo::bundle::{read_bundle, read_kernel, PlanBundle};
use densemimo::estimator::plan_information;
use densemimo::sim::snr_to_noise;

const SMALL: &str = "\
[array]
n_t = 2
n_r = 8
n_rf = 2
spacing_over_lambda = 1/8
[pilot]
q = 4
snr_db = 10
[kernel]
family = laplace
eta = 3
training_samples = 40
[run]
method = 2dif, ts2dif, dft-mmse
trials = 50
seed = 4
";

fn densemimo(dir: &Path, args: &[&str]) -> Output {
    let config = dir.join("scenario.ini");
    if !config.exists() {
        fs::write(&config, SMALL).unwrap();
    }
    Command::new(env!("CARGO_BIN_EXE_densemimo"))
        .args(args)
        .arg("--config")
        .arg(&config)
        .output()
        .unwrap()
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn no_staging_left(dir: &Path) -> bool {
    fs::read_dir(dir)
        .map(|it| {
            it.flatten()
                .all(|e| !e.file_name().to_string_lossy().starts_with(".staging"))
        })
        .unwrap_or(true)
}

#[test]
fn design_writes_bundles_and_reports_information() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let stdout = ok(&densemimo(
        tmp.path(),
        &["design", "--out", out.to_str().unwrap()],
    ));
    assert_eq!(stdout.lines().count(), 3);
    assert!(stdout.lines().all(|l| l.contains("MI ")));
    assert!(matches!(
        read_bundle(&out.join("2dif")).unwrap(),
        PlanBundle::Plan(_)
    ));
    assert!(matches!(
        read_bundle(&out.join("ts2dif")).unwrap(),
        PlanBundle::Hybrid(_)
    ));
    let residuals = fs::read_to_string(out.join("ts2dif/residuals.csv")).unwrap();
    assert_eq!(residuals.lines().next(), Some("pilot,iter,residual"));
    let table = fs::read_to_string(out.join("design.csv")).unwrap();
    assert_eq!(table.lines().count(), 4);
    assert!(no_staging_left(&out));
}

#[test]
fn exported_plans_reimport_with_the_same_information() {
    let tmp = tempfile::tempdir().unwrap();
    let design_dir = tmp.path().join("design");
    let export_dir = tmp.path().join("export");
    ok(&densemimo(
        tmp.path(),
        &["design", "--out", design_dir.to_str().unwrap()],
    ));
    let stdout = ok(&densemimo(
        tmp.path(),
        &["export-plan", "--out", export_dir.to_str().unwrap()],
    ));
    assert!(stdout.contains("round trip"));

    let (kernel, _) = read_kernel(&export_dir.join("kernel")).unwrap();
    let noise = snr_to_noise(10.0, 1.0, &kernel);
    let table = fs::read_to_string(design_dir.join("design.csv")).unwrap();
    for line in table.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        let plan = read_bundle(&export_dir.join(fields[0]))
            .unwrap()
            .observation_plan();
        let mi = plan_information(&kernel, &plan, noise).unwrap();
        let reported: f64 = fields[3].parse().unwrap();
        assert!(
            (mi - reported).abs() < 1e-8,
            "{}: {mi} vs {reported}",
            fields[0]
        );
    }
}

#[test]
fn export_rejects_designs_without_a_physical_plan() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let res = densemimo(
        tmp.path(),
        &[
            "export-plan",
            "--out",
            out.to_str().unwrap(),
            "--set",
            "run.method=waterfilling",
        ],
    );
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("no physical plan"));
    assert!(!out.join("waterfilling").exists());
    assert!(no_staging_left(&out));
}

#[test]
fn snr_sweep_has_six_rows_per_method_and_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let args = [
        "sweep-snr",
        "--values",
        "-5:5:20",
        "--out",
        out.to_str().unwrap(),
    ];
    let stdout = ok(&densemimo(tmp.path(), &args));
    assert_eq!(stdout.lines().count(), 3 * 6 + 1);
    let first = fs::read(out.join("sweep_snr_db.csv")).unwrap();
    let text = String::from_utf8(first.clone()).unwrap();
    for m in ["2dif", "ts2dif", "dft-mmse"] {
        assert_eq!(
            text.lines()
                .filter(|l| l.split(',').nth(1) == Some(m))
                .count(),
            6
        );
    }
    ok(&densemimo(
        tmp.path(),
        &[&args[..], &["--threads", "3"]].concat(),
    ));
    assert_eq!(fs::read(out.join("sweep_snr_db.csv")).unwrap(), first);
}

#[test]
fn pilot_and_spacing_sweeps() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = out.to_str().unwrap();
    ok(&densemimo(
        tmp.path(),
        &[
            "sweep-q",
            "--values",
            "2,4",
            "--set",
            "run.method=2dif",
            "--out",
            o,
        ],
    ));
    ok(&densemimo(
        tmp.path(),
        &[
            "sweep-spacing",
            "--values",
            "1/8,1/2",
            "--set",
            "run.method=2dif",
            "--out",
            o,
        ],
    ));
    assert_eq!(
        fs::read_to_string(out.join("sweep_q.csv"))
            .unwrap()
            .lines()
            .count(),
        3
    );
    let spacing = fs::read_to_string(out.join("sweep_spacing_over_lambda.csv")).unwrap();
    assert!(spacing.lines().nth(2).unwrap().contains(",0.5,"));
}

#[test]
fn overrides_take_precedence_over_the_file() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    ok(&densemimo(
        tmp.path(),
        &[
            "design",
            "--set",
            "pilot.q=7",
            "--set",
            "run.method=2dif",
            "--out",
            out.to_str().unwrap(),
        ],
    ));
    assert_eq!(
        read_bundle(&out.join("2dif"))
            .unwrap()
            .observation_plan()
            .n_pilots(),
        7
    );
}

#[test]
fn adaptive_writes_one_row_per_frame() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let stdout = ok(&densemimo(
        tmp.path(),
        &[
            "adaptive",
            "--frames",
            "5",
            "--eval-channels",
            "8",
            "--out",
            out.to_str().unwrap(),
        ],
    ));
    assert!(stdout.starts_with("frame 5:"));
    let csv = fs::read_to_string(out.join("adaptive.csv")).unwrap();
    assert_eq!(csv.lines().count(), 6);
}

#[test]
fn fit_kernel_reports_eta_and_curve() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let stdout = ok(&densemimo(
        tmp.path(),
        &["fit-kernel", "--out", out.to_str().unwrap()],
    ));
    assert!(stdout.starts_with("eta "));
    let curve = fs::read_to_string(out.join("eta_curve.csv")).unwrap();
    assert_eq!(curve.lines().next(), Some("eta,log_likelihood"));
    assert_eq!(curve.lines().count(), 101);
    let (kernel, family) = read_kernel(&out.join("kernel")).unwrap();
    assert_eq!(kernel.n_r(), 8);
    assert!(family.eta().is_some());

    let stats = tmp.path().join("stats");
    ok(&densemimo(
        tmp.path(),
        &[
            "fit-kernel",
            "--set",
            "kernel.family=statistical",
            "--set",
            "kernel.eta=",
            "--out",
            stats.to_str().unwrap(),
        ],
    ));
    assert!(stats.join("kernel/sigma_r.cmt").exists());
}

#[test]
fn invalid_config_fails_without_touching_previous_output() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    ok(&densemimo(
        tmp.path(),
        &[
            "design",
            "--set",
            "run.method=2dif",
            "--out",
            out.to_str().unwrap(),
        ],
    ));
    let before = fs::read(out.join("design.csv")).unwrap();

    let res = densemimo(
        tmp.path(),
        &[
            "design",
            "--set",
            "array.n_rf=9",
            "--out",
            out.to_str().unwrap(),
        ],
    );
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("array.n_rf"));

    fs::write(tmp.path().join("broken.ini"), "[array]\nn_t 2\n").unwrap();
    let res = Command::new(env!("CARGO_BIN_EXE_densemimo"))
        .args(["design", "--config"])
        .arg(tmp.path().join("broken.ini"))
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("broken.ini:2"));

    assert_eq!(fs::read(out.join("design.csv")).unwrap(), before);
    assert!(no_staging_left(&out));
}
