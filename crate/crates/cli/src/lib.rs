//! Command-line front-end: scenario files in, CSV and CMT artifacts out.

// `!(x > 0.0)` is used on purpose so that NaN fails range checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use densemimo::bundle::{read_bundle, read_kernel, write_hybrid, write_kernel, write_plan};
use densemimo::estimator::plan_information;
use densemimo::kernels::{fit_eta, statistical_kernels, EtaGrid, KernelFamily};
use densemimo::numkit::rel_frobenius_error;
use densemimo::schemes::{deploy, Design, SchemeRegistry};
use densemimo::sim::{
    run_adaptive, run_sweep_with, snr_to_noise, to_db, training_observations, trial_seed,
    AdaptiveOptions, ChannelModel, Scenario, ScenarioConfig, SweepAxis,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{parse_values, RawConfig};

/// Largest MI change tolerated between a plan and its re-imported bundle, in bits.
pub const ROUND_TRIP_TOL: f64 = 1e-9;

#[derive(Debug, Parser)]
#[command(
    name = "densemimo",
    version,
    about = "Pilot design and channel estimation for dense MIMO arrays"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Scenario file; defaults apply when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Output directory, created if absent.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,

    /// Override a config value; repeatable.
    #[arg(long = "set", global = true, value_name = "SECTION.KEY=VALUE")]
    pub overrides: Vec<String>,

    /// Monte-Carlo worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Design pilots for every configured method and write the plan bundles.
    Design,
    /// NMSE versus SNR in dB (default -5:5:20).
    SweepSnr {
        /// Comma list or start:step:stop.
        #[arg(long, allow_hyphen_values = true)]
        values: Option<String>,
    },
    /// NMSE versus pilot count (default 4,8,12,16,24,32,48).
    SweepQ {
        #[arg(long)]
        values: Option<String>,
    },
    /// NMSE versus antenna spacing d/lambda (default 1/16,1/8,1/4,1/2).
    SweepSpacing {
        #[arg(long)]
        values: Option<String>,
    },
    /// Learn the kernel from channel estimates frame by frame.
    Adaptive {
        #[arg(long, default_value_t = 200)]
        frames: usize,
        /// Fixed channels every frame's estimator is scored on.
        #[arg(long, default_value_t = 64)]
        eval_channels: usize,
    },
    /// Fit eta by maximum likelihood, or train the statistical kernel from samples.
    FitKernel,
    /// Write plan bundles with the design kernel and check that they re-import exactly.
    ExportPlan,
}

/// Resolved scenario: config file, then overrides, then flags.
pub fn load_config(cli: &Cli) -> Result<ScenarioConfig> {
    let mut raw = match &cli.config {
        Some(path) => RawConfig::load(path)?,
        None => RawConfig::default(),
    };
    for assignment in &cli.overrides {
        raw.set(assignment)?;
    }
    let mut cfg = raw.to_scenario()?;
    cfg.threads = cli.threads;
    Ok(cfg)
}

/// Output files are written into a hidden directory under the output
/// directory and moved into place only once the command has succeeded.
struct Staging {
    dir: tempfile::TempDir,
    out: PathBuf,
}

impl Staging {
    fn new(out: &Path) -> Result<Self> {
        fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
        let dir = tempfile::Builder::new()
            .prefix(".staging-")
            .tempdir_in(out)
            .with_context(|| format!("cannot write to {}", out.display()))?;
        Ok(Self {
            dir,
            out: out.to_path_buf(),
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn final_path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn commit(self) -> Result<()> {
        for entry in fs::read_dir(self.dir.path())? {
            let entry = entry?;
            let target = self.out.join(entry.file_name());
            if target.is_dir() {
                fs::remove_dir_all(&target)
                    .with_context(|| format!("cannot replace {}", target.display()))?;
            }
            fs::rename(entry.path(), &target)
                .with_context(|| format!("cannot move output to {}", target.display()))?;
        }
        Ok(())
    }
}

pub fn run(cli: &Cli, stdout: &mut dyn Write) -> Result<()> {
    let cfg = load_config(cli)?;
    let staging = Staging::new(&cli.out)?;
    let registry = SchemeRegistry::default();
    let context = || format!("scenario {}", cfg.scenario_id());
    match &cli.command {
        Command::Design => {
            design(&cfg, &registry, &staging, false, stdout).with_context(context)?
        }
        Command::ExportPlan => {
            design(&cfg, &registry, &staging, true, stdout).with_context(context)?
        }
        Command::SweepSnr { values } => {
            let v = values_or(values, &[-5.0, 0.0, 5.0, 10.0, 15.0, 20.0])?;
            sweep(&cfg, SweepAxis::Snr, &v, &registry, &staging, stdout).with_context(context)?
        }
        Command::SweepQ { values } => {
            let v = values_or(values, &[4.0, 8.0, 12.0, 16.0, 24.0, 32.0, 48.0])?;
            sweep(&cfg, SweepAxis::Pilots, &v, &registry, &staging, stdout).with_context(context)?
        }
        Command::SweepSpacing { values } => {
            let v = values_or(values, &[0.0625, 0.125, 0.25, 0.5])?;
            sweep(&cfg, SweepAxis::Spacing, &v, &registry, &staging, stdout)
                .with_context(context)?
        }
        Command::Adaptive {
            frames,
            eval_channels,
        } => adaptive(&cfg, *frames, *eval_channels, &staging, stdout).with_context(context)?,
        Command::FitKernel => fit_kernel(&cfg, &staging, stdout).with_context(context)?,
    }
    staging.commit()
}

fn values_or(values: &Option<String>, default: &[f64]) -> Result<Vec<f64>> {
    Ok(match values {
        Some(text) => parse_values(text)?,
        None => default.to_vec(),
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn design(
    cfg: &ScenarioConfig,
    registry: &SchemeRegistry,
    staging: &Staging,
    verify: bool,
    stdout: &mut dyn Write,
) -> Result<()> {
    let scenario = Scenario::prepare(cfg)?;
    let ctx = scenario.context();
    let mut table = String::from("method,pilots,n_rf,mi_bits\n");
    for name in &cfg.methods {
        let deployed =
            deploy(registry.get(name)?.as_ref(), &ctx).with_context(|| format!("method {name}"))?;
        let dir = staging.path(name);
        match &deployed.design {
            Design::Plan(plan) => write_plan(&dir, plan)?,
            Design::Hybrid { plan, .. } => write_hybrid(&dir, plan)?,
            Design::Ideal(_) if verify => bail!("method {name} has no physical plan to export"),
            Design::Ideal(w) => {
                fs::create_dir_all(&dir)?;
                densemimo::cmt::write(&dir.join("obs_matrix.cmt"), &w.obs_matrix)?;
            }
        }
        let mut note = String::new();
        if verify {
            let plan = deployed
                .design
                .plan()
                .expect("ideal designs are rejected above");
            let original = plan_information(&scenario.design_kernel, plan, scenario.noise)?;
            let restored = plan_information(
                &scenario.design_kernel,
                &read_bundle(&dir)?.observation_plan(),
                scenario.noise,
            )?;
            let diff = (original - restored).abs();
            if diff > ROUND_TRIP_TOL {
                bail!("method {name}: re-imported plan changes MI by {diff:.3e} bits");
            }
            let _ = write!(note, ", round trip {diff:.1e} bits");
        }
        let _ = writeln!(
            table,
            "{name},{},{},{:.9}",
            cfg.pilots, cfg.n_rf, deployed.mi_bits
        );
        writeln!(
            stdout,
            "{name}: {} pilots x {} chains, MI {:.4} bits{note} -> {}",
            cfg.pilots,
            cfg.n_rf,
            deployed.mi_bits,
            staging.final_path(name).display()
        )?;
    }
    if verify {
        let dir = staging.path("kernel");
        write_kernel(&dir, &scenario.design_kernel, &cfg.family)?;
        let (kernel, _) = read_kernel(&dir)?;
        let err = rel_frobenius_error(kernel.sigma_t(), scenario.design_kernel.sigma_t()).max(
            rel_frobenius_error(kernel.sigma_r(), scenario.design_kernel.sigma_r()),
        );
        if err > 1e-12 {
            bail!("re-imported kernel differs by {err:.3e}");
        }
    } else {
        write_text(&staging.path("design.csv"), &table)?;
    }
    Ok(())
}

fn sweep(
    cfg: &ScenarioConfig,
    axis: SweepAxis,
    values: &[f64],
    registry: &SchemeRegistry,
    staging: &Staging,
    stdout: &mut dyn Write,
) -> Result<()> {
    let mut io = Ok(());
    let report = run_sweep_with(cfg, axis, values, registry, |row| {
        if io.is_ok() {
            io = writeln!(
                stdout,
                "{}={} {}: NMSE {:.3} dB, MI {:.3} bits",
                row.axis, row.value, row.method, row.nmse_db, row.mi_bits
            );
        }
    })?;
    io?;
    let name = format!("sweep_{}.csv", axis.name());
    write_text(&staging.path(&name), &report.to_csv())?;
    writeln!(
        stdout,
        "{} rows -> {}",
        report.rows.len(),
        staging.final_path(&name).display()
    )?;
    Ok(())
}

fn adaptive(
    cfg: &ScenarioConfig,
    frames: usize,
    eval_channels: usize,
    staging: &Staging,
    stdout: &mut dyn Write,
) -> Result<()> {
    let options = AdaptiveOptions {
        frames,
        eval_channels,
        ..Default::default()
    };
    let report = run_adaptive(cfg, &options)?;
    write_text(&staging.path("adaptive.csv"), &report.to_csv())?;
    let last = report.frames.last().expect("at least one frame");
    writeln!(
        stdout,
        "frame {}: NMSE {:.3} dB (perfect kernel {:.3} dB), kernel error {:.4} -> {}",
        last.frame,
        last.nmse_db,
        report.perfect_nmse_db,
        last.kernel_error,
        staging.final_path("adaptive.csv").display()
    )?;
    Ok(())
}

fn fit_kernel(cfg: &ScenarioConfig, staging: &Staging, stdout: &mut dyn Write) -> Result<()> {
    let model = cfg.kernel_model()?;
    let channel = ChannelModel::from_model(&model, &cfg.family)?;
    let dir = staging.path("kernel");
    match cfg.family {
        KernelFamily::Laplace { .. } | KernelFamily::Bessel { .. } => {
            let noise = snr_to_noise(cfg.snr_db, cfg.power, channel.kernel());
            let observations = training_observations(
                &channel,
                cfg.n_rf,
                cfg.pilots,
                cfg.power,
                noise,
                cfg.training_samples,
                cfg.seed,
            )?;
            let fit = fit_eta(&cfg.family, &model, &observations, &EtaGrid::default())?;
            let mut curve = String::from("eta,log_likelihood\n");
            for (eta, ll) in &fit.curve {
                let _ = writeln!(curve, "{eta:.9},{ll:.9}");
            }
            write_text(&staging.path("eta_curve.csv"), &curve)?;
            let family = cfg.family.with_eta(fit.eta);
            write_kernel(&dir, &model.kernel(&family)?, &family)?;
            writeln!(
                stdout,
                "eta {:.4} (log-likelihood {:.3}) from {} observations -> {}",
                fit.eta,
                fit.log_likelihood,
                observations.len(),
                staging.final_path("kernel").display()
            )?;
        }
        KernelFamily::Statistical => {
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(cfg.seed, u64::MAX, 0));
            let samples: Vec<_> = (0..cfg.training_samples)
                .map(|_| channel.synthesize(&mut rng))
                .collect();
            let kernel = statistical_kernels(&samples, cfg.normalization)?;
            let err = kernel.kron_rel_error(channel.kernel());
            write_kernel(&dir, &kernel, &cfg.family)?;
            writeln!(
                stdout,
                "statistical kernel from {} samples, error {:.2} dB vs truth -> {}",
                samples.len(),
                to_db(err * err),
                staging.final_path("kernel").display()
            )?;
        }
        KernelFamily::Identity => bail!("the identity family has nothing to fit"),
    }
    Ok(())
}
