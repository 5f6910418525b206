//! Monte-Carlo evaluation: channel synthesis, pilot transmission, NMSE sweeps
//! and the adaptive kernel-training frame loop.
//!
//! Every trial draws its channel and noise from a seed derived from
//! `(master seed, sweep point, trial index)`, so results do not depend on how
//! trials are spread over worker threads. All methods at a sweep point see the
//! same channels and the same noise stream.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimator::{posterior_covariance, PilotBatch};
use crate::hybrid::HybridOptions;
use crate::icefill::ObservationPlan;
use crate::kernels::{
    adaptive_update, adaptive_update_moment, assemble_kernel, statistical_kernels, ArrayGeometry,
    CovKernel, KernelFamily, KernelModel, TraceNormalization,
};
use crate::numkit::{
    c, frobenius, identity, psd_sqrt, sample_complex_gaussian, unvectorize, vectorize, CMatrix,
    CVector,
};
use crate::schemes::{deploy, Deployed, DesignContext, SchemeRegistry, TwoDif};

/// Channel samples used to train a statistical kernel.
pub const DEFAULT_TRAINING_SAMPLES: usize = 100;

#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub n_t: usize,
    pub n_r: usize,
    pub n_rf: usize,
    pub spacing_over_lambda: f64,
    pub pilots: usize,
    pub snr_db: f64,
    pub power: f64,
    pub family: KernelFamily,
    pub coupling_tx: Option<CMatrix>,
    pub coupling_rx: Option<CMatrix>,
    pub methods: Vec<String>,
    pub trials: usize,
    pub seed: u64,
    /// Worker threads for trials; 0 picks the rayon default.
    pub threads: usize,
    pub training_samples: usize,
    pub normalization: TraceNormalization,
    pub hybrid: HybridOptions,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_t: 4,
            n_r: 64,
            n_rf: 4,
            spacing_over_lambda: 0.125,
            pilots: 48,
            snr_db: 10.0,
            power: 1.0,
            family: KernelFamily::Statistical,
            coupling_tx: None,
            coupling_rx: None,
            methods: vec!["2dif".into()],
            trials: 1000,
            seed: 1,
            threads: 0,
            training_samples: DEFAULT_TRAINING_SAMPLES,
            normalization: TraceNormalization::None,
            hybrid: HybridOptions::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.n_t == 0 || self.n_r == 0 || self.n_rf == 0 || self.pilots == 0 {
            return bad("n_t, n_r, n_rf and q must be positive".into());
        }
        if self.n_rf > self.n_r {
            return Err(Error::TooManyChains {
                n_rf: self.n_rf,
                n_r: self.n_r,
            });
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if !(self.power > 0.0 && self.power.is_finite()) {
            return bad(format!("power must be positive, got {}", self.power));
        }
        if !self.snr_db.is_finite() {
            return bad("snr_db must be finite".into());
        }
        if let Some(eta) = self.family.eta() {
            if !(eta > 0.0 && eta.is_finite()) {
                return bad(format!("eta must be positive, got {eta}"));
            }
        }
        if self.training_samples == 0 {
            return bad("at least one training sample is required".into());
        }
        for (m, n, side) in [
            (&self.coupling_tx, self.n_t, "tx"),
            (&self.coupling_rx, self.n_r, "rx"),
        ] {
            if let Some(m) = m {
                if m.shape() != (n, n) {
                    return Err(Error::DimensionMismatch(format!(
                        "coupling_{side} is {}x{}, expected {n}x{n}",
                        m.nrows(),
                        m.ncols()
                    )));
                }
            }
        }
        ArrayGeometry::new(self.n_t, self.spacing_over_lambda)?;
        Ok(())
    }

    pub fn kernel_model(&self) -> Result<KernelModel> {
        let tx = ArrayGeometry::new(self.n_t, self.spacing_over_lambda)?;
        let rx = ArrayGeometry::new(self.n_r, self.spacing_over_lambda)?;
        Ok(KernelModel {
            coupling_tx: self
                .coupling_tx
                .clone()
                .unwrap_or_else(|| identity(self.n_t)),
            coupling_rx: self
                .coupling_rx
                .clone()
                .unwrap_or_else(|| identity(self.n_r)),
            tx,
            rx,
        })
    }

    /// Short identifier used in reports.
    pub fn scenario_id(&self) -> String {
        format!(
            "{}-{}x{}-rf{}",
            self.family.name(),
            self.n_t,
            self.n_r,
            self.n_rf
        )
    }
}

/// Correlated Rayleigh channel `H = C_rx^{1/2} R_rx^{1/2} H_iid R_tx^{1/2} C_tx^{1/2}`.
#[derive(Debug, Clone)]
pub struct ChannelModel {
    rx_factor: CMatrix,
    tx_factor: CMatrix,
    kernel: CovKernel,
}

impl ChannelModel {
    pub fn new(r_tx: &CMatrix, c_tx: &CMatrix, r_rx: &CMatrix, c_rx: &CMatrix) -> Result<Self> {
        let kernel = assemble_kernel(r_tx, c_tx, r_rx, c_rx)?;
        Ok(Self {
            rx_factor: psd_sqrt(c_rx)? * psd_sqrt(r_rx)?,
            tx_factor: psd_sqrt(r_tx)? * psd_sqrt(c_tx)?,
            kernel,
        })
    }

    pub fn from_model(model: &KernelModel, family: &KernelFamily) -> Result<Self> {
        let (r_tx, r_rx) = model.correlations(family)?;
        Self::new(&r_tx, &model.coupling_tx, &r_rx, &model.coupling_rx)
    }

    /// The covariance `Σ_T ⊗ Σ_R` of `vec(H)`.
    pub fn kernel(&self) -> &CovKernel {
        &self.kernel
    }

    pub fn synthesize<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> CMatrix {
        let iid = sample_complex_gaussian(self.rx_factor.ncols(), self.tx_factor.nrows(), rng);
        &self.rx_factor * iid * &self.tx_factor
    }
}

pub fn synthesize_channel<R: rand::Rng + ?Sized>(model: &ChannelModel, rng: &mut R) -> CMatrix {
    model.synthesize(rng)
}

/// `σ² = P·Tr(Σ_T)·Tr(Σ_R)/10^(SNR/10)`.
pub fn snr_to_noise(snr_db: f64, power: f64, kernel: &CovKernel) -> f64 {
    power * kernel.energy() / 10f64.powf(snr_db / 10.0)
}

/// Sends every pilot of `plan` through `h` with fresh noise:
/// `y_q = W_q^H H v_q + W_q^H z_q`.
pub fn transmit<R: rand::Rng + ?Sized>(
    plan: &ObservationPlan,
    h: &CMatrix,
    noise: f64,
    rng: &mut R,
) -> PilotBatch {
    let mut y = CVector::zeros(plan.n_obs());
    let mut row = 0;
    for (v, w) in plan.precoders.iter().zip(&plan.combiners) {
        let mut rx = h * v;
        if noise > 0.0 {
            rx += sample_complex_gaussian(w.nrows(), 1, rng).column(0) * c(noise.sqrt(), 0.0);
        }
        let yq = w.adjoint() * rx;
        y.rows_mut(row, w.ncols()).copy_from(&yq);
        row += w.ncols();
    }
    PilotBatch {
        y,
        x: plan.obs_matrix(),
        xi: plan.noise_shape().scale(noise),
    }
}

/// Counter-based seed for trial `trial` at sweep point `point`.
pub fn trial_seed(master: u64, point: u64, trial: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    mix(mix(mix(master) ^ point) ^ trial)
}

/// Ground truth and receiver-side kernel for one configuration.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub channel: ChannelModel,
    /// Kernel used for designs and estimators.
    pub design_kernel: CovKernel,
    pub noise: f64,
}

impl Scenario {
    /// Builds the channel model for the configured family. Artificial families
    /// are their own ground truth; the statistical family draws its truth from
    /// the dipole-scattering correlation and trains the design kernel on
    /// `training_samples` channels.
    pub fn prepare(config: &ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let model = config.kernel_model()?;
        let channel = ChannelModel::from_model(&model, &config.family)?;
        let design_kernel = match config.family {
            KernelFamily::Statistical => {
                let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(config.seed, u64::MAX, 0));
                let samples: Vec<CMatrix> = (0..config.training_samples)
                    .map(|_| channel.synthesize(&mut rng))
                    .collect();
                statistical_kernels(&samples, config.normalization)?
            }
            _ => channel.kernel().clone(),
        };
        let noise = snr_to_noise(config.snr_db, config.power, channel.kernel());
        Ok(Self {
            config: config.clone(),
            channel,
            design_kernel,
            noise,
        })
    }

    pub fn context(&self) -> DesignContext<'_> {
        DesignContext {
            kernel: &self.design_kernel,
            n_rf: self.config.n_rf,
            pilots: self.config.pilots,
            power: self.config.power,
            noise: self.noise,
            seed: self.config.seed,
            hybrid: self.config.hybrid,
        }
    }

    pub fn deploy_all(&self, registry: &SchemeRegistry) -> Result<Vec<Deployed>> {
        let ctx = self.context();
        self.config
            .methods
            .iter()
            .map(|m| {
                let scheme = registry.get(m)?;
                deploy(scheme.as_ref(), &ctx).map_err(|e| contextualise(e, &self.config, m))
            })
            .collect()
    }
}

fn contextualise(e: Error, config: &ScenarioConfig, method: &str) -> Error {
    match e {
        Error::InvalidArgument(m) => {
            Error::InvalidArgument(format!("{} / {method}: {m}", config.scenario_id()))
        }
        other => other,
    }
}

fn thread_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))
}

/// Per-method mean of `‖h − ĥ‖²/‖h‖²` over `trials` shared channel draws.
pub fn monte_carlo_nmse(
    channel: &ChannelModel,
    deployed: &[Deployed],
    noise: f64,
    trials: usize,
    seed: u64,
    point: u64,
    threads: usize,
) -> Result<Vec<f64>> {
    let pool = thread_pool(threads)?;
    let per_trial: Vec<Vec<f64>> = pool.install(|| {
        (0..trials)
            .into_par_iter()
            .map(|t| {
                let s = trial_seed(seed, point, t as u64);
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                let h = vectorize(&channel.synthesize(&mut rng));
                let energy = h.norm_squared();
                deployed
                    .iter()
                    .map(|d| {
                        let mut noise_rng = ChaCha8Rng::seed_from_u64(s ^ 0x05EE_D0FA_015E);
                        let y = d.observe(&h, noise, &mut noise_rng);
                        (d.estimate(&y) - &h).norm_squared() / energy
                    })
                    .collect()
            })
            .collect()
    });
    let mut sums = vec![0.0; deployed.len()];
    for row in &per_trial {
        for (s, r) in sums.iter_mut().zip(row) {
            *s += r;
        }
    }
    Ok(sums.into_iter().map(|s| s / trials as f64).collect())
}

pub fn to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Snr,
    Pilots,
    Spacing,
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::Snr => "snr_db",
            SweepAxis::Pilots => "q",
            SweepAxis::Spacing => "spacing_over_lambda",
        }
    }

    fn apply(&self, config: &mut ScenarioConfig, value: f64) -> Result<()> {
        match self {
            SweepAxis::Snr => config.snr_db = value,
            SweepAxis::Spacing => config.spacing_over_lambda = value,
            SweepAxis::Pilots => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "pilot count must be a positive integer, got {value}"
                    )));
                }
                config.pilots = value as usize;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub scenario: String,
    pub method: String,
    pub axis: String,
    pub value: f64,
    pub nmse_db: f64,
    pub mi_bits: f64,
    pub trials: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct NmseReport {
    pub rows: Vec<ReportRow>,
}

pub const CSV_HEADER: &str = "scenario,method,axis,value,nmse_db,mi_bits,trials,seed";

impl NmseReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{:.6},{:.6},{},{}",
                r.scenario, r.method, r.axis, r.value, r.nmse_db, r.mi_bits, r.trials, r.seed
            );
        }
        out
    }

    /// Rows of one method in sweep order.
    pub fn method(&self, name: &str) -> Vec<&ReportRow> {
        self.rows.iter().filter(|r| r.method == name).collect()
    }
}

/// Re-designs every method at each sweep value and averages NMSE over
/// `config.trials` channels. `on_point` sees each finished row.
pub fn run_sweep_with(
    config: &ScenarioConfig,
    axis: SweepAxis,
    values: &[f64],
    registry: &SchemeRegistry,
    mut on_point: impl FnMut(&ReportRow),
) -> Result<NmseReport> {
    config.validate()?;
    let mut report = NmseReport::default();
    let mut shared: Option<Scenario> = None;
    for (point, &value) in values.iter().enumerate() {
        let mut cfg = config.clone();
        axis.apply(&mut cfg, value)?;
        // Only the spacing axis changes the channel model.
        let scenario = match (&shared, axis) {
            (Some(base), SweepAxis::Snr | SweepAxis::Pilots) => {
                cfg.validate()?;
                Scenario {
                    noise: snr_to_noise(cfg.snr_db, cfg.power, base.channel.kernel()),
                    config: cfg.clone(),
                    channel: base.channel.clone(),
                    design_kernel: base.design_kernel.clone(),
                }
            }
            _ => Scenario::prepare(&cfg)?,
        };
        let deployed = scenario.deploy_all(registry)?;
        let nmse = monte_carlo_nmse(
            &scenario.channel,
            &deployed,
            scenario.noise,
            cfg.trials,
            cfg.seed,
            point as u64,
            cfg.threads,
        )?;
        for (d, m) in deployed.iter().zip(nmse) {
            let row = ReportRow {
                scenario: cfg.scenario_id(),
                method: d.method.clone(),
                axis: axis.name().to_string(),
                value,
                nmse_db: to_db(m),
                mi_bits: d.mi_bits,
                trials: cfg.trials,
                seed: cfg.seed,
            };
            on_point(&row);
            report.rows.push(row);
        }
        shared.get_or_insert(scenario);
    }
    Ok(report)
}

pub fn run_sweep(
    config: &ScenarioConfig,
    axis: SweepAxis,
    values: &[f64],
    registry: &SchemeRegistry,
) -> Result<NmseReport> {
    run_sweep_with(config, axis, values, registry, |_| {})
}

/// How the frame loop weights the initial identity kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AdaptiveSchedule {
    /// Frame `t` is passed to the update as `t`, so the identity prior gets
    /// weight zero at the first frame.
    ///
    /// The first estimate then fixes the column space of `Σ_R` for good:
    /// later LMMSE estimates lie in the range of the current kernel.
    Literal,
    /// The identity prior counts as one pseudo-frame (frame `t` is passed as
    /// `t + 1`), which keeps every kernel full rank.
    #[default]
    PriorAsFrame,
}

#[derive(Debug, Clone, Copy)]
pub struct AdaptiveOptions {
    pub frames: usize,
    /// Fixed channels on which every frame's estimator is scored.
    pub eval_channels: usize,
    pub schedule: AdaptiveSchedule,
    /// Add the posterior covariance to `ĥĥ^H` before averaging. Without it the
    /// learned kernel loses the energy the estimator shrinks away each frame.
    pub posterior_correction: bool,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        Self {
            frames: 200,
            eval_channels: 64,
            schedule: AdaptiveSchedule::default(),
            posterior_correction: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameRecord {
    pub frame: usize,
    /// NMSE of the estimator designed from the kernel learned before this frame.
    pub nmse_db: f64,
    /// Relative Frobenius error of the kernel learned after this frame.
    pub kernel_error: f64,
}

#[derive(Debug, Clone)]
pub struct AdaptiveReport {
    pub frames: Vec<FrameRecord>,
    /// NMSE with the true kernel on the same evaluation set.
    pub perfect_nmse_db: f64,
}

impl AdaptiveReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("frame,nmse_db,kernel_error\n");
        for f in &self.frames {
            let _ = writeln!(out, "{},{:.6},{:.6}", f.frame, f.nmse_db, f.kernel_error);
        }
        out
    }
}

/// Frame loop: design with the current kernel, estimate the frame's channel,
/// fold the estimate into the kernel.
///
/// The configured family's physical model is the ground truth; the receiver
/// starts from identity kernels.
pub fn run_adaptive(config: &ScenarioConfig, options: &AdaptiveOptions) -> Result<AdaptiveReport> {
    config.validate()?;
    if options.frames == 0 || options.eval_channels == 0 {
        return Err(Error::InvalidArgument(
            "frames and evaluation channels must be positive".into(),
        ));
    }
    let model = config.kernel_model()?;
    let channel = ChannelModel::from_model(&model, &config.family)?;
    let truth = channel.kernel().clone();
    let noise = snr_to_noise(config.snr_db, config.power, &truth);
    fn context<'a>(
        config: &ScenarioConfig,
        kernel: &'a CovKernel,
        noise: f64,
    ) -> DesignContext<'a> {
        DesignContext {
            kernel,
            n_rf: config.n_rf,
            pilots: config.pilots,
            power: config.power,
            noise,
            seed: config.seed,
            hybrid: config.hybrid,
        }
    }
    let score = |kernel: &CovKernel| -> Result<f64> {
        let d = deploy(&TwoDif, &context(config, kernel, noise))?;
        monte_carlo_nmse(
            &channel,
            std::slice::from_ref(&d),
            noise,
            options.eval_channels,
            config.seed,
            0,
            config.threads,
        )
        .map(|v| to_db(v[0]))
    };
    let perfect_nmse_db = score(&truth)?;
    let mut kernel = CovKernel::identity(config.n_t, config.n_r);
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(config.seed, 1, u64::MAX));
    let mut frames = Vec::with_capacity(options.frames);
    for frame in 1..=options.frames {
        let d = deploy(&TwoDif, &context(config, &kernel, noise))?;
        let nmse = monte_carlo_nmse(
            &channel,
            std::slice::from_ref(&d),
            noise,
            options.eval_channels,
            config.seed,
            0,
            config.threads,
        )?[0];
        let h = vectorize(&channel.synthesize(&mut rng));
        let y = d.observe(&h, noise, &mut rng);
        let h_hat = d.estimate(&y);
        let weight = match options.schedule {
            AdaptiveSchedule::Literal => frame,
            AdaptiveSchedule::PriorAsFrame => frame + 1,
        };
        kernel = if options.posterior_correction {
            let xi = crate::numkit::block_diag(
                &d.noise_maps
                    .iter()
                    .map(|w| w.adjoint() * w)
                    .collect::<Vec<_>>(),
            )
            .scale(noise);
            let moment =
                &h_hat * h_hat.adjoint() + posterior_covariance(&kernel, &d.obs_matrix, &xi)?;
            adaptive_update_moment(&kernel, &moment, weight)?
        } else {
            adaptive_update(
                &kernel,
                &unvectorize(&h_hat, config.n_r, config.n_t),
                weight,
            )?
        };
        frames.push(FrameRecord {
            frame,
            nmse_db: to_db(nmse),
            kernel_error: kernel.kron_rel_error(&truth),
        });
    }
    Ok(AdaptiveReport {
        frames,
        perfect_nmse_db,
    })
}

/// Observations for likelihood-based kernel fitting: channels from `channel`
/// sensed through random feasible plans.
pub fn training_observations(
    channel: &ChannelModel,
    n_rf: usize,
    pilots: usize,
    power: f64,
    noise: f64,
    count: usize,
    seed: u64,
) -> Result<Vec<crate::kernels::TrainingObservation>> {
    let (n_t, n_r) = (channel.kernel().n_t(), channel.kernel().n_r());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let plan = crate::baselines::random_plan_from(&mut rng, n_t, n_r, n_rf, pilots, power)?;
            let h = channel.synthesize(&mut rng);
            let batch = transmit(&plan, &h, noise, &mut rng);
            Ok(crate::kernels::TrainingObservation {
                y: batch.y,
                x: batch.x,
                xi: batch.xi,
            })
        })
        .collect()
}

/// Relative Frobenius norm of the difference between two channels.
pub fn channel_error(h: &CMatrix, h_hat: &CMatrix) -> f64 {
    frobenius(&(h - h_hat)) / frobenius(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::kron;

    #[test]
    fn trial_seeds_are_distinct() {
        let mut seen = std::collections::HashSet::new();
        for p in 0..10 {
            for t in 0..100 {
                assert!(seen.insert(trial_seed(7, p, t)));
            }
        }
        assert_ne!(trial_seed(1, 0, 0), trial_seed(2, 0, 0));
    }

    #[test]
    fn snr_arithmetic() {
        let k = CovKernel::identity(1, 1);
        assert_eq!(snr_to_noise(0.0, 1.0, &k), 1.0);
        assert!((snr_to_noise(10.0, 1.0, &k) - 0.1).abs() < 1e-15);
        let k = CovKernel::identity(4, 64);
        assert!((snr_to_noise(10.0, 2.0, &k) - 256.0 * 2.0 / 10.0).abs() < 1e-12);
    }

    #[test]
    fn identity_factors_give_iid_channel() {
        let ch = ChannelModel::new(&identity(2), &identity(2), &identity(3), &identity(3)).unwrap();
        let mut a = ChaCha8Rng::seed_from_u64(4);
        let mut b = ChaCha8Rng::seed_from_u64(4);
        assert!(
            channel_error(
                &sample_complex_gaussian(3, 2, &mut b),
                &ch.synthesize(&mut a)
            ) < 1e-15
        );
    }

    #[test]
    fn noiseless_transmit_is_exact() {
        let plan = crate::baselines::design_random_plan(2, 4, 2, 3, 1.0, 9).unwrap();
        let h = crate::numkit::sample_complex_gaussian_seeded(4, 2, 1);
        let batch = transmit(&plan, &h, 0.0, &mut ChaCha8Rng::seed_from_u64(0));
        assert!((batch.x.adjoint() * vectorize(&h) - &batch.y).norm() < 1e-12);
        assert!((batch.xi.norm()) == 0.0);
    }

    #[test]
    fn default_config_is_the_reference_scale() {
        let c = ScenarioConfig::default();
        assert_eq!((c.n_t, c.n_r, c.n_rf, c.pilots), (4, 64, 4, 48));
        let bad = ScenarioConfig {
            n_rf: 9,
            n_r: 8,
            ..Default::default()
        };
        assert!(matches!(bad.validate(), Err(Error::TooManyChains { .. })));
    }

    #[test]
    fn channel_kernel_is_kronecker_of_factors() {
        let g = ArrayGeometry::new(2, 0.25).unwrap();
        let model = KernelModel::uncoupled(g, ArrayGeometry::new(3, 0.25).unwrap());
        let ch = ChannelModel::from_model(&model, &KernelFamily::Laplace { eta: 2.0 }).unwrap();
        let full = kron(ch.kernel().sigma_t(), ch.kernel().sigma_r());
        assert!(crate::numkit::rel_frobenius_error(&full, &ch.kernel().full()) < 1e-15);
    }
}
