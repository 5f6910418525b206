//! Transmit/receive covariance kernels `Σ_T`, `Σ_R` and their training.
//!
//! The vectorised channel `h = vec(H)` has covariance `Σ_T ⊗ Σ_R`; the product
//! is never formed unless [`CovKernel::full`] is called explicitly.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numkit::{
    c, clip_psd, frobenius, herm_eig, hermitian_part, identity, kron, psd_sqrt, trace_re, CMatrix,
    CVector, HermitianEvd, PSD_REJECT,
};

/// Kronecker-structured channel covariance with cached factor eigendecompositions.
#[derive(Debug, Clone)]
pub struct CovKernel {
    sigma_t: CMatrix,
    sigma_r: CMatrix,
    evd_t: HermitianEvd,
    evd_r: HermitianEvd,
}

/// Above this many channel coefficients `Σ_h` is applied through its factors only.
pub const MATERIALIZE_LIMIT: usize = 4096;

impl CovKernel {
    /// Builds a kernel from its two factors.
    ///
    /// Factors are symmetrised; eigenvalues that are negative only through
    /// rounding are clipped to zero so that the cached EVDs reproduce the
    /// stored factors.
    pub fn new(sigma_t: CMatrix, sigma_r: CMatrix) -> Result<Self> {
        let (sigma_t, evd_t) = Self::prepare_factor(sigma_t)?;
        let (sigma_r, evd_r) = Self::prepare_factor(sigma_r)?;
        Ok(Self {
            sigma_t,
            sigma_r,
            evd_t,
            evd_r,
        })
    }

    fn prepare_factor(m: CMatrix) -> Result<(CMatrix, HermitianEvd)> {
        let mut evd = herm_eig(&m)?;
        let largest = evd.largest().max(0.0);
        let smallest = evd.eigenvalues.last().copied().unwrap_or(0.0);
        if smallest < -PSD_REJECT * largest {
            return Err(Error::NotPsd {
                eigenvalue: smallest,
                largest,
            });
        }
        if smallest < 0.0 {
            evd.eigenvalues.iter_mut().for_each(|l| *l = l.max(0.0));
            let rebuilt = evd.reconstruct();
            return Ok((rebuilt, evd));
        }
        Ok((hermitian_part(&m), evd))
    }

    pub fn identity(n_t: usize, n_r: usize) -> Self {
        Self::new(identity(n_t), identity(n_r)).expect("identity is a valid kernel")
    }

    pub fn sigma_t(&self) -> &CMatrix {
        &self.sigma_t
    }

    pub fn sigma_r(&self) -> &CMatrix {
        &self.sigma_r
    }

    pub fn evd_t(&self) -> &HermitianEvd {
        &self.evd_t
    }

    pub fn evd_r(&self) -> &HermitianEvd {
        &self.evd_r
    }

    pub fn n_t(&self) -> usize {
        self.sigma_t.nrows()
    }

    pub fn n_r(&self) -> usize {
        self.sigma_r.nrows()
    }

    pub fn dim(&self) -> usize {
        self.n_t() * self.n_r()
    }

    /// `Tr(Σ_T)·Tr(Σ_R) = E‖h‖²`.
    pub fn energy(&self) -> f64 {
        trace_re(&self.sigma_t) * trace_re(&self.sigma_r)
    }

    /// The full `Σ_T ⊗ Σ_R` matrix.
    pub fn full(&self) -> CMatrix {
        kron(&self.sigma_t, &self.sigma_r)
    }

    /// `Σ_h · x` for every column of `x`, using `(A ⊗ B) vec(X) = vec(B X A^T)`.
    pub fn apply(&self, x: &CMatrix) -> CMatrix {
        let (n_t, n_r) = (self.n_t(), self.n_r());
        assert_eq!(x.nrows(), n_t * n_r, "operand has wrong row count");
        if self.dim() <= MATERIALIZE_LIMIT && x.ncols() >= n_t.min(n_r) {
            return self.full() * x;
        }
        let st_t = self.sigma_t.transpose();
        let mut out = CMatrix::zeros(x.nrows(), x.ncols());
        for j in 0..x.ncols() {
            let col = CMatrix::from_column_slice(n_r, n_t, x.column(j).as_slice());
            let prod = &self.sigma_r * col * &st_t;
            out.column_mut(j).copy_from_slice(prod.as_slice());
        }
        out
    }

    /// The eigenvector `a_{n_t} ⊗ b_{n_r}` of `Σ_h`.
    pub fn joint_eigenvector(&self, n_t: usize, n_r: usize) -> CVector {
        let a = self.evd_t.basis.column(n_t).into_owned();
        let b = self.evd_r.basis.column(n_r).into_owned();
        let k = kron(
            &CMatrix::from_column_slice(a.len(), 1, a.as_slice()),
            &CMatrix::from_column_slice(b.len(), 1, b.as_slice()),
        );
        CVector::from_column_slice(k.as_slice())
    }

    /// Relative Frobenius distance between `self` and `truth` as full Kronecker kernels.
    ///
    /// Evaluated through traces so the Kronecker products are never formed;
    /// the expansion cancels near zero, so values below about 1e-8 are noise.
    pub fn kron_rel_error(&self, truth: &CovKernel) -> f64 {
        let fro2 = |m: &CMatrix| frobenius(m).powi(2);
        let inner = |a: &CMatrix, b: &CMatrix| -> Complex64 {
            a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
        };
        let est = fro2(&self.sigma_t) * fro2(&self.sigma_r);
        let tru = fro2(&truth.sigma_t) * fro2(&truth.sigma_r);
        let cross = inner(&self.sigma_t, &truth.sigma_t) * inner(&self.sigma_r, &truth.sigma_r);
        let diff2 = (est + tru - 2.0 * cross.re).max(0.0);
        if tru > 0.0 {
            (diff2 / tru).sqrt()
        } else {
            diff2.sqrt()
        }
    }
}

/// Centred uniform linear array.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayGeometry {
    pub n_antennas: usize,
    /// Element spacing in wavelengths, `d/λ`.
    pub spacing_over_lambda: f64,
}

impl ArrayGeometry {
    pub fn new(n_antennas: usize, spacing_over_lambda: f64) -> Result<Self> {
        if n_antennas == 0 {
            return Err(Error::InvalidArgument(
                "array needs at least one antenna".into(),
            ));
        }
        if !(spacing_over_lambda > 0.0 && spacing_over_lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "antenna spacing must be positive, got {spacing_over_lambda}"
            )));
        }
        Ok(Self {
            n_antennas,
            spacing_over_lambda,
        })
    }

    /// Element positions along the array axis, in wavelengths, symmetric about zero.
    pub fn positions(&self) -> Vec<f64> {
        let centre = (self.n_antennas as f64 - 1.0) / 2.0;
        (0..self.n_antennas)
            .map(|m| (m as f64 - centre) * self.spacing_over_lambda)
            .collect()
    }

    fn map_offsets(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let n = self.n_antennas;
        CMatrix::from_fn(n, n, |m, k| {
            let offset = (m as f64 - k as f64).abs() * self.spacing_over_lambda;
            c(f(offset), 0.0)
        })
    }
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            let p_prev = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - p_prev) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Scattering density `(1.67 / 2π)·cos⁴θ` of half-wavelength dipoles.
pub fn dipole_scattering(_phi: f64, theta: f64) -> f64 {
    1.67 / (2.0 * PI) * theta.cos().powi(4)
}

/// Spatial correlation matrix of a ULA for an angular scattering density.
///
/// The array lies on the y axis, so antenna offsets `Δ` (in wavelengths) see the
/// phase `2π·Δ·cosθ·sinφ`. Both angles are integrated over `[-π/2, π/2]` with a
/// tensor Gauss-Legendre rule of `quad_points` nodes per axis.
pub fn spatial_correlation(
    geom: &ArrayGeometry,
    scatter: impl Fn(f64, f64) -> f64,
    quad_points: usize,
) -> Result<CMatrix> {
    if quad_points < 16 {
        return Err(Error::InvalidArgument(format!(
            "at least 16 quadrature points per axis are required, got {quad_points}"
        )));
    }
    let (x, w) = gauss_legendre(quad_points);
    let half = PI / 2.0;
    let mut grid = Vec::with_capacity(quad_points * quad_points);
    for (xp, wp) in x.iter().zip(&w) {
        let phi = half * xp;
        for (xt, wt) in x.iter().zip(&w) {
            let theta = half * xt;
            let weight = wp * wt * half * half * scatter(phi, theta);
            grid.push((weight, 2.0 * PI * theta.cos() * phi.sin()));
        }
    }
    let pos = geom.positions();
    let n = geom.n_antennas;
    let mut r = CMatrix::zeros(n, n);
    for m in 0..n {
        for k in 0..n {
            let delta = pos[m] - pos[k];
            let z: Complex64 = grid
                .iter()
                .map(|&(wt, kk)| Complex64::from_polar(wt, kk * delta))
                .sum();
            r[(m, k)] = z;
        }
    }
    let defect = frobenius(&(&r - r.adjoint()));
    let norm = frobenius(&r);
    if defect > 1e-6 * norm.max(1.0) {
        return Err(Error::QuadratureUnstable { defect });
    }
    clip_psd(&hermitian_part(&r), f64::INFINITY)
}

/// Laplace kernel `exp(-η²·(d/λ)²·(m−n)²)`.
pub fn laplace_kernel(geom: &ArrayGeometry, eta: f64) -> CMatrix {
    geom.map_offsets(|off| (-(eta * off).powi(2)).exp())
}

/// Bessel kernel `J₀(η·(d/λ)·|m−n|)`; may be indefinite, see [`KernelFamily::factor`].
pub fn bessel_kernel(geom: &ArrayGeometry, eta: f64) -> CMatrix {
    geom.map_offsets(|off| libm::j0(eta * off))
}

/// Applies mutual coupling to spatial correlations:
/// `Σ_T = (C_tx^{1/2})^T R_tx^* (C_tx^{1/2})^*` and `Σ_R = C_rx^{1/2} R_rx (C_rx^{1/2})^H`.
pub fn assemble_kernel(
    r_tx: &CMatrix,
    c_tx: &CMatrix,
    r_rx: &CMatrix,
    c_rx: &CMatrix,
) -> Result<CovKernel> {
    if r_tx.shape() != c_tx.shape() || r_rx.shape() != c_rx.shape() {
        return Err(Error::DimensionMismatch(format!(
            "R_tx {:?} / C_tx {:?}, R_rx {:?} / C_rx {:?}",
            r_tx.shape(),
            c_tx.shape(),
            r_rx.shape(),
            c_rx.shape()
        )));
    }
    let ct = psd_sqrt(c_tx)?;
    let cr = psd_sqrt(c_rx)?;
    let sigma_t = ct.transpose() * r_tx.conjugate() * ct.conjugate();
    let sigma_r = &cr * r_rx * cr.adjoint();
    CovKernel::new(sigma_t, sigma_r)
}

/// Kernel family used to model or train the channel prior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelFamily {
    /// Sample-trained factors (the physical channel model is the ground truth).
    Statistical,
    Laplace {
        eta: f64,
    },
    Bessel {
        eta: f64,
    },
    Identity,
}

impl KernelFamily {
    pub fn name(&self) -> &'static str {
        match self {
            KernelFamily::Statistical => "statistical",
            KernelFamily::Laplace { .. } => "laplace",
            KernelFamily::Bessel { .. } => "bessel",
            KernelFamily::Identity => "identity",
        }
    }

    pub fn eta(&self) -> Option<f64> {
        match *self {
            KernelFamily::Laplace { eta } | KernelFamily::Bessel { eta } => Some(eta),
            _ => None,
        }
    }

    /// Same family with a different hyperparameter; a no-op for families without one.
    pub fn with_eta(&self, eta: f64) -> Self {
        match self {
            KernelFamily::Laplace { .. } => KernelFamily::Laplace { eta },
            KernelFamily::Bessel { .. } => KernelFamily::Bessel { eta },
            other => *other,
        }
    }

    /// Spatial correlation matrix of this family for one array.
    ///
    /// `Statistical` returns the dipole-scattering correlation, which is the
    /// channel model statistical kernels are trained on. Bessel matrices have
    /// their negative eigenvalues clipped to zero.
    pub fn factor(&self, geom: &ArrayGeometry) -> Result<CMatrix> {
        match *self {
            KernelFamily::Laplace { eta } => Ok(laplace_kernel(geom, eta)),
            KernelFamily::Bessel { eta } => clip_psd(&bessel_kernel(geom, eta), f64::INFINITY),
            KernelFamily::Identity => Ok(identity(geom.n_antennas)),
            KernelFamily::Statistical => spatial_correlation(geom, dipole_scattering, 64),
        }
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.eta() {
            Some(eta) => write!(f, "{}(eta={eta})", self.name()),
            None => f.write_str(self.name()),
        }
    }
}

impl FromStr for KernelFamily {
    type Err = Error;

    /// Parses a family name; hyperparameters default to 1 and are set separately.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "statistical" => Ok(KernelFamily::Statistical),
            "laplace" => Ok(KernelFamily::Laplace { eta: 1.0 }),
            "bessel" => Ok(KernelFamily::Bessel { eta: 1.0 }),
            "identity" => Ok(KernelFamily::Identity),
            other => Err(Error::InvalidArgument(format!(
                "unknown kernel family `{other}`"
            ))),
        }
    }
}

/// Transmit/receive arrays plus coupling matrices: everything needed to turn a
/// family and hyperparameter into a [`CovKernel`].
#[derive(Debug, Clone)]
pub struct KernelModel {
    pub tx: ArrayGeometry,
    pub rx: ArrayGeometry,
    pub coupling_tx: CMatrix,
    pub coupling_rx: CMatrix,
}

impl KernelModel {
    pub fn uncoupled(tx: ArrayGeometry, rx: ArrayGeometry) -> Self {
        Self {
            coupling_tx: identity(tx.n_antennas),
            coupling_rx: identity(rx.n_antennas),
            tx,
            rx,
        }
    }

    /// Spatial correlations `(R_tx, R_rx)` of `family`.
    pub fn correlations(&self, family: &KernelFamily) -> Result<(CMatrix, CMatrix)> {
        Ok((family.factor(&self.tx)?, family.factor(&self.rx)?))
    }

    pub fn kernel(&self, family: &KernelFamily) -> Result<CovKernel> {
        let (r_tx, r_rx) = self.correlations(family)?;
        assemble_kernel(&r_tx, &self.coupling_tx, &r_rx, &self.coupling_rx)
    }
}

/// Rescaling applied to sample-trained factors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TraceNormalization {
    /// Plain row/column averages.
    #[default]
    None,
    /// Rescale `Σ_R` so that `Tr(Σ_T)·Tr(Σ_R)` equals the mean sample energy `E‖H‖_F²`.
    MatchEnergy,
}

fn transmit_outer(h: &CMatrix) -> CMatrix {
    // Σ_n H(n,:)^T H(n,:)^* = (H^H H)^*
    (h.adjoint() * h).conjugate()
}

fn receive_outer(h: &CMatrix) -> CMatrix {
    h * h.adjoint()
}

/// Kronecker factors estimated from channel samples by row/column averaging.
pub fn statistical_kernels(
    samples: &[CMatrix],
    normalization: TraceNormalization,
) -> Result<CovKernel> {
    let first = samples.first().ok_or(Error::EmptySampleSet)?;
    let (n_r, n_t) = first.shape();
    let mut sigma_t = CMatrix::zeros(n_t, n_t);
    let mut sigma_r = CMatrix::zeros(n_r, n_r);
    let mut energy = 0.0;
    for h in samples {
        if h.shape() != (n_r, n_t) {
            return Err(Error::DimensionMismatch(format!(
                "sample of shape {:?}, expected {:?}",
                h.shape(),
                (n_r, n_t)
            )));
        }
        sigma_t += transmit_outer(h);
        sigma_r += receive_outer(h);
        energy += frobenius(h).powi(2);
    }
    let count = samples.len() as f64;
    sigma_t /= c(count * n_r as f64, 0.0);
    sigma_r /= c(count * n_t as f64, 0.0);
    if normalization == TraceNormalization::MatchEnergy {
        let prod = trace_re(&sigma_t) * trace_re(&sigma_r);
        if prod > 0.0 {
            sigma_r *= c(energy / count / prod, 0.0);
        }
    }
    CovKernel::new(sigma_t, sigma_r)
}

/// Running-average kernel update with the channel estimate of frame `t_f ≥ 1`.
pub fn adaptive_update(prior: &CovKernel, h_hat: &CMatrix, frame: usize) -> Result<CovKernel> {
    if frame == 0 {
        return Err(Error::InvalidArgument("frame index starts at 1".into()));
    }
    if h_hat.shape() != (prior.n_r(), prior.n_t()) {
        return Err(Error::DimensionMismatch(format!(
            "estimate {:?} vs kernel {}x{}",
            h_hat.shape(),
            prior.n_r(),
            prior.n_t()
        )));
    }
    let t = frame as f64;
    let keep = c((t - 1.0) / t, 0.0);
    let sigma_t = prior.sigma_t() * keep + transmit_outer(h_hat) / c(t * prior.n_r() as f64, 0.0);
    let sigma_r = prior.sigma_r() * keep + receive_outer(h_hat) / c(t * prior.n_t() as f64, 0.0);
    CovKernel::new(sigma_t, sigma_r)
}

/// Running-average update driven by a second moment `E[h h^H]` of `vec(H)`
/// instead of a single estimate; `moment` is `N_T N_R` square.
///
/// With `moment = ĥĥ^H` this is [`adaptive_update`]; adding the posterior
/// covariance gives the expectation-maximisation form.
pub fn adaptive_update_moment(
    prior: &CovKernel,
    moment: &CMatrix,
    frame: usize,
) -> Result<CovKernel> {
    if frame == 0 {
        return Err(Error::InvalidArgument("frame index starts at 1".into()));
    }
    let (n_t, n_r) = (prior.n_t(), prior.n_r());
    if moment.shape() != (n_t * n_r, n_t * n_r) {
        return Err(Error::DimensionMismatch(format!(
            "moment {:?} vs kernel dimension {}",
            moment.shape(),
            n_t * n_r
        )));
    }
    let t = frame as f64;
    let keep = c((t - 1.0) / t, 0.0);
    let partial_t = CMatrix::from_fn(n_t, n_t, |i, j| {
        (0..n_r).map(|n| moment[(i * n_r + n, j * n_r + n)]).sum()
    });
    let partial_r = CMatrix::from_fn(n_r, n_r, |n, m| {
        (0..n_t).map(|i| moment[(i * n_r + n, i * n_r + m)]).sum()
    });
    let sigma_t = prior.sigma_t() * keep + partial_t / c(t * n_r as f64, 0.0);
    let sigma_r = prior.sigma_r() * keep + partial_r / c(t * n_t as f64, 0.0);
    CovKernel::new(hermitian_part(&sigma_t), hermitian_part(&sigma_r))
}

/// One training record for hyperparameter fitting: `y = X^H h + z`, `z ~ CN(0, Ξ)`.
#[derive(Debug, Clone)]
pub struct TrainingObservation {
    pub y: CVector,
    pub x: CMatrix,
    pub xi: CMatrix,
}

/// Search grid for `η`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaGrid {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
    pub log_spaced: bool,
}

impl Default for EtaGrid {
    fn default() -> Self {
        Self {
            min: 0.05,
            max: 5.0,
            steps: 100,
            log_spaced: true,
        }
    }
}

impl EtaGrid {
    pub fn points(&self) -> Vec<f64> {
        if self.steps <= 1 {
            return vec![self.min];
        }
        let last = (self.steps - 1) as f64;
        (0..self.steps)
            .map(|i| {
                let t = i as f64 / last;
                if self.log_spaced {
                    (self.min.ln() + t * (self.max.ln() - self.min.ln())).exp()
                } else {
                    self.min + t * (self.max - self.min)
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct EtaFit {
    pub eta: f64,
    pub log_likelihood: f64,
    /// `(η, Σ_r ln P(y_r | η))` for every grid point.
    pub curve: Vec<(f64, f64)>,
}

/// `Σ_r ln P(y_r | Σ)` for zero-mean complex Gaussian observations.
pub fn log_likelihood(
    kernel: &CovKernel,
    observations: &[TrainingObservation],
    eta: f64,
) -> Result<f64> {
    let mut total = 0.0;
    for obs in observations {
        let gram = obs.x.adjoint() * kernel.apply(&obs.x) + &obs.xi;
        let chol = crate::numkit::cholesky(&gram).ok_or(Error::DegenerateGram { eta })?;
        let solved = chol.solve(&obs.y);
        let quad = obs.y.dotc(&solved).re;
        let m = obs.y.len() as f64;
        total += -quad - crate::numkit::ln_det_hpd(&chol) - m * PI.ln();
    }
    Ok(total)
}

/// Maximum-likelihood `η` by one-dimensional grid search.
pub fn fit_eta(
    family: &KernelFamily,
    model: &KernelModel,
    observations: &[TrainingObservation],
    grid: &EtaGrid,
) -> Result<EtaFit> {
    if !matches!(
        family,
        KernelFamily::Laplace { .. } | KernelFamily::Bessel { .. }
    ) {
        return Err(Error::InvalidArgument(format!(
            "kernel family `{}` has no hyperparameter",
            family.name()
        )));
    }
    if !(grid.min > 0.0 && grid.max >= grid.min && grid.steps >= 1) {
        return Err(Error::InvalidArgument(
            "eta grid must be positive and non-empty".into(),
        ));
    }
    let mut curve = Vec::with_capacity(grid.steps);
    let mut best: Option<(f64, f64)> = None;
    for eta in grid.points() {
        let kernel = model.kernel(&family.with_eta(eta))?;
        let ll = log_likelihood(&kernel, observations, eta)?;
        curve.push((eta, ll));
        if best.is_none_or(|(_, b)| ll > b) {
            best = Some((eta, ll));
        }
    }
    let (eta, log_likelihood) = best.expect("grid is non-empty");
    Ok(EtaFit {
        eta,
        log_likelihood,
        curve,
    })
}
