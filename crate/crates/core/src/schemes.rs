//! Pilot-design methods behind a common trait, looked up by name at run time.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;

use crate::baselines::{
    design_dft_plan, design_if_plan, design_random_plan, design_waterfilling, dft_pilot_count,
    ls_gain, WaterFillingSolution,
};
use crate::error::{Error, Result};
use crate::estimator::{lmmse_gain, mutual_information, posterior_trace};
use crate::hybrid::{design_ts2dif, HybridOptions, HybridPlan};
use crate::icefill::{design_2dif, ObservationPlan};
use crate::kernels::CovKernel;
use crate::numkit::{c, identity, sample_complex_gaussian, CMatrix, CVector};

/// Everything a method needs to produce a design.
#[derive(Debug, Clone)]
pub struct DesignContext<'a> {
    /// Kernel the receiver believes in; designs and estimators use it.
    pub kernel: &'a CovKernel,
    pub n_rf: usize,
    pub pilots: usize,
    pub power: f64,
    pub noise: f64,
    pub seed: u64,
    pub hybrid: HybridOptions,
}

#[derive(Debug, Clone)]
pub enum Design {
    Plan(ObservationPlan),
    Hybrid {
        plan: HybridPlan,
        effective: ObservationPlan,
    },
    /// Unconstrained observation matrix with white noise, not a physical plan.
    Ideal(WaterFillingSolution),
}

impl Design {
    /// Stacked observation matrix `X`.
    pub fn obs_matrix(&self) -> CMatrix {
        match self {
            Design::Plan(p) | Design::Hybrid { effective: p, .. } => p.obs_matrix(),
            Design::Ideal(w) => w.obs_matrix.clone(),
        }
    }

    /// Combiner blocks that map white receiver noise onto the observations.
    pub fn noise_maps(&self) -> Vec<CMatrix> {
        match self {
            Design::Plan(p) | Design::Hybrid { effective: p, .. } => p.combiners.clone(),
            Design::Ideal(w) => vec![identity(w.obs_matrix.ncols())],
        }
    }

    pub fn plan(&self) -> Option<&ObservationPlan> {
        match self {
            Design::Plan(p) | Design::Hybrid { effective: p, .. } => Some(p),
            Design::Ideal(_) => None,
        }
    }
}

/// A design together with its linear estimator `ĥ = K y`.
#[derive(Debug, Clone)]
pub struct Deployed {
    pub method: String,
    pub design: Design,
    pub obs_matrix: CMatrix,
    pub noise_maps: Vec<CMatrix>,
    pub gain: CMatrix,
    /// Mutual information under the design kernel, bits.
    pub mi_bits: f64,
    /// `Tr(Σ_post)` when the estimator is the LMMSE one for the design kernel.
    pub posterior_trace: Option<f64>,
}

impl Deployed {
    pub fn n_obs(&self) -> usize {
        self.obs_matrix.ncols()
    }

    /// `y = X^H h + blkdiag(W_q)^H z` with `z ~ CN(0, σ² I)`.
    pub fn observe<R: Rng + ?Sized>(&self, h: &CVector, noise: f64, rng: &mut R) -> CVector {
        let mut y = self.obs_matrix.adjoint() * h;
        if noise > 0.0 {
            let scale = c(noise.sqrt(), 0.0);
            let mut row = 0;
            for w in &self.noise_maps {
                let z = sample_complex_gaussian(w.nrows(), 1, rng) * scale;
                let n = w.adjoint() * z;
                let mut segment = y.rows_mut(row, w.ncols());
                segment += n.column(0);
                row += w.ncols();
            }
        }
        y
    }

    pub fn estimate(&self, y: &CVector) -> CVector {
        &self.gain * y
    }
}

/// Which linear estimator a method pairs with its design.
#[derive(Debug, Clone)]
pub enum EstimatorKind {
    /// LMMSE under the design kernel.
    Lmmse,
    /// LMMSE under a different prior (e.g. one that ignores transmit correlation).
    LmmseWith(Box<CovKernel>),
    LeastSquares,
}

pub trait Scheme: Send + Sync {
    fn name(&self) -> &'static str;
    fn design(&self, ctx: &DesignContext) -> Result<Design>;
    fn estimator(&self, _ctx: &DesignContext) -> Result<EstimatorKind> {
        Ok(EstimatorKind::Lmmse)
    }
}

/// Designs with `scheme` and attaches its estimator.
pub fn deploy(scheme: &dyn Scheme, ctx: &DesignContext) -> Result<Deployed> {
    let design = scheme.design(ctx)?;
    let x = design.obs_matrix();
    let noise_maps = design.noise_maps();
    let shape = crate::numkit::block_diag(
        &noise_maps
            .iter()
            .map(|w| w.adjoint() * w)
            .collect::<Vec<_>>(),
    );
    let xi = shape.scale(ctx.noise);
    let mi_bits = mutual_information(ctx.kernel, &x, &xi)?;
    let (gain, posterior) = match scheme.estimator(ctx)? {
        EstimatorKind::Lmmse => (
            lmmse_gain(ctx.kernel, &x, &xi)?,
            Some(posterior_trace(ctx.kernel, &x, &xi)?),
        ),
        EstimatorKind::LmmseWith(prior) => (lmmse_gain(&prior, &x, &xi)?, None),
        EstimatorKind::LeastSquares => (ls_gain(&x)?, None),
    };
    Ok(Deployed {
        method: scheme.name().to_string(),
        design,
        obs_matrix: x,
        noise_maps,
        gain,
        mi_bits,
        posterior_trace: posterior,
    })
}

pub struct TwoDif;
pub struct Ts2Dif;
pub struct WaterFilling;
pub struct DftMmse;
pub struct LeastSquares;
pub struct ColumnIceFilling;
pub struct RandomPlan;

impl Scheme for TwoDif {
    fn name(&self) -> &'static str {
        "2dif"
    }

    fn design(&self, ctx: &DesignContext) -> Result<Design> {
        design_2dif(ctx.kernel, ctx.pilots, ctx.n_rf, ctx.power, ctx.noise).map(Design::Plan)
    }
}

impl Scheme for Ts2Dif {
    fn name(&self) -> &'static str {
        "ts2dif"
    }

    fn design(&self, ctx: &DesignContext) -> Result<Design> {
        let plan = design_ts2dif(
            ctx.kernel,
            ctx.pilots,
            ctx.n_rf,
            ctx.power,
            ctx.noise,
            &ctx.hybrid,
        )?;
        let effective = plan.to_observation_plan();
        Ok(Design::Hybrid { plan, effective })
    }
}

impl Scheme for WaterFilling {
    fn name(&self) -> &'static str {
        "waterfilling"
    }

    fn design(&self, ctx: &DesignContext) -> Result<Design> {
        design_waterfilling(ctx.kernel, ctx.pilots, ctx.n_rf, ctx.power, ctx.noise)
            .map(Design::Ideal)
    }
}

impl Scheme for DftMmse {
    fn name(&self) -> &'static str {
        "dft-mmse"
    }

    /// Same pilot count as the other designs, cycling DFT beams.
    fn design(&self, ctx: &DesignContext) -> Result<Design> {
        design_dft_plan(
            ctx.kernel.n_t(),
            ctx.kernel.n_r(),
            ctx.n_rf,
            ctx.power,
            ctx.pilots,
        )
        .map(Design::Plan)
    }
}

impl Scheme for LeastSquares {
    fn name(&self) -> &'static str {
        "ls"
    }

    /// Always the full DFT plan: fewer pilots leave the problem underdetermined.
    fn design(&self, ctx: &DesignContext) -> Result<Design> {
        let (n_t, n_r) = (ctx.kernel.n_t(), ctx.kernel.n_r());
        design_dft_plan(
            n_t,
            n_r,
            ctx.n_rf,
            ctx.power,
            dft_pilot_count(n_t, n_r, ctx.n_rf),
        )
        .map(Design::Plan)
    }

    fn estimator(&self, _ctx: &DesignContext) -> Result<EstimatorKind> {
        Ok(EstimatorKind::LeastSquares)
    }
}

impl Scheme for ColumnIceFilling {
    fn name(&self) -> &'static str {
        "if"
    }

    /// Single-chain pilots with the same total number of observations, `Q·N_RF`.
    fn design(&self, ctx: &DesignContext) -> Result<Design> {
        design_if_plan(ctx.kernel, ctx.pilots * ctx.n_rf, ctx.power, ctx.noise).map(Design::Plan)
    }

    /// Columns are estimated independently, so the prior drops transmit cross-correlation.
    fn estimator(&self, ctx: &DesignContext) -> Result<EstimatorKind> {
        let st = ctx.kernel.sigma_t();
        let diag = CMatrix::from_fn(st.nrows(), st.ncols(), |i, j| {
            if i == j {
                st[(i, i)]
            } else {
                c(0.0, 0.0)
            }
        });
        Ok(EstimatorKind::LmmseWith(Box::new(CovKernel::new(
            diag,
            ctx.kernel.sigma_r().clone(),
        )?)))
    }
}

impl Scheme for RandomPlan {
    fn name(&self) -> &'static str {
        "random"
    }

    fn design(&self, ctx: &DesignContext) -> Result<Design> {
        let (n_t, n_r) = (ctx.kernel.n_t(), ctx.kernel.n_r());
        design_random_plan(n_t, n_r, ctx.n_rf, ctx.pilots, ctx.power, ctx.seed).map(Design::Plan)
    }
}

/// Name → method table.
#[derive(Clone)]
pub struct SchemeRegistry {
    schemes: BTreeMap<String, Arc<dyn Scheme>>,
}

impl Default for SchemeRegistry {
    fn default() -> Self {
        let mut reg = Self::empty();
        reg.register(Arc::new(TwoDif));
        reg.register(Arc::new(Ts2Dif));
        reg.register(Arc::new(WaterFilling));
        reg.register(Arc::new(DftMmse));
        reg.register(Arc::new(LeastSquares));
        reg.register(Arc::new(ColumnIceFilling));
        reg.register(Arc::new(RandomPlan));
        reg
    }
}

impl SchemeRegistry {
    pub fn empty() -> Self {
        Self {
            schemes: BTreeMap::new(),
        }
    }

    /// Adds or replaces a method under its own name.
    pub fn register(&mut self, scheme: Arc<dyn Scheme>) {
        self.schemes.insert(scheme.name().to_string(), scheme);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn Scheme>> {
        let key = name.trim().to_ascii_lowercase();
        self.schemes.get(&key).cloned().ok_or_else(|| {
            Error::InvalidArgument(format!(
                "unknown method `{name}` (known: {})",
                self.names().join(", ")
            ))
        })
    }

    pub fn names(&self) -> Vec<&str> {
        self.schemes.keys().map(String::as_str).collect()
    }
}

impl std::fmt::Debug for SchemeRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.names()).finish()
    }
}
