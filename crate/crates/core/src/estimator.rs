//! LMMSE (Gaussian posterior) channel estimation and mutual information.
//!
//! Observations are `y = X^H h + z` with `z ~ CN(0, Ξ)`. Every routine factors
//! the innovation covariance `G = X^H Σ_h X + Ξ` by Cholesky; nothing is
//! inverted explicitly.

use std::f64::consts::LN_2;

use crate::error::{Error, Result};
use crate::icefill::ObservationPlan;
use crate::kernels::CovKernel;
use crate::numkit::{cholesky, hermitian_part, ln_det_hpd, trace_re, CMatrix, CVector};

/// Received pilots with their observation matrix and noise covariance.
#[derive(Debug, Clone)]
pub struct PilotBatch {
    pub y: CVector,
    /// `N_T N_R × M` stacked observation matrix.
    pub x: CMatrix,
    /// `M × M` noise covariance.
    pub xi: CMatrix,
}

fn check_dims(kernel: &CovKernel, x: &CMatrix, xi: &CMatrix) -> Result<()> {
    if x.nrows() != kernel.dim() {
        return Err(Error::DimensionMismatch(format!(
            "observation matrix has {} rows, kernel dimension is {}",
            x.nrows(),
            kernel.dim()
        )));
    }
    if xi.shape() != (x.ncols(), x.ncols()) {
        return Err(Error::DimensionMismatch(format!(
            "noise covariance {:?} for {} observations",
            xi.shape(),
            x.ncols()
        )));
    }
    Ok(())
}

/// `(Σ_h X, chol(X^H Σ_h X + Ξ))`.
fn innovation(
    kernel: &CovKernel,
    x: &CMatrix,
    xi: &CMatrix,
) -> Result<(
    CMatrix,
    nalgebra::Cholesky<num_complex::Complex64, nalgebra::Dyn>,
)> {
    check_dims(kernel, x, xi)?;
    let sx = kernel.apply(x);
    let gram = x.adjoint() * &sx + xi;
    let chol = cholesky(&gram).ok_or(Error::SingularInnovation)?;
    Ok((sx, chol))
}

/// Linear LMMSE gain `K = Σ_h X (X^H Σ_h X + Ξ)^{-1}`, so that `μ = K y`.
pub fn lmmse_gain(kernel: &CovKernel, x: &CMatrix, xi: &CMatrix) -> Result<CMatrix> {
    let (sx, chol) = innovation(kernel, x, xi)?;
    Ok(chol.solve(&sx.adjoint()).adjoint())
}

/// Posterior mean `μ = Σ_h X (X^H Σ_h X + Ξ)^{-1} y`.
pub fn posterior_mean(kernel: &CovKernel, batch: &PilotBatch) -> Result<CVector> {
    if batch.y.len() != batch.x.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "{} samples for {} observation columns",
            batch.y.len(),
            batch.x.ncols()
        )));
    }
    let (sx, chol) = innovation(kernel, &batch.x, &batch.xi)?;
    Ok(sx * chol.solve(&batch.y))
}

/// Posterior covariance `Σ_h − Σ_h X G^{-1} X^H Σ_h`; materialises the full kernel.
pub fn posterior_covariance(kernel: &CovKernel, x: &CMatrix, xi: &CMatrix) -> Result<CMatrix> {
    let (sx, chol) = innovation(kernel, x, xi)?;
    let reduction = &sx * chol.solve(&sx.adjoint());
    Ok(hermitian_part(&(kernel.full() - reduction)))
}

/// `Tr(Σ_post)` without forming any `N_T N_R`-square matrix.
pub fn posterior_trace(kernel: &CovKernel, x: &CMatrix, xi: &CMatrix) -> Result<f64> {
    let (sx, chol) = innovation(kernel, x, xi)?;
    let reduction = trace_re(&chol.solve(&(sx.adjoint() * &sx)));
    Ok(kernel.energy() - reduction)
}

/// `log2 det(I + Ξ^{-1} X^H Σ_h X)` in bits.
pub fn mutual_information(kernel: &CovKernel, x: &CMatrix, xi: &CMatrix) -> Result<f64> {
    check_dims(kernel, x, xi)?;
    if x.ncols() == 0 {
        return Ok(0.0);
    }
    let noise = cholesky(xi).ok_or(Error::SingularNoise)?;
    let (_, chol) = innovation(kernel, x, xi)?;
    Ok(((ln_det_hpd(&chol) - ln_det_hpd(&noise)) / LN_2).max(0.0))
}

/// Mutual information of a plan at noise power `σ²`, using `Ξ = σ² blkdiag(W_q^H W_q)`.
pub fn plan_information(kernel: &CovKernel, plan: &ObservationPlan, noise: f64) -> Result<f64> {
    mutual_information(kernel, &plan.obs_matrix(), &plan.noise_shape().scale(noise))
}

/// Per-pilot information increments `log2 det(I + Ξ_t^{-1} X_t^H Σ_{t-1} X_t)`
/// together with the posterior covariances `Σ_t` after each pilot.
///
/// Runs the rank-update recursion on the full kernel, so it is meant for
/// moderate dimensions.
pub fn sequential_posterior(
    kernel: &CovKernel,
    blocks: &[(CMatrix, CMatrix)],
) -> Result<(Vec<f64>, Vec<CMatrix>)> {
    let mut sigma = kernel.full();
    let mut increments = Vec::with_capacity(blocks.len());
    let mut history = Vec::with_capacity(blocks.len());
    for (x, xi) in blocks {
        if x.nrows() != sigma.nrows() || xi.shape() != (x.ncols(), x.ncols()) {
            return Err(Error::DimensionMismatch(
                "pilot block does not match kernel".into(),
            ));
        }
        let sx = &sigma * x;
        let gram = x.adjoint() * &sx + xi;
        let chol = cholesky(&gram).ok_or(Error::SingularInnovation)?;
        let noise = cholesky(xi).ok_or(Error::SingularNoise)?;
        increments.push((ln_det_hpd(&chol) - ln_det_hpd(&noise)) / LN_2);
        sigma = hermitian_part(&(&sigma - &sx * chol.solve(&sx.adjoint())));
        history.push(sigma.clone());
    }
    Ok((increments, history))
}

/// Mutual information of a plan with its raw combiners and with orthonormalised ones.
pub fn mi_orthogonality_invariance(
    kernel: &CovKernel,
    plan: &ObservationPlan,
    noise: f64,
) -> Result<(f64, f64)> {
    let raw = plan_information(kernel, plan, noise)?;
    let ortho = plan.with_orthonormal_combiners()?;
    let x = ortho.obs_matrix();
    let xi = CMatrix::identity(x.ncols(), x.ncols()).scale(noise);
    Ok((raw, mutual_information(kernel, &x, &xi)?))
}
