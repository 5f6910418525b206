//! Two-stage design for receivers with phase-only analog combiners.
//!
//! Stage one runs the unconstrained greedy design. Stage two approximates each
//! ideal observation matrix `X_q = v_q^* ⊗ W_q` by `v_q^* ⊗ (A_q D_q)`, where
//! every entry of `A_q` has modulus `1/√N_R`, by alternating over `D_q`, `A_q`
//! and `v_q`.

use crate::error::{Error, Result};
use crate::icefill::{design_2dif, ObservationPlan};
use crate::kernels::CovKernel;
use crate::numkit::{c, cholesky, frobenius, CMatrix, CVector};

/// Condition number above which a digital combiner counts as singular.
pub const MAX_DIGITAL_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HybridOptions {
    pub max_iters: usize,
    /// Stop once the residual changes by less than `tol` times its value.
    pub tol: f64,
    /// Constrain precoders to constant modulus `√(P/N_T)` as well.
    pub analog_precoder: bool,
}

impl Default for HybridOptions {
    fn default() -> Self {
        Self {
            max_iters: 200,
            tol: 1e-6,
            analog_precoder: false,
        }
    }
}

/// Residuals `‖X − v^*⊗(AD)‖_F²` observed inside one alternating iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationResiduals {
    pub after_digital: f64,
    pub after_analog: f64,
    pub after_precoder: f64,
    /// `Re Tr(J^H A)` before and after the analog step.
    pub surrogate_before: f64,
    pub surrogate_after: f64,
}

#[derive(Debug, Clone)]
pub struct HybridPlan {
    pub power: f64,
    pub analog: Vec<CMatrix>,
    pub digital: Vec<CMatrix>,
    pub precoders: Vec<CVector>,
    /// Final residual per pilot.
    pub fit_residuals: Vec<f64>,
    /// Residual before any update, per pilot.
    pub initial_residuals: Vec<f64>,
    pub traces: Vec<Vec<IterationResiduals>>,
}

impl HybridPlan {
    pub fn n_pilots(&self) -> usize {
        self.precoders.len()
    }

    /// Plan with effective combiners `W_q = A_q D_q` (not orthonormal).
    pub fn to_observation_plan(&self) -> ObservationPlan {
        ObservationPlan {
            power: self.power,
            precoders: self.precoders.clone(),
            combiners: self
                .analog
                .iter()
                .zip(&self.digital)
                .map(|(a, d)| a * d)
                .collect(),
            selections: vec![],
        }
    }

    /// Largest deviation of any analog entry modulus from `1/√N_R`.
    pub fn modulus_defect(&self) -> f64 {
        self.analog
            .iter()
            .flat_map(|a| {
                let target = 1.0 / (a.nrows() as f64).sqrt();
                a.iter().map(move |z| (z.norm() - target).abs())
            })
            .fold(0.0, f64::max)
    }
}

/// `N_R`-row blocks `X_n` of a stacked `N_T N_R × N_RF` target.
fn blocks(x_if: &CMatrix, n_t: usize) -> Vec<CMatrix> {
    let n_r = x_if.nrows() / n_t;
    (0..n_t)
        .map(|n| x_if.rows(n * n_r, n_r).into_owned())
        .collect()
}

/// `‖X − v^* ⊗ (A D)‖_F²`.
pub fn fit_residual(x_if: &CMatrix, a: &CMatrix, d: &CMatrix, v: &CVector) -> f64 {
    let b = a * d;
    blocks(x_if, v.len())
        .iter()
        .zip(v.iter())
        .map(|(xn, vn)| frobenius(&(xn - &b * vn.conj())).powi(2))
        .sum()
}

/// Exact least-squares digital combiner for fixed `A` and `v`:
/// `D = (Σ|v_n|² A^H A)^{-1} Σ_n v_n A^H X_n`.
pub fn update_digital(a: &CMatrix, v: &CVector, x_if: &CMatrix) -> Result<CMatrix> {
    let xs = blocks(x_if, v.len());
    let mut rhs = CMatrix::zeros(a.ncols(), x_if.ncols());
    for (xn, vn) in xs.iter().zip(v.iter()) {
        rhs += a.adjoint() * xn * *vn;
    }
    let energy = v.norm_squared();
    let gram = a.adjoint() * a * c(energy, 0.0);
    let chol = cholesky(&gram).ok_or(Error::SingularGram)?;
    Ok(chol.solve(&rhs))
}

fn condition_number(d: &CMatrix) -> f64 {
    let s = d.clone().svd(false, false).singular_values;
    let max = s.iter().copied().fold(0.0, f64::max);
    let min = s.iter().copied().fold(f64::INFINITY, f64::min);
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

/// `J = Σ_n v_n X_n D^{-1}`.
pub fn analog_correlation(d: &CMatrix, v: &CVector, x_if: &CMatrix) -> Result<CMatrix> {
    let condition = condition_number(d);
    if condition > MAX_DIGITAL_CONDITION {
        return Err(Error::SingularDigital { condition });
    }
    let mut acc = CMatrix::zeros(x_if.nrows() / v.len(), x_if.ncols());
    for (xn, vn) in blocks(x_if, v.len()).iter().zip(v.iter()) {
        acc += xn * *vn;
    }
    let d_inv = d
        .clone()
        .try_inverse()
        .ok_or(Error::SingularDigital { condition })?;
    Ok(acc * d_inv)
}

/// Phase-aligned analog combiner `A = exp(j∠J)/√N_R`, maximising `Re Tr(J^H A)`.
pub fn phase_align(j: &CMatrix) -> CMatrix {
    let scale = 1.0 / (j.nrows() as f64).sqrt();
    j.map(|z| {
        let phase = if z.norm() > 0.0 { z.arg() } else { 0.0 };
        num_complex::Complex64::from_polar(scale, phase)
    })
}

/// `Re Tr(J^H A)`.
pub fn surrogate(j: &CMatrix, a: &CMatrix) -> f64 {
    j.iter().zip(a.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

pub fn update_analog(d: &CMatrix, v: &CVector, x_if: &CMatrix) -> Result<CMatrix> {
    Ok(phase_align(&analog_correlation(d, v, x_if)?))
}

/// `c_n = Tr(X_n^H A D)`.
pub fn precoder_correlation(a: &CMatrix, d: &CMatrix, x_if: &CMatrix, n_t: usize) -> CVector {
    let b = a * d;
    let xs = blocks(x_if, n_t);
    CVector::from_iterator(
        n_t,
        xs.iter()
            .map(|xn| xn.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()),
    )
}

/// Power-constrained precoder maximising `Re(c^H v)`: `v = √P·c/‖c‖`.
///
/// A zero correlation falls back to `√P·e₁`.
pub fn update_precoder(
    a: &CMatrix,
    d: &CMatrix,
    x_if: &CMatrix,
    n_t: usize,
    power: f64,
) -> CVector {
    let corr = precoder_correlation(a, d, x_if, n_t);
    let norm = corr.norm();
    if norm == 0.0 {
        log::warn!("precoder correlation vanished; falling back to the first unit vector");
        let mut e = CVector::zeros(n_t);
        e[0] = c(power.sqrt(), 0.0);
        return e;
    }
    corr * c(power.sqrt() / norm, 0.0)
}

/// Constant-modulus precoder `√(P/N_T)·exp(j∠c)`.
pub fn update_analog_precoder(
    a: &CMatrix,
    d: &CMatrix,
    x_if: &CMatrix,
    n_t: usize,
    power: f64,
) -> CVector {
    let scale = (power / n_t as f64).sqrt();
    precoder_correlation(a, d, x_if, n_t).map(|z| {
        let phase = if z.norm() > 0.0 { z.arg() } else { 0.0 };
        num_complex::Complex64::from_polar(scale, phase)
    })
}

struct PilotFit {
    a: CMatrix,
    d: CMatrix,
    v: CVector,
    initial: f64,
    residual: f64,
    trace: Vec<IterationResiduals>,
}

fn fit_pilot(
    x_if: &CMatrix,
    v0: &CVector,
    w0: &CMatrix,
    power: f64,
    options: &HybridOptions,
) -> Result<PilotFit> {
    let n_t = v0.len();
    let mut a = phase_align(w0);
    if condition_number(&(a.adjoint() * &a)) > MAX_DIGITAL_CONDITION {
        // Real-valued targets (e.g. standard basis vectors) collapse to equal phases.
        a = crate::baselines::dft_matrix(w0.nrows())
            .columns(0, w0.ncols())
            .into_owned();
    }
    let mut v = v0.clone();
    let mut d = update_digital(&a, &v, x_if)?;
    let initial = fit_residual(x_if, &a, &CMatrix::identity(a.ncols(), a.ncols()), &v);
    let scale = frobenius(x_if).powi(2);
    let mut trace = Vec::new();
    let mut previous = f64::INFINITY;
    for iter in 0..options.max_iters {
        let step = || -> Result<(CMatrix, CMatrix, CVector, IterationResiduals)> {
            let d = if iter > 0 {
                update_digital(&a, &v, x_if)?
            } else {
                d.clone()
            };
            let after_digital = fit_residual(x_if, &a, &d, &v);
            let j = analog_correlation(&d, &v, x_if)?;
            let surrogate_before = surrogate(&j, &a);
            let a_next = phase_align(&j);
            if condition_number(&(a_next.adjoint() * &a_next)) > MAX_DIGITAL_CONDITION {
                return Err(Error::SingularGram);
            }
            let surrogate_after = surrogate(&j, &a_next);
            let after_analog = fit_residual(x_if, &a_next, &d, &v);
            let v_next = if options.analog_precoder {
                update_analog_precoder(&a_next, &d, x_if, n_t, power)
            } else {
                update_precoder(&a_next, &d, x_if, n_t, power)
            };
            let after_precoder = fit_residual(x_if, &a_next, &d, &v_next);
            let record = IterationResiduals {
                after_digital,
                after_analog,
                after_precoder,
                surrogate_before,
                surrogate_after,
            };
            Ok((a_next, d, v_next, record))
        };
        let (a_next, d_next, v_next, record) = match step() {
            Ok(s) => s,
            Err(e) => {
                // Keep the last complete iterate; it is feasible by construction.
                log::warn!("hybrid fit stopped after {iter} iterations: {e}");
                break;
            }
        };
        (a, d, v) = (a_next, d_next, v_next);
        trace.push(record);
        let current = record.after_precoder;
        let converged = (previous - current).abs() < options.tol * current
            || current <= 1e-28 * scale.max(f64::MIN_POSITIVE);
        previous = current;
        if converged {
            break;
        }
    }
    Ok(PilotFit {
        residual: fit_residual(x_if, &a, &d, &v),
        a,
        d,
        v,
        initial,
        trace,
    })
}

/// Fits phase-only hybrid combiners to an ideal (orthonormal-combiner) plan.
pub fn fit_hybrid(ideal: &ObservationPlan, options: &HybridOptions) -> Result<HybridPlan> {
    if options.max_iters == 0 {
        return Err(Error::InvalidArgument(
            "max_iters must be at least 1".into(),
        ));
    }
    if !(options.tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let n = ideal.n_pilots();
    let mut plan = HybridPlan {
        power: ideal.power,
        analog: Vec::with_capacity(n),
        digital: Vec::with_capacity(n),
        precoders: Vec::with_capacity(n),
        fit_residuals: Vec::with_capacity(n),
        initial_residuals: Vec::with_capacity(n),
        traces: Vec::with_capacity(n),
    };
    for q in 0..n {
        let fit = fit_pilot(
            &ideal.block(q),
            &ideal.precoders[q],
            &ideal.combiners[q],
            ideal.power,
            options,
        )?;
        plan.analog.push(fit.a);
        plan.digital.push(fit.d);
        plan.precoders.push(fit.v);
        plan.fit_residuals.push(fit.residual);
        plan.initial_residuals.push(fit.initial);
        plan.traces.push(fit.trace);
    }
    Ok(plan)
}

/// Greedy ideal plan followed by the hybrid fit.
pub fn design_ts2dif(
    kernel: &CovKernel,
    pilots: usize,
    n_rf: usize,
    power: f64,
    noise: f64,
    options: &HybridOptions,
) -> Result<HybridPlan> {
    let ideal = design_2dif(kernel, pilots, n_rf, power, noise)?;
    fit_hybrid(&ideal, options)
}
