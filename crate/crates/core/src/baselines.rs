//! Reference designs: DFT plans (for LS and DFT-MMSE), the water-filling upper
//! bound, the column-wise ice-filling scheme and random feasible plans.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::icefill::{design_2dif, ObservationPlan, Selection};
use crate::kernels::CovKernel;
use crate::numkit::{c, cholesky, orthonormalize, sample_complex_gaussian, CMatrix, CVector};

/// Unitary `n`-point DFT matrix, entry `(m, k) = exp(-2πj·mk/n)/√n`.
pub fn dft_matrix(n: usize) -> CMatrix {
    let scale = 1.0 / (n as f64).sqrt();
    CMatrix::from_fn(n, n, |m, k| {
        let phase = -2.0 * PI * ((m * k) % n) as f64 / n as f64;
        c(scale * phase.cos(), scale * phase.sin())
    })
}

/// Pilots needed for a DFT plan to cover every transmit/receive beam pair:
/// `N_T·⌈N_R/N_RF⌉`, which equals `⌈N_T N_R/N_RF⌉` whenever `N_RF` divides `N_R`.
pub fn dft_pilot_count(n_t: usize, n_r: usize, n_rf: usize) -> usize {
    n_t * n_r.div_ceil(n_rf)
}

/// DFT plan with `pilots` pilots.
///
/// Pilot `q` uses transmit beam `q mod N_T` and receive block `⌊q/N_T⌋` (cyclically),
/// where block `b` holds DFT columns `b·N_RF, …, b·N_RF + N_RF − 1` modulo `N_R`.
pub fn design_dft_plan(
    n_t: usize,
    n_r: usize,
    n_rf: usize,
    power: f64,
    pilots: usize,
) -> Result<ObservationPlan> {
    if n_rf == 0 || n_rf > n_r {
        return Err(Error::TooManyChains { n_rf, n_r });
    }
    let ft = dft_matrix(n_t);
    let fr = dft_matrix(n_r);
    let blocks = n_r.div_ceil(n_rf);
    let root = c(power.sqrt(), 0.0);
    let mut precoders = Vec::with_capacity(pilots);
    let mut combiners = Vec::with_capacity(pilots);
    for q in 0..pilots {
        precoders.push(ft.column(q % n_t) * root);
        let block = (q / n_t) % blocks;
        let mut w = CMatrix::zeros(n_r, n_rf);
        for k in 0..n_rf {
            w.set_column(k, &fr.column((block * n_rf + k) % n_r));
        }
        combiners.push(w);
    }
    Ok(ObservationPlan {
        power,
        precoders,
        combiners,
        selections: vec![],
    })
}

/// Minimum-norm least-squares gain: `ĥ = (X X^H)^{-1} X y`.
pub fn ls_gain(x: &CMatrix) -> Result<CMatrix> {
    let (n, m) = x.shape();
    let underdetermined = Error::Underdetermined {
        needed: n,
        available: m,
    };
    if m < n {
        return Err(underdetermined);
    }
    let gram = x * x.adjoint();
    let chol = cholesky(&gram).ok_or(underdetermined.clone())?;
    // A Cholesky that succeeds on a numerically singular Gram is still useless.
    let diag = chol.l_dirty().diagonal();
    let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), z| {
        (lo.min(z.re), hi.max(z.re))
    });
    if lo <= 1e-7 * hi {
        return Err(underdetermined);
    }
    Ok(chol.solve(x))
}

/// Least-squares channel estimate from a batch.
pub fn estimate_ls(batch: &crate::estimator::PilotBatch) -> Result<CVector> {
    Ok(ls_gain(&batch.x)? * &batch.y)
}

/// Water level `β` with `Σ max(β − ℓ_n, 0) = total`, found by bisection.
///
/// Infinite levels never receive power. Returns `β` and the per-level powers.
pub fn water_level(levels: &[f64], total: f64) -> Result<(f64, Vec<f64>)> {
    let finite: Vec<f64> = levels.iter().copied().filter(|l| l.is_finite()).collect();
    if finite.is_empty() {
        return Err(Error::InvalidArgument(
            "no finite level to pour water on".into(),
        ));
    }
    if !(total >= 0.0 && total.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "total power must be nonnegative, got {total}"
        )));
    }
    let poured = |beta: f64| finite.iter().map(|&l| (beta - l).max(0.0)).sum::<f64>();
    let mut lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max) + total;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if poured(mid) < total {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let beta = 0.5 * (lo + hi);
    let powers = levels
        .iter()
        .map(|&l| {
            if l.is_finite() {
                (beta - l).max(0.0)
            } else {
                0.0
            }
        })
        .collect();
    Ok((beta, powers))
}

/// Continuous-power upper bound on the pilot design.
#[derive(Debug, Clone)]
pub struct WaterFillingSolution {
    pub beta: f64,
    /// Power on each of the `N_RF·Q` strongest eigendirections.
    pub powers: Vec<f64>,
    /// Eigenvalues `λ_n` of `Σ_h` matching `powers`, descending.
    pub eigenvalues: Vec<f64>,
    /// `(n_t, n_r)` eigen indices of each direction.
    pub cells: Vec<(usize, usize)>,
    /// `X = U₀(:, 1:N_RF·Q)·diag(√p_n)`.
    pub obs_matrix: CMatrix,
    pub noise: f64,
}

impl WaterFillingSolution {
    /// `Σ_n log2(1 + p_n λ_n/σ²)`.
    pub fn information_bits(&self) -> f64 {
        self.powers
            .iter()
            .zip(&self.eigenvalues)
            .map(|(p, l)| (p * l / self.noise).ln_1p() / std::f64::consts::LN_2)
            .sum()
    }
}

pub fn design_waterfilling(
    kernel: &CovKernel,
    pilots: usize,
    n_rf: usize,
    power: f64,
    noise: f64,
) -> Result<WaterFillingSolution> {
    if !(noise > 0.0) {
        return Err(Error::InvalidArgument(
            "noise power must be positive".into(),
        ));
    }
    let alpha = &kernel.evd_t().eigenvalues;
    let beta = &kernel.evd_r().eigenvalues;
    let mut cells: Vec<(usize, usize, f64)> = (0..alpha.len())
        .flat_map(|i| (0..beta.len()).map(move |j| (i, j)))
        .map(|(i, j)| (i, j, (alpha[i] * beta[j]).max(0.0)))
        .collect();
    cells.sort_by(|a, b| b.2.total_cmp(&a.2));
    let k = (n_rf * pilots).min(cells.len());
    cells.truncate(k);
    let levels: Vec<f64> = cells
        .iter()
        .map(|&(_, _, l)| if l > 0.0 { noise / l } else { f64::INFINITY })
        .collect();
    let (level, powers) = water_level(&levels, power * (n_rf * pilots) as f64)?;
    let mut x = CMatrix::zeros(kernel.dim(), k);
    for (col, (&(i, j, _), &p)) in cells.iter().zip(&powers).enumerate() {
        let v = kernel.joint_eigenvector(i, j) * c(p.sqrt(), 0.0);
        x.set_column(col, &v);
    }
    Ok(WaterFillingSolution {
        beta: level,
        eigenvalues: cells.iter().map(|c| c.2).collect(),
        cells: cells.iter().map(|&(i, j, _)| (i, j)).collect(),
        powers,
        obs_matrix: x,
        noise,
    })
}

/// Observations per transmit antenna when `budget` single-chain pilots are
/// shared round-robin: the first `budget mod N_T` antennas get one extra.
pub fn if_budget_shares(n_t: usize, budget: usize) -> Vec<usize> {
    (0..n_t)
        .map(|n| budget / n_t + usize::from(n < budget % n_t))
        .collect()
}

/// Column-wise ice filling: each transmit antenna is treated as a separate
/// single-input channel with prior `Σ_T(n,n)·Σ_R` and gets single-chain
/// receive pilots from the greedy design; its precoder is `√P·e_n`.
///
/// Selections record the antenna index in `n_t`.
pub fn design_if_plan(
    kernel: &CovKernel,
    budget: usize,
    power: f64,
    noise: f64,
) -> Result<ObservationPlan> {
    let n_t = kernel.n_t();
    let mut plan = ObservationPlan {
        power,
        precoders: Vec::with_capacity(budget),
        combiners: Vec::with_capacity(budget),
        selections: Vec::with_capacity(budget),
    };
    for (n, share) in if_budget_shares(n_t, budget).into_iter().enumerate() {
        let scalar = CMatrix::from_element(1, 1, c(kernel.sigma_t()[(n, n)].re, 0.0));
        let column = CovKernel::new(scalar, kernel.sigma_r().clone())?;
        let sub = design_2dif(&column, share, 1, power, noise)?;
        let mut e = CVector::zeros(n_t);
        e[n] = c(power.sqrt(), 0.0);
        for (w, sel) in sub.combiners.into_iter().zip(sub.selections) {
            plan.precoders.push(e.clone());
            plan.combiners.push(w);
            plan.selections.push(Selection {
                n_t: n,
                n_r: sel.n_r,
            });
        }
    }
    Ok(plan)
}

/// Random feasible plan: precoders uniform on the `√P` sphere, combiners
/// orthonormalised Gaussian matrices.
pub fn design_random_plan(
    n_t: usize,
    n_r: usize,
    n_rf: usize,
    pilots: usize,
    power: f64,
    seed: u64,
) -> Result<ObservationPlan> {
    if n_rf == 0 || n_rf > n_r {
        return Err(Error::TooManyChains { n_rf, n_r });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_plan_from(&mut rng, n_t, n_r, n_rf, pilots, power)
}

pub(crate) fn random_plan_from<R: Rng + ?Sized>(
    rng: &mut R,
    n_t: usize,
    n_r: usize,
    n_rf: usize,
    pilots: usize,
    power: f64,
) -> Result<ObservationPlan> {
    let mut precoders = Vec::with_capacity(pilots);
    let mut combiners = Vec::with_capacity(pilots);
    for _ in 0..pilots {
        let g = sample_complex_gaussian(n_t, 1, rng);
        let norm = g.norm();
        precoders.push(g.column(0) * c(power.sqrt() / norm, 0.0));
        combiners.push(orthonormalize(&sample_complex_gaussian(n_r, n_rf, rng))?);
    }
    Ok(ObservationPlan {
        power,
        precoders,
        combiners,
        selections: vec![],
    })
}
