//! Two-dimensional ice filling (2DIF).
//!
//! With a Kronecker kernel and observation matrices built from kernel
//! eigenvectors, the posterior keeps the prior eigenbasis and only the
//! eigenvalues on an `N_T × N_R` grid change. Each pilot picks one transmit
//! eigenvector and `N_RF` receive eigenvectors; every selected cell's ice level
//! `σ²/λ` then rises by exactly `P`.

use std::f64::consts::LN_2;

use crate::error::{Error, Result};
use crate::kernels::CovKernel;
use crate::numkit::{block_diag, c, kron, CMatrix, CVector, RMatrix};

/// One pilot's eigenpair choice, 0-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Selection {
    pub n_t: usize,
    /// Receive eigen indices in the order they fill combiner columns.
    pub n_r: Vec<usize>,
}

/// Posterior eigenvalue grid, rows indexed by transmit eigenvector.
#[derive(Debug, Clone)]
pub struct IceTable {
    lambdas: RMatrix,
    fill_count: Vec<usize>,
    power: f64,
    noise: f64,
    info_bits: f64,
}

fn gain_bits(power: f64, noise: f64, lambda: f64) -> f64 {
    (power * lambda / noise).ln_1p() / LN_2
}

impl IceTable {
    /// Grid of products `α_i β_j` from the kernel's sorted eigenvalues.
    pub fn new(kernel: &CovKernel, power: f64, noise: f64) -> Result<Self> {
        let alpha = &kernel.evd_t().eigenvalues;
        let beta = &kernel.evd_r().eigenvalues;
        let lambdas = RMatrix::from_fn(alpha.len(), beta.len(), |i, j| {
            (alpha[i] * beta[j]).max(0.0)
        });
        Self::from_lambdas(lambdas, power, noise)
    }

    pub fn from_lambdas(lambdas: RMatrix, power: f64, noise: f64) -> Result<Self> {
        if !(power > 0.0 && power.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "pilot power must be positive, got {power}"
            )));
        }
        if !(noise > 0.0 && noise.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "noise power must be positive, got {noise}"
            )));
        }
        if lambdas.iter().any(|&l| !(l >= 0.0) || !l.is_finite()) {
            return Err(Error::InvalidArgument(
                "eigenvalues must be finite and nonnegative".into(),
            ));
        }
        Ok(Self {
            fill_count: vec![0; lambdas.len()],
            lambdas,
            power,
            noise,
            info_bits: 0.0,
        })
    }

    /// Table whose cells start at the given ice levels `σ²/λ` (`∞` for `λ = 0`).
    pub fn from_levels(levels: &RMatrix, power: f64, noise: f64) -> Result<Self> {
        let lambdas = levels.map(|l| if l.is_infinite() { 0.0 } else { noise / l });
        Self::from_lambdas(lambdas, power, noise)
    }

    pub fn n_t(&self) -> usize {
        self.lambdas.nrows()
    }

    pub fn n_r(&self) -> usize {
        self.lambdas.ncols()
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn noise(&self) -> f64 {
        self.noise
    }

    pub fn lambdas(&self) -> &RMatrix {
        &self.lambdas
    }

    pub fn fill_count(&self, n_t: usize, n_r: usize) -> usize {
        self.fill_count[n_t + n_r * self.n_t()]
    }

    /// Mutual information accumulated by all fills so far, in bits.
    pub fn info_bits(&self) -> f64 {
        self.info_bits
    }

    /// Ice levels `σ²/λ`; empty cells report `+∞`.
    pub fn levels(&self) -> RMatrix {
        self.lambdas.map(|l| {
            if l > 0.0 {
                self.noise / l
            } else {
                f64::INFINITY
            }
        })
    }

    /// Best `n_rf` receive indices of one row and the information they would add.
    fn best_in_row(&self, n_t: usize, n_rf: usize) -> (Vec<usize>, f64) {
        let mut cols: Vec<usize> = (0..self.n_r()).collect();
        cols.sort_by(|&a, &b| self.lambdas[(n_t, b)].total_cmp(&self.lambdas[(n_t, a)]));
        cols.truncate(n_rf);
        let bits = cols
            .iter()
            .map(|&j| gain_bits(self.power, self.noise, self.lambdas[(n_t, j)]))
            .sum();
        (cols, bits)
    }

    /// Linear search over transmit rows for the largest information increment.
    ///
    /// Ties go to the lowest receive index within a row and the lowest row overall.
    pub fn select(&self, n_rf: usize) -> Result<Selection> {
        if n_rf > self.n_r() {
            return Err(Error::TooManyChains {
                n_rf,
                n_r: self.n_r(),
            });
        }
        let (mut best_cols, mut best_bits) = self.best_in_row(0, n_rf);
        let mut best_row = 0;
        for n_t in 1..self.n_t() {
            let (cols, bits) = self.best_in_row(n_t, n_rf);
            if bits > best_bits {
                best_row = n_t;
                best_cols = cols;
                best_bits = bits;
            }
        }
        Ok(Selection {
            n_t: best_row,
            n_r: best_cols,
        })
    }

    /// Posterior eigenvalue update `λ ← λσ²/(Pλ + σ²)` on the selected cells.
    pub fn fill(&mut self, sel: &Selection) {
        let n_t = self.n_t();
        for &j in &sel.n_r {
            let l = self.lambdas[(sel.n_t, j)];
            self.info_bits += gain_bits(self.power, self.noise, l);
            self.lambdas[(sel.n_t, j)] = l * self.noise / (self.power * l + self.noise);
            self.fill_count[sel.n_t + j * n_t] += 1;
        }
    }
}

/// Per-pilot precoders `v_q` and combiners `W_q`; `X_q = v_q^* ⊗ W_q`.
///
/// Combiners are orthonormal for every design except hybrid ones, where
/// `W_q = A_q D_q`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationPlan {
    pub power: f64,
    pub precoders: Vec<CVector>,
    pub combiners: Vec<CMatrix>,
    /// Eigenpair choices for eigenvector-based designs, empty otherwise.
    pub selections: Vec<Selection>,
}

impl ObservationPlan {
    pub fn n_pilots(&self) -> usize {
        self.precoders.len()
    }

    pub fn n_t(&self) -> usize {
        self.precoders.first().map_or(0, |v| v.len())
    }

    pub fn n_r(&self) -> usize {
        self.combiners.first().map_or(0, |w| w.nrows())
    }

    /// Total number of scalar observations `Σ_q cols(W_q)`.
    pub fn n_obs(&self) -> usize {
        self.combiners.iter().map(|w| w.ncols()).sum()
    }

    /// `X_q = v_q^* ⊗ W_q`.
    pub fn block(&self, q: usize) -> CMatrix {
        let v = &self.precoders[q];
        let vc = CMatrix::from_iterator(v.len(), 1, v.iter().map(|z| z.conj()));
        kron(&vc, &self.combiners[q])
    }

    /// Stacked observation matrix `[X_1, …, X_Q]`.
    pub fn obs_matrix(&self) -> CMatrix {
        let rows = self.n_t() * self.n_r();
        let mut x = CMatrix::zeros(rows, self.n_obs());
        let mut col = 0;
        for q in 0..self.n_pilots() {
            let b = self.block(q);
            x.view_mut((0, col), b.shape()).copy_from(&b);
            col += b.ncols();
        }
        x
    }

    /// `blkdiag(W_q^H W_q)`, the noise covariance for `σ² = 1`.
    pub fn noise_shape(&self) -> CMatrix {
        let blocks: Vec<CMatrix> = self.combiners.iter().map(|w| w.adjoint() * w).collect();
        block_diag(&blocks)
    }

    pub fn with_orthonormal_combiners(&self) -> Result<Self> {
        let combiners = self
            .combiners
            .iter()
            .map(crate::numkit::orthonormalize)
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            combiners,
            ..self.clone()
        })
    }

    /// Largest deviation of `‖v_q‖²` from `P` and of `W_q^H W_q` from `I`.
    pub fn feasibility_defects(&self) -> (f64, f64) {
        let power = self
            .precoders
            .iter()
            .map(|v| (v.norm_squared() - self.power).abs())
            .fold(0.0, f64::max);
        let ortho = self
            .combiners
            .iter()
            .map(|w| {
                let g = w.adjoint() * w - CMatrix::identity(w.ncols(), w.ncols());
                crate::numkit::frobenius(&g)
            })
            .fold(0.0, f64::max);
        (power, ortho)
    }

    pub(crate) fn from_selections(
        kernel: &CovKernel,
        power: f64,
        selections: Vec<Selection>,
    ) -> Self {
        let a = &kernel.evd_t().basis;
        let b = &kernel.evd_r().basis;
        let root = c(power.sqrt(), 0.0);
        let mut precoders = Vec::with_capacity(selections.len());
        let mut combiners = Vec::with_capacity(selections.len());
        for sel in &selections {
            precoders.push(a.column(sel.n_t).map(|z| z.conj() * root));
            let mut w = CMatrix::zeros(b.nrows(), sel.n_r.len());
            for (k, &j) in sel.n_r.iter().enumerate() {
                w.set_column(k, &b.column(j));
            }
            combiners.push(w);
        }
        Self {
            power,
            precoders,
            combiners,
            selections,
        }
    }
}

/// Runs the greedy design for `pilots` pilots and returns the plan with the final table.
pub fn design_2dif_with_table(
    kernel: &CovKernel,
    pilots: usize,
    n_rf: usize,
    power: f64,
    noise: f64,
) -> Result<(ObservationPlan, IceTable)> {
    if n_rf == 0 {
        return Err(Error::InvalidArgument(
            "at least one RF chain is required".into(),
        ));
    }
    if n_rf > kernel.n_r() {
        return Err(Error::TooManyChains {
            n_rf,
            n_r: kernel.n_r(),
        });
    }
    let mut table = IceTable::new(kernel, power, noise)?;
    let mut selections = Vec::with_capacity(pilots);
    for _ in 0..pilots {
        let sel = table.select(n_rf)?;
        table.fill(&sel);
        selections.push(sel);
    }
    Ok((
        ObservationPlan::from_selections(kernel, power, selections),
        table,
    ))
}

/// MI-greedy eigenvector plan: `v_q = √P·a*_{n_T}`, `W_q = [b_{n_R,1}, …, b_{n_R,N_RF}]`.
pub fn design_2dif(
    kernel: &CovKernel,
    pilots: usize,
    n_rf: usize,
    power: f64,
    noise: f64,
) -> Result<ObservationPlan> {
    design_2dif_with_table(kernel, pilots, n_rf, power, noise).map(|(plan, _)| plan)
}
