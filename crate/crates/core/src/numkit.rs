//! Dense complex linear algebra shared by the rest of the crate.
//!
//! Matrices are `nalgebra` column-major `DMatrix<Complex64>`. The vectorisation
//! `vec(H)` used throughout is therefore just the backing slice of `H`, and the
//! Kronecker ordering `Σ_T ⊗ Σ_R` indexes `vec(H)` as `n_t * N_R + n_r`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen, SVD};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;
pub type RMatrix = DMatrix<f64>;

/// Relative asymmetry above which `herm_eig` refuses its input.
pub const HERMITIAN_TOL: f64 = 1e-6;
/// Negative eigenvalues within this fraction of the largest are treated as zero.
pub const PSD_CLIP: f64 = 1e-10;
/// Negative eigenvalues beyond this fraction of the largest are an error.
pub const PSD_REJECT: f64 = 1e-6;

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Eigendecomposition of a Hermitian matrix with eigenvalues sorted descending.
#[derive(Debug, Clone)]
pub struct HermitianEvd {
    /// Unitary matrix whose columns are the eigenvectors.
    pub basis: CMatrix,
    /// Real eigenvalues, non-increasing.
    pub eigenvalues: Vec<f64>,
}

impl HermitianEvd {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn vector(&self, i: usize) -> CVector {
        self.basis.column(i).into_owned()
    }

    pub fn reconstruct(&self) -> CMatrix {
        let n = self.dim();
        let mut scaled = self.basis.clone();
        for j in 0..n {
            let l = self.eigenvalues[j];
            scaled.column_mut(j).iter_mut().for_each(|z| *z *= l);
        }
        scaled * self.basis.adjoint()
    }

    pub fn largest(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }
}

pub fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `‖a − b‖_F / ‖b‖_F`, falling back to the absolute error when `b` is zero.
pub fn rel_frobenius_error(a: &CMatrix, b: &CMatrix) -> f64 {
    let diff = frobenius(&(a - b));
    let scale = frobenius(b);
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

pub fn trace_re(m: &CMatrix) -> f64 {
    m.diagonal().iter().map(|z| z.re).sum()
}

fn require_square(m: &CMatrix) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::NonSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(())
}

/// Hermitian eigendecomposition, eigenvalues sorted descending.
///
/// The input is symmetrised as `(m + m^H)/2` first. Equal eigenvalues keep the
/// solver's order (stable sort).
pub fn herm_eig(m: &CMatrix) -> Result<HermitianEvd> {
    require_square(m)?;
    let n = m.nrows();
    if n == 0 {
        return Ok(HermitianEvd {
            basis: CMatrix::zeros(0, 0),
            eigenvalues: vec![],
        });
    }
    let norm = frobenius(m);
    let defect = frobenius(&(m - m.adjoint()));
    if norm > 0.0 && defect > HERMITIAN_TOL * norm {
        return Err(Error::NotHermitian {
            defect: defect / norm,
        });
    }
    let sym = hermitian_part(m);
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut basis = CMatrix::zeros(n, n);
    let mut eigenvalues = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        basis.set_column(dst, &eig.eigenvectors.column(src));
        eigenvalues.push(eig.eigenvalues[src]);
    }
    Ok(HermitianEvd { basis, eigenvalues })
}

/// Clip slightly negative eigenvalues of a Hermitian matrix.
///
/// Eigenvalues below `-reject·λ_max` are an error; anything else negative is
/// set to zero and the matrix rebuilt.
pub fn clip_psd(m: &CMatrix, reject: f64) -> Result<CMatrix> {
    let evd = herm_eig(m)?;
    let largest = evd.largest().max(0.0);
    let smallest = evd.eigenvalues.last().copied().unwrap_or(0.0);
    if smallest >= 0.0 {
        return Ok(hermitian_part(m));
    }
    if smallest < -reject * largest {
        return Err(Error::NotPsd {
            eigenvalue: smallest,
            largest,
        });
    }
    let clipped = HermitianEvd {
        eigenvalues: evd.eigenvalues.iter().map(|&l| l.max(0.0)).collect(),
        basis: evd.basis,
    };
    Ok(clipped.reconstruct())
}

/// Hermitian square root of a PSD matrix.
pub fn psd_sqrt(m: &CMatrix) -> Result<CMatrix> {
    let evd = herm_eig(m)?;
    let largest = evd.largest().max(0.0);
    let mut roots = Vec::with_capacity(evd.dim());
    for &l in &evd.eigenvalues {
        if l < -PSD_REJECT * largest {
            return Err(Error::NotPsd {
                eigenvalue: l,
                largest,
            });
        }
        // Eigenvalues at rounding level are zero; their square roots would not be.
        roots.push(if l > 64.0 * f64::EPSILON * largest {
            l.sqrt()
        } else {
            0.0
        });
    }
    Ok(HermitianEvd {
        basis: evd.basis,
        eigenvalues: roots,
    }
    .reconstruct())
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = CMatrix::zeros(ar * br, ac * bc);
    for j in 0..ac {
        for i in 0..ar {
            let s = a[(i, j)];
            if s == Complex64::new(0.0, 0.0) {
                continue;
            }
            let mut block = out.view_mut((i * br, j * bc), (br, bc));
            block.zip_apply(b, |dst, src| *dst = s * src);
        }
    }
    out
}

/// Orthonormal basis for the column span of `w` (the polar factor `U V^H`).
///
/// An already orthonormal input is returned unchanged up to rounding.
pub fn orthonormalize(w: &CMatrix) -> Result<CMatrix> {
    let (rows, cols) = w.shape();
    if rows < cols {
        return Err(Error::RankDeficient { rank: rows, cols });
    }
    if cols == 0 {
        return Ok(w.clone());
    }
    let svd = SVD::new(w.clone(), true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| smax > 0.0 && s > 1e-10 * smax)
        .count();
    if rank < cols {
        return Err(Error::RankDeficient { rank, cols });
    }
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^H");
    Ok(u * v_t)
}

/// Draws a `rows × cols` matrix of i.i.d. `CN(0, 1)` entries.
pub fn sample_complex_gaussian<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c(re * scale, im * scale)
    })
}

/// Seeded variant of [`sample_complex_gaussian`]; identical output for identical seeds.
pub fn sample_complex_gaussian_seeded(rows: usize, cols: usize, seed: u64) -> CMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_complex_gaussian(rows, cols, &mut rng)
}

/// Column-major vectorisation `vec(m)`.
pub fn vectorize(m: &CMatrix) -> CVector {
    CVector::from_column_slice(m.as_slice())
}

/// Inverse of [`vectorize`].
pub fn unvectorize(v: &CVector, rows: usize, cols: usize) -> CMatrix {
    assert_eq!(v.len(), rows * cols, "vector length does not match shape");
    CMatrix::from_column_slice(rows, cols, v.as_slice())
}

/// Cholesky factor of a Hermitian positive definite matrix, symmetrised first.
pub fn cholesky(m: &CMatrix) -> Option<Cholesky<Complex64, Dyn>> {
    Cholesky::new(hermitian_part(m))
}

/// `ln det` of a Hermitian positive definite matrix via its Cholesky factor.
pub fn ln_det_hpd(chol: &Cholesky<Complex64, Dyn>) -> f64 {
    chol.l_dirty()
        .diagonal()
        .iter()
        .map(|z| 2.0 * z.re.ln())
        .sum()
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn from_real(m: &RMatrix) -> CMatrix {
    m.map(|x| c(x, 0.0))
}

/// Block-diagonal matrix assembled from square blocks.
pub fn block_diag(blocks: &[CMatrix]) -> CMatrix {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let m: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = CMatrix::zeros(n, m);
    let (mut r, mut cc) = (0, 0);
    for b in blocks {
        out.view_mut((r, cc), b.shape()).copy_from(b);
        r += b.nrows();
        cc += b.ncols();
    }
    out
}
