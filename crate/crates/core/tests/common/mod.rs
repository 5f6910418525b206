//! Reference implementations used as oracles: dense, slow and written
//! without the library's own helpers where that matters.
#![allow(dead_code)]

use densemimo::kernels::{laplace_kernel, ArrayGeometry, CovKernel};
use densemimo::numkit::{CMatrix, CVector};
use num_complex::Complex64;

pub fn laplace(n_t: usize, n_r: usize, spacing: f64, eta: f64) -> CovKernel {
    let g = |n| ArrayGeometry::new(n, spacing).unwrap();
    CovKernel::new(laplace_kernel(&g(n_t), eta), laplace_kernel(&g(n_r), eta)).unwrap()
}

/// `A ⊗ B` by explicit index arithmetic.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (p, q) = b.shape();
    CMatrix::from_fn(a.nrows() * p, a.ncols() * q, |i, j| {
        a[(i / p, j / q)] * b[(i % p, j % q)]
    })
}

pub fn dense(kernel: &CovKernel) -> CMatrix {
    kron(kernel.sigma_t(), kernel.sigma_r())
}

/// `log2 det(Ξ + X^H Σ X) − log2 det(Ξ)` through LU determinants.
pub fn mi_bits(sigma: &CMatrix, x: &CMatrix, xi: &CMatrix) -> f64 {
    let g = x.adjoint() * sigma * x + xi;
    (g.determinant().re.ln() - xi.determinant().re.ln()) / std::f64::consts::LN_2
}

/// Stacks `X_q = v_q^* ⊗ W_q` column-blockwise.
pub fn obs_matrix(precoders: &[CVector], combiners: &[CMatrix]) -> CMatrix {
    let blocks: Vec<CMatrix> = precoders
        .iter()
        .zip(combiners)
        .map(|(v, w)| {
            kron(
                &CMatrix::from_column_slice(v.len(), 1, v.as_slice()).map(|z| z.conj()),
                w,
            )
        })
        .collect();
    let rows = blocks[0].nrows();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut x = CMatrix::zeros(rows, cols);
    let mut at = 0;
    for b in &blocks {
        x.view_mut((0, at), b.shape()).copy_from(b);
        at += b.ncols();
    }
    x
}

pub fn block_diag(blocks: &[CMatrix]) -> CMatrix {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = CMatrix::zeros(n, n);
    let mut at = 0;
    for b in blocks {
        out.view_mut((at, at), b.shape()).copy_from(b);
        at += b.nrows();
    }
    out
}

/// Information gained by one pilot on receive cells `cols` of row `row`.
pub fn cell_bits(lambdas: &[Vec<f64>], row: usize, cols: &[usize], power: f64, noise: f64) -> f64 {
    cols.iter()
        .map(|&j| (1.0 + power * lambdas[row][j] / noise).log2())
        .sum()
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Exhaustive search over (row, receive subset); returns the best value and
/// every maximiser within `tol`.
pub fn brute_force_select(
    lambdas: &[Vec<f64>],
    n_rf: usize,
    power: f64,
    noise: f64,
    tol: f64,
) -> (f64, Vec<(usize, Vec<usize>)>) {
    let n_r = lambdas[0].len();
    let mut scored = Vec::new();
    for row in 0..lambdas.len() {
        for cols in subsets(n_r, n_rf) {
            scored.push((cell_bits(lambdas, row, &cols, power, noise), row, cols));
        }
    }
    let best = scored.iter().map(|s| s.0).fold(f64::NEG_INFINITY, f64::max);
    let winners = scored
        .into_iter()
        .filter(|s| s.0 >= best - tol)
        .map(|(_, r, c)| (r, c))
        .collect();
    (best, winners)
}

/// Water filling by the sorted active-set formula: with levels `ℓ` ascending
/// and `k` active, `β = (total + Σ_{i<k} ℓ_i)/k`.
pub fn water_level_sorted(levels: &[f64], total: f64) -> f64 {
    let mut l: Vec<f64> = levels.iter().copied().filter(|x| x.is_finite()).collect();
    l.sort_by(f64::total_cmp);
    let mut beta = f64::NAN;
    for k in 1..=l.len() {
        let b = (total + l[..k].iter().sum::<f64>()) / k as f64;
        if k == l.len() || b <= l[k] {
            beta = b;
            break;
        }
    }
    beta
}

pub fn fro(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn cz(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
