//! Singular value decomposition via one-sided Jacobi.
//!
//! One-sided Jacobi orthogonalizes the columns of the working matrix with
//! plane rotations. It is slower than bidiagonalization for huge matrices but
//! deterministic (fixed cyclic pair order, no shifts), accurate to high
//! relative precision, and free of external dependencies, which is what the
//! reproducibility contract of this crate needs.

use crate::error::{Error, Result};
use crate::matrix::{vec_dot, DenseMatrix};

/// Thin SVD `A = U * diag(sigma) * V^T` truncated to the numerical rank.
///
/// `sigma` is strictly positive and non-increasing; `u` is rows x rank and
/// `v` is cols x rank, both with orthonormal columns.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    pub u: DenseMatrix,
    pub sigma: Vec<f64>,
    pub v: DenseMatrix,
    /// Relative tolerance used for the rank decision.
    pub rank_tolerance: f64,
}

impl SvdFactors {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    /// `U * diag(sigma) * V^T`.
    pub fn reconstruct(&self) -> DenseMatrix {
        let us = scale_columns(&self.u, &self.sigma);
        us.mul_t(&self.v).expect("factor shapes are consistent")
    }

    /// First `k` columns of `u` (`k <= rank`).
    pub fn u_leading(&self, k: usize) -> DenseMatrix {
        take_columns(&self.u, k)
    }

    /// First `k` columns of `v` (`k <= rank`).
    pub fn v_leading(&self, k: usize) -> DenseMatrix {
        take_columns(&self.v, k)
    }
}

/// Multiplies column `j` of `m` by `s[j]`.
pub(crate) fn scale_columns(m: &DenseMatrix, s: &[f64]) -> DenseMatrix {
    debug_assert_eq!(m.cols(), s.len());
    DenseMatrix::from_fn(m.rows(), m.cols(), |i, j| m.get(i, j) * s[j])
        .expect("scaled entries stay finite")
}

pub(crate) fn take_columns(m: &DenseMatrix, k: usize) -> DenseMatrix {
    assert!(k >= 1 && k <= m.cols(), "column count {k} out of range");
    DenseMatrix::from_fn(m.rows(), k, |i, j| m.get(i, j)).expect("submatrix entries are finite")
}

/// Default relative rank tolerance: `max(rows, cols) * machine epsilon`.
pub fn default_rank_tol(rows: usize, cols: usize) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON
}

/// Iteration cap used by [`svd`]; generous, Jacobi typically needs < 15 sweeps.
pub const DEFAULT_MAX_SWEEPS: usize = 64;

/// Off-diagonal threshold: a column pair counts as orthogonal when
/// `|<wi, wj>| <= JACOBI_ORTH_TOL * ||wi|| * ||wj||`.
const JACOBI_ORTH_TOL: f64 = 1.0e-15;

/// Computes the thin SVD with the rank cut at `tol * sigma_max`.
pub fn svd(a: &DenseMatrix, tol: f64) -> Result<SvdFactors> {
    svd_with(a, tol, DEFAULT_MAX_SWEEPS)
}

/// [`svd`] with the default rank tolerance for `a`'s shape.
pub fn svd_default(a: &DenseMatrix) -> Result<SvdFactors> {
    svd(a, default_rank_tol(a.rows(), a.cols()))
}

/// Computes the thin SVD with an explicit sweep cap.
pub fn svd_with(a: &DenseMatrix, tol: f64, max_sweeps: usize) -> Result<SvdFactors> {
    if !(tol >= 0.0 && tol < 1.0) {
        return Err(Error::InvalidQuery(format!(
            "rank tolerance must lie in [0, 1), got {tol}"
        )));
    }
    if a.is_zero() {
        return Err(Error::NoSpectrum("zero matrix has no singular values"));
    }
    if a.rows() >= a.cols() {
        svd_tall(a, tol, max_sweeps, false)
    } else {
        svd_tall(&a.transpose(), tol, max_sweeps, true)
    }
}

/// Jacobi on a tall matrix (rows >= cols); `swapped` means the caller passed
/// the transpose and U/V must be exchanged in the output.
fn svd_tall(a: &DenseMatrix, tol: f64, max_sweeps: usize, swapped: bool) -> Result<SvdFactors> {
    let n = a.rows();
    let m = a.cols();

    // Column-major working copies keep each rotation on contiguous slices.
    let mut w = vec![0.0f64; n * m];
    for i in 0..n {
        let row = a.row(i);
        for j in 0..m {
            w[j * n + i] = row[j];
        }
    }
    let mut v = vec![0.0f64; m * m];
    for j in 0..m {
        v[j * m + j] = 1.0;
    }

    let mut sq_norms: Vec<f64> = (0..m).map(|j| vec_dot(&w[j * n..(j + 1) * n], &w[j * n..(j + 1) * n])).collect();

    let mut converged = false;
    for _sweep in 0..max_sweeps {
        // Refresh cached norms once per sweep to stop incremental drift.
        for j in 0..m {
            let col = &w[j * n..(j + 1) * n];
            sq_norms[j] = vec_dot(col, col);
        }
        let mut rotated = 0usize;
        for i in 0..m.saturating_sub(1) {
            for j in (i + 1)..m {
                let sq_i = sq_norms[i];
                let sq_j = sq_norms[j];
                if sq_i == 0.0 || sq_j == 0.0 {
                    continue;
                }
                let b = vec_dot(&w[i * n..(i + 1) * n], &w[j * n..(j + 1) * n]);
                if b.abs() <= JACOBI_ORTH_TOL * (sq_i * sq_j).sqrt() {
                    continue;
                }
                let zeta = (sq_j - sq_i) / (2.0 * b);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                rotate_pair(&mut w, n, i, j, cs, sn);
                rotate_pair(&mut v, m, i, j, cs, sn);
                sq_norms[i] = sq_i - t * b;
                sq_norms[j] = sq_j + t * b;
                rotated += 1;
            }
        }
        if rotated == 0 {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NumericalFailure(format!(
            "jacobi svd did not converge within {max_sweeps} sweeps"
        )));
    }

    let mut sigma: Vec<f64> = (0..m)
        .map(|j| {
            let col = &w[j * n..(j + 1) * n];
            vec_dot(col, col).sqrt()
        })
        .collect();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&p, &q| sigma[q].partial_cmp(&sigma[p]).expect("finite norms").then(p.cmp(&q)));

    let sigma_max = sigma[order[0]];
    if sigma_max == 0.0 {
        return Err(Error::NoSpectrum("zero matrix has no singular values"));
    }
    let cutoff = tol * sigma_max;
    let rank = order.iter().take_while(|&&j| sigma[j] > cutoff).count().max(1);
    let kept: Vec<usize> = order[..rank].to_vec();
    sigma.sort_by(|a, b| b.partial_cmp(a).expect("finite norms"));
    sigma.truncate(rank);

    let mut u_entries = vec![0.0f64; n * rank];
    for (out_j, &src_j) in kept.iter().enumerate() {
        let col = &w[src_j * n..(src_j + 1) * n];
        let inv = 1.0 / sigma[out_j];
        for i in 0..n {
            u_entries[i * rank + out_j] = col[i] * inv;
        }
    }
    let mut v_entries = vec![0.0f64; m * rank];
    for (out_j, &src_j) in kept.iter().enumerate() {
        let col = &v[src_j * m..(src_j + 1) * m];
        for i in 0..m {
            v_entries[i * rank + out_j] = col[i];
        }
    }
    let u = DenseMatrix::from_vec(n, rank, u_entries)?;
    let v = DenseMatrix::from_vec(m, rank, v_entries)?;

    let (u, v) = if swapped { (v, u) } else { (u, v) };
    Ok(SvdFactors {
        u,
        sigma,
        v,
        rank_tolerance: tol,
    })
}

/// Applies the rotation to columns `i` and `j` of a column-major buffer with
/// column length `len`.
#[inline]
fn rotate_pair(buf: &mut [f64], len: usize, i: usize, j: usize, cs: f64, sn: f64) {
    debug_assert!(i < j);
    let (left, right) = buf.split_at_mut(j * len);
    let ci = &mut left[i * len..(i + 1) * len];
    let cj = &mut right[..len];
    for (x, y) in ci.iter_mut().zip(cj.iter_mut()) {
        let xi = *x;
        let yj = *y;
        *x = cs * xi - sn * yj;
        *y = sn * xi + cs * yj;
    }
}
