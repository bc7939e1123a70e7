//! Symmetric eigendecomposition via cyclic Jacobi rotations.

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

/// Eigendecomposition `A = V * diag(values) * V^T` of a symmetric matrix.
/// Eigenvalues are sorted in non-increasing order; column `j` of `vectors`
/// is the eigenvector for `values[j]`.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: DenseMatrix,
}

const DEFAULT_MAX_SWEEPS: usize = 64;

/// Decomposes a symmetric matrix. Symmetry is checked up to a small
/// relative slack; violations are a precondition error.
pub fn sym_eigen(a: &DenseMatrix) -> Result<SymEigen> {
    sym_eigen_with(a, DEFAULT_MAX_SWEEPS)
}

pub fn sym_eigen_with(a: &DenseMatrix, max_sweeps: usize) -> Result<SymEigen> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::shape(
            "sym_eigen",
            "square matrix",
            format!("{}x{}", a.rows(), a.cols()),
        ));
    }
    let scale = a.max_abs();
    for i in 0..n {
        for j in (i + 1)..n {
            if (a.get(i, j) - a.get(j, i)).abs() > 1e-8 * scale.max(1e-300) {
                return Err(Error::PreconditionViolation(format!(
                    "matrix is not symmetric at ({i},{j})"
                )));
            }
        }
    }

    // Work on a symmetrized copy so tiny asymmetries cannot bias rotations.
    let mut m = vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..n {
            m[i * n + j] = 0.5 * (a.get(i, j) + a.get(j, i));
        }
    }
    let mut v = vec![0.0f64; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    let fro: f64 = m.iter().map(|x| x * x).sum::<f64>().sqrt();
    let target = 1e-14 * fro.max(1e-300);

    let mut converged = fro == 0.0;
    for _sweep in 0..max_sweeps {
        if converged {
            break;
        }
        let off: f64 = {
            let mut s = 0.0;
            for i in 0..n {
                for j in (i + 1)..n {
                    s += 2.0 * m[i * n + j] * m[i * n + j];
                }
            }
            s.sqrt()
        };
        if off <= target {
            converged = true;
            break;
        }
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                if apq.abs() <= 1e-16 * (app.abs() + aqq.abs()).max(1e-300) {
                    continue;
                }
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        // One final check: the sweep loop may have finished the job on its
        // last pass without re-entering the test above.
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += 2.0 * m[i * n + j] * m[i * n + j];
            }
        }
        if off.sqrt() > target {
            return Err(Error::NumericalFailure(format!(
                "jacobi eigensolver did not converge within {max_sweeps} sweeps"
            )));
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&p, &q| {
        m[q * n + q]
            .partial_cmp(&m[p * n + p])
            .expect("finite eigenvalues")
            .then(p.cmp(&q))
    });
    let values: Vec<f64> = order.iter().map(|&j| m[j * n + j]).collect();
    let vectors = DenseMatrix::from_fn(n, n, |i, j| v[i * n + order[j]])?;
    Ok(SymEigen { values, vectors })
}
