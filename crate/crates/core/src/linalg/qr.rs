//! Householder QR, with and without column pivoting.

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

/// Compact QR factorization state. The working buffer is column-major;
/// reflector `k` is stored below the diagonal of column `perm_order` k with
/// the implicit leading 1, and R occupies the upper triangle.
struct QrCompact {
    w: Vec<f64>,
    betas: Vec<f64>,
    perm: Vec<usize>,
    rank: usize,
    rows: usize,
}

fn factor(a: &DenseMatrix, pivot: bool, rel_tol: f64) -> QrCompact {
    let n = a.rows();
    let m = a.cols();
    let steps = n.min(m);

    let mut w = vec![0.0f64; n * m];
    for i in 0..n {
        let row = a.row(i);
        for (j, &v) in row.iter().enumerate() {
            w[j * n + i] = v;
        }
    }
    let mut perm: Vec<usize> = (0..m).collect();
    let mut betas = vec![0.0f64; steps];
    let mut rank = 0usize;
    let mut first_norm = 0.0f64;

    for k in 0..steps {
        if pivot {
            // Fresh tail norms each step: O(nm) extra work total per step,
            // cheap at the sizes this crate handles and immune to downdating
            // cancellation.
            let mut best = k;
            let mut best_norm = -1.0;
            for j in k..m {
                let col = &w[j * n + k..j * n + n];
                let norm: f64 = col.iter().map(|v| v * v).sum();
                if norm > best_norm {
                    best_norm = norm;
                    best = j;
                }
            }
            if best != k {
                for i in 0..n {
                    w.swap(best * n + i, k * n + i);
                }
                perm.swap(best, k);
            }
        }

        let col_norm: f64 = {
            let col = &w[k * n + k..k * n + n];
            col.iter().map(|v| v * v).sum::<f64>().sqrt()
        };
        if k == 0 {
            first_norm = col_norm;
        }
        if col_norm == 0.0 || (k > 0 && col_norm <= rel_tol * first_norm) {
            break;
        }

        // Householder vector for rows k..n of column k.
        let x0 = w[k * n + k];
        let alpha = if x0 >= 0.0 { -col_norm } else { col_norm };
        w[k * n + k] = x0 - alpha;
        let vnorm_sq: f64 = {
            let col = &w[k * n + k..k * n + n];
            col.iter().map(|v| v * v).sum()
        };
        let beta = 2.0 / vnorm_sq;
        betas[k] = beta;

        // Apply to trailing columns.
        for j in (k + 1)..m {
            let mut dot = 0.0;
            for i in k..n {
                dot += w[k * n + i] * w[j * n + i];
            }
            let scale = beta * dot;
            for i in k..n {
                w[j * n + i] -= scale * w[k * n + i];
            }
        }
        // Stash R_kk; the reflector tail stays below the diagonal.
        let v_head = w[k * n + k];
        w[k * n + k] = alpha;
        // Normalize the stored reflector so its head is implicit 1.
        if v_head != 0.0 {
            for i in (k + 1)..n {
                w[k * n + i] /= v_head;
            }
            betas[k] = beta * v_head * v_head;
        }
        rank = k + 1;
    }

    QrCompact {
        w,
        betas,
        perm,
        rank,
        rows: n,
    }
}

impl QrCompact {
    /// Applies `Q^T` to a vector in place.
    fn apply_qt(&self, x: &mut [f64]) {
        let n = self.rows;
        for k in 0..self.rank {
            let mut dot = x[k];
            for i in (k + 1)..n {
                dot += self.w[k * n + i] * x[i];
            }
            let scale = self.betas[k] * dot;
            x[k] -= scale;
            for i in (k + 1)..n {
                x[i] -= scale * self.w[k * n + i];
            }
        }
    }

    /// Thin Q: the first `self.rank` orthonormal columns.
    fn thin_q(&self) -> DenseMatrix {
        let n = self.rows;
        let r = self.rank;
        let mut q = vec![0.0f64; n * r];
        for c in 0..r {
            let mut e = vec![0.0f64; n];
            e[c] = 1.0;
            for k in (0..r).rev() {
                let mut dot = e[k];
                for i in (k + 1)..n {
                    dot += self.w[k * n + i] * e[i];
                }
                let scale = self.betas[k] * dot;
                e[k] -= scale;
                for i in (k + 1)..n {
                    e[i] -= scale * self.w[k * n + i];
                }
            }
            for i in 0..n {
                q[i * r + c] = e[i];
            }
        }
        DenseMatrix::from_vec(n, r, q).expect("orthonormal columns are finite")
    }

    fn r_diag(&self, k: usize) -> f64 {
        self.w[k * self.rows + k]
    }
}

/// Absolute R diagonal of the unpivoted QR of `a`, one entry per elimination
/// step taken (the factorization stops at an exactly zero reduced column).
/// The leading `k` columns of `a` have full column rank exactly when the
/// first `k` entries are present and positive at the caller's tolerance.
pub fn qr_diagonal(a: &DenseMatrix) -> Vec<f64> {
    let f = factor(a, false, 0.0);
    (0..f.rank).map(|k| f.r_diag(k).abs()).collect()
}

/// Orthonormal basis for the column space of `a` via plain QR, with the sign
/// of each column fixed so the corresponding R diagonal is positive. Requires
/// `a` to have full column rank.
pub fn orthonormal_columns(a: &DenseMatrix) -> Result<DenseMatrix> {
    if a.rows() < a.cols() {
        return Err(Error::shape(
            "orthonormal_columns",
            "rows >= cols",
            format!("{}x{}", a.rows(), a.cols()),
        ));
    }
    let f = factor(a, false, 0.0);
    if f.rank < a.cols() {
        return Err(Error::NumericalFailure(format!(
            "input is rank deficient: rank {} < {} columns",
            f.rank,
            a.cols()
        )));
    }
    let mut q = f.thin_q();
    for j in 0..q.cols() {
        if f.r_diag(j) < 0.0 {
            for i in 0..q.rows() {
                let v = q.get(i, j);
                q.set(i, j, -v);
            }
        }
    }
    Ok(q)
}

/// Orthonormal rows spanning the row space of `a`, computed by pivoted QR on
/// `a^T` with the numerical rank cut at `rel_tol` relative to the leading
/// R diagonal. Errors with `NoSpectrum` on a zero matrix.
pub fn rowspace_basis(a: &DenseMatrix, rel_tol: f64) -> Result<DenseMatrix> {
    if a.is_zero() {
        return Err(Error::NoSpectrum("zero matrix has an empty row space"));
    }
    let f = factor(&a.transpose(), true, rel_tol);
    Ok(f.thin_q().transpose())
}

/// Least-squares solve of `min ||a x - rhs||` for every column of `rhs` via
/// QR with column pivoting. Returns `None` when `a` is numerically
/// rank-deficient at `rel_tol`, in which case the caller should fall back to
/// a pseudo-inverse solve.
pub fn lstsq_full_rank(a: &DenseMatrix, rhs: &DenseMatrix, rel_tol: f64) -> Result<Option<DenseMatrix>> {
    if rhs.rows() != a.rows() {
        return Err(Error::shape(
            "lstsq_full_rank",
            format!("rhs with {} rows", a.rows()),
            format!("{}", rhs.rows()),
        ));
    }
    if a.rows() < a.cols() {
        return Ok(None);
    }
    let m = a.cols();
    let f = factor(a, true, rel_tol);
    if f.rank < m {
        return Ok(None);
    }
    let mut x = DenseMatrix::zeros(m, rhs.cols())?;
    let mut col = vec![0.0f64; a.rows()];
    for c in 0..rhs.cols() {
        for i in 0..a.rows() {
            col[i] = rhs.get(i, c);
        }
        f.apply_qt(&mut col);
        // Back-substitute the rank x rank upper triangle.
        let mut y = vec![0.0f64; m];
        for k in (0..m).rev() {
            let mut acc = col[k];
            for j in (k + 1)..m {
                acc -= f.w[j * f.rows + k] * y[j];
            }
            y[k] = acc / f.r_diag(k);
        }
        for k in 0..m {
            x.set(f.perm[k], c, y[k]);
        }
    }
    Ok(Some(x))
}
