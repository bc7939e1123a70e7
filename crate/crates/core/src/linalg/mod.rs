//! Deterministic dense linear algebra: SVD, symmetric eigen, QR, spectral
//! functionals, and projection helpers used by the sketching modules.

mod eigen;
mod qr;
mod svd;

pub use eigen::{sym_eigen, sym_eigen_with, SymEigen};
pub use qr::{lstsq_full_rank, orthonormal_columns, qr_diagonal, rowspace_basis};
pub use svd::{default_rank_tol, svd, svd_default, svd_with, SvdFactors, DEFAULT_MAX_SWEEPS};

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::rng::SeedStream;

pub(crate) use svd::{scale_columns, take_columns};

/// Frobenius norm.
pub fn frobenius_norm(a: &DenseMatrix) -> f64 {
    a.entries().iter().map(|&v| v * v).sum::<f64>().sqrt()
}

/// Dimension threshold below which `spectral_norm` uses a full SVD; above it,
/// power iteration on the Gram operator takes over.
const SPECTRAL_NORM_SVD_LIMIT: usize = 512;
const POWER_ITER_REL_TOL: f64 = 1e-10;
const POWER_ITER_CAP: usize = 10_000;

/// Largest singular value. Exact (full SVD) when the smaller dimension is at
/// most 512; power iteration on `A^T A` otherwise.
pub fn spectral_norm(a: &DenseMatrix) -> Result<f64> {
    if a.is_zero() {
        return Ok(0.0);
    }
    if a.rows().min(a.cols()) <= SPECTRAL_NORM_SVD_LIMIT {
        let f = svd_default(a)?;
        return Ok(f.sigma[0]);
    }
    gram_power_iteration(a)
}

fn gram_power_iteration(a: &DenseMatrix) -> Result<f64> {
    let mut stream = SeedStream::new(0x5350_4543);
    let mut x: Vec<f64> = (0..a.cols()).map(|_| stream.next_gauss()).collect();
    let nx = crate::matrix::vec_norm(&x);
    for v in x.iter_mut() {
        *v /= nx;
    }
    let mut prev = 0.0f64;
    for _ in 0..POWER_ITER_CAP {
        let y = a.mul_vec(&x)?;
        let est = crate::matrix::vec_norm(&y);
        if est == 0.0 {
            return Ok(0.0);
        }
        let z = a.t_mul_vec(&y)?;
        let nz = crate::matrix::vec_norm(&z);
        for (xi, zi) in x.iter_mut().zip(&z) {
            *xi = zi / nz;
        }
        if (est - prev).abs() <= POWER_ITER_REL_TOL * est {
            return Ok(est);
        }
        prev = est;
    }
    Err(Error::NumericalFailure(format!(
        "power iteration did not converge within {POWER_ITER_CAP} iterations"
    )))
}

/// Stable rank `||A||_F^2 / ||A||^2`. Always in `[1, rank(A)]` up to
/// floating-point slack.
pub fn stable_rank(a: &DenseMatrix) -> Result<f64> {
    if a.is_zero() {
        return Err(Error::NoSpectrum("stable rank of the zero matrix is undefined"));
    }
    let f = frobenius_norm(a);
    let s = spectral_norm(a)?;
    Ok((f * f) / (s * s))
}

/// Moore-Penrose pseudo-inverse with singular values below `tol * sigma_max`
/// treated as zero. The zero matrix maps to the zero matrix of transposed
/// shape.
pub fn pseudo_inverse(a: &DenseMatrix, tol: f64) -> Result<DenseMatrix> {
    if a.is_zero() {
        return DenseMatrix::zeros(a.cols(), a.rows());
    }
    let f = svd(a, tol)?;
    let inv: Vec<f64> = f.sigma.iter().map(|&s| 1.0 / s).collect();
    scale_columns(&f.v, &inv).mul_t(&f.u)
}

/// Best rank-`k` approximation (truncated SVD). Returns `a` itself when `k`
/// is at least the numerical rank.
pub fn best_rank_k(a: &DenseMatrix, k: usize) -> Result<DenseMatrix> {
    if k == 0 {
        return Err(Error::InvalidQuery("rank target k must be >= 1".into()));
    }
    if a.is_zero() {
        return Ok(a.clone());
    }
    let f = svd_default(a)?;
    if k >= f.rank() {
        return Ok(a.clone());
    }
    let uk = take_columns(&f.u, k);
    let vk = take_columns(&f.v, k);
    scale_columns(&uk, &f.sigma[..k]).mul_t(&vk)
}

/// Projection of the rows of `a` onto the row space of `c`: `A C^+ C`.
pub fn project_onto_rowspace(a: &DenseMatrix, c: &DenseMatrix) -> Result<DenseMatrix> {
    if a.cols() != c.cols() {
        return Err(Error::shape(
            "project_onto_rowspace",
            format!("{} columns", a.cols()),
            format!("{}", c.cols()),
        ));
    }
    if c.is_zero() {
        return DenseMatrix::zeros(a.rows(), a.cols());
    }
    let q = rowspace_basis(c, default_rank_tol(c.rows(), c.cols()))?;
    a.mul_t(&q)?.mul(&q)
}

/// Best rank-`k` approximation of `a` within the row space of `c`: the
/// truncated SVD of `A C^+ C`, computed through the small projected matrix
/// `A Q^T` rather than the full dense projection.
pub fn project_rank_k(a: &DenseMatrix, c: &DenseMatrix, k: usize) -> Result<DenseMatrix> {
    if k == 0 {
        return Err(Error::InvalidQuery("rank target k must be >= 1".into()));
    }
    if a.cols() != c.cols() {
        return Err(Error::shape(
            "project_rank_k",
            format!("{} columns", a.cols()),
            format!("{}", c.cols()),
        ));
    }
    if c.is_zero() {
        return DenseMatrix::zeros(a.rows(), a.cols());
    }
    let q = rowspace_basis(c, default_rank_tol(c.rows(), c.cols()))?;
    let y = a.mul_t(&q)?;
    if y.is_zero() {
        return DenseMatrix::zeros(a.rows(), a.cols());
    }
    let f = svd_default(&y)?;
    let kk = k.min(f.rank());
    let uk = take_columns(&f.u, kk);
    let vk = take_columns(&f.v, kk);
    let w = vk.transpose().mul(&q)?;
    scale_columns(&uk, &f.sigma[..kk]).mul(&w)
}

/// Smallest strictly positive singular value at rank tolerance `tol`.
pub fn sigma_min_positive(a: &DenseMatrix, tol: f64) -> Result<f64> {
    let f = svd(a, tol)?;
    Ok(*f.sigma.last().expect("rank >= 1"))
}

/// Outcome of a two-sided Rayleigh quotient comparison between `A^T A` and
/// `Atil^T Atil` over the row space of `A`.
#[derive(Debug, Clone)]
pub struct EpsSandwichVerdict {
    /// The eps that was queried.
    pub eps: f64,
    /// Whether `(1-eps) x^T A^T A x <= x^T Atil^T Atil x <= (1+eps) x^T A^T A x`
    /// holds for every direction x.
    pub holds: bool,
    /// Supremum of `|x^T (Atil^T Atil - A^T A) x| / (x^T A^T A x)`, or
    /// `+inf` when the null space of A is not contained in the null space of
    /// Atil.
    pub worst_ratio: f64,
    /// A direction achieving (or witnessing) the worst ratio, unit norm.
    pub witness_direction: Option<Vec<f64>>,
}

/// Tolerance for the null-space containment check, relative to `||Atil||_F`.
const NULL_LEAK_REL_TOL: f64 = 1e-8;

/// Checks the two-sided quadratic-form sandwich. The supremum is computed
/// exactly on the row space of `a` via a symmetric eigenproblem of the
/// conjugated difference `Sigma^-1 V^T (Atil^T Atil - A^T A) V Sigma^-1`;
/// directions outside the row space make the ratio infinite unless `atil`
/// annihilates them too.
pub fn check_rayleigh_sandwich(
    a: &DenseMatrix,
    atil: &DenseMatrix,
    eps: f64,
) -> Result<EpsSandwichVerdict> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidQuery(format!(
            "eps must lie in (0, 1), got {eps}"
        )));
    }
    if a.cols() != atil.cols() {
        return Err(Error::shape(
            "check_rayleigh_sandwich",
            format!("{} columns", a.cols()),
            format!("{}", atil.cols()),
        ));
    }
    if a.is_zero() {
        return Err(Error::NoSpectrum("sandwich base matrix is zero"));
    }
    let f = svd_default(a)?;
    let r = f.rank();
    let m = a.cols();

    // Null-space containment: Atil (I - V V^T) must vanish.
    let av = atil.mul(&f.v)?;
    let leak = atil.sub(&av.mul_t(&f.v)?)?;
    let leak_norm = frobenius_norm(&leak);
    if leak_norm > NULL_LEAK_REL_TOL * frobenius_norm(atil).max(f64::MIN_POSITIVE) {
        // Witness: the row of the leak with the largest norm, normalized. It
        // lies in null(A) but not in null(Atil).
        let mut best = 0;
        let mut best_norm = -1.0;
        for i in 0..leak.rows() {
            let norm = crate::matrix::vec_norm(leak.row(i));
            if norm > best_norm {
                best_norm = norm;
                best = i;
            }
        }
        let mut w = leak.row(best).to_vec();
        for v in w.iter_mut() {
            *v /= best_norm;
        }
        return Ok(EpsSandwichVerdict {
            eps,
            holds: false,
            worst_ratio: f64::INFINITY,
            witness_direction: Some(w),
        });
    }

    // G = Sigma^-1 [ (Atil V)^T (Atil V) - Sigma^2 ] Sigma^-1, an r x r
    // symmetric matrix whose extreme eigenvalue magnitude is the worst ratio.
    let gram = av.t_mul(&av)?;
    let g = DenseMatrix::from_fn(r, r, |i, j| {
        let base = gram.get(i, j) / (f.sigma[i] * f.sigma[j]);
        if i == j {
            base - 1.0
        } else {
            base
        }
    })?;
    let e = sym_eigen(&g)?;
    let hi = e.values[0];
    let lo = e.values[r - 1];
    let (worst, idx) = if hi.abs() >= lo.abs() { (hi.abs(), 0) } else { (lo.abs(), r - 1) };

    // Map the extreme eigenvector w back to x = V Sigma^-1 w, normalized.
    let mut x = vec![0.0f64; m];
    for i in 0..m {
        let mut acc = 0.0;
        for j in 0..r {
            acc += f.v.get(i, j) / f.sigma[j] * e.vectors.get(j, idx);
        }
        x[i] = acc;
    }
    let nx = crate::matrix::vec_norm(&x);
    if nx > 0.0 {
        for v in x.iter_mut() {
            *v /= nx;
        }
    }

    Ok(EpsSandwichVerdict {
        eps,
        holds: worst <= eps,
        worst_ratio: worst,
        witness_direction: Some(x),
    })
}
