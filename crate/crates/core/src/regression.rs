//! Sketch-and-solve least squares: project a tall problem with a sign sketch,
//! solve the small problem, and compare against the exact minimizer.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    default_rank_tol, lstsq_full_rank, pseudo_inverse, sigma_min_positive, svd_default,
};
use crate::matrix::{vec_norm, DenseMatrix};
use crate::sketch::{apply_sketch, SketchOp};

/// Relative tolerance for the pivoted-QR full-rank decision in the small
/// sketched problem.
const QR_RANK_REL_TOL: f64 = 1e-12;

/// A least-squares solution together with its residual norm and provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionSolution {
    pub x: Vec<f64>,
    pub residual_norm: f64,
    pub sketched: bool,
    pub t_used: Option<usize>,
    pub seed: Option<u64>,
}

/// Comparison of a sketched solution against the exact one: residual ratio,
/// coefficient distance, and the distance bound `eps / sigma_min * ||b - A
/// x_opt||`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionReport {
    pub residual_ratio: f64,
    pub solution_distance: f64,
    pub bound_rhs: f64,
    pub passed_approx: bool,
    pub passed_distance: bool,
}

/// Residuals at or below this are treated as exact zeros by the ratio
/// convention.
pub const RESIDUAL_ZERO_TOL: f64 = 1e-12;

fn residual_norm(a: &DenseMatrix, b: &[f64], x: &[f64]) -> Result<f64> {
    let ax = a.mul_vec(x)?;
    if ax.len() != b.len() {
        return Err(Error::shape(
            "residual_norm",
            format!("{} entries", ax.len()),
            format!("{}", b.len()),
        ));
    }
    let diff: Vec<f64> = b.iter().zip(&ax).map(|(&bi, &ai)| bi - ai).collect();
    Ok(vec_norm(&diff))
}

fn solution_from(a: &DenseMatrix, b: &[f64], x: Vec<f64>) -> Result<RegressionSolution> {
    let res = residual_norm(a, b, &x)?;
    Ok(RegressionSolution {
        x,
        residual_norm: res,
        sketched: false,
        t_used: None,
        seed: None,
    })
}

/// The exact minimizer `x = pinv(A) b` of `||Ax - b||`.
pub fn solve_exact(a: &DenseMatrix, b: &[f64]) -> Result<RegressionSolution> {
    if a.rows() != b.len() {
        return Err(Error::shape(
            "solve_exact",
            format!("rhs of length {}", a.rows()),
            format!("{}", b.len()),
        ));
    }
    if a.is_zero() {
        return solution_from(a, b, vec![0.0; a.cols()]);
    }
    let f = svd_default(a)?;
    let r = f.rank();
    // x = V diag(1/sigma) U^T b restricted to the numerical rank.
    let utb = f.u.t_mul_vec(b)?;
    let mut x = vec![0.0f64; a.cols()];
    for j in 0..r {
        let c = utb[j] / f.sigma[j];
        for (xi, row) in x.iter_mut().zip(0..a.cols()) {
            *xi += c * f.v.get(row, j);
        }
    }
    solution_from(a, b, x)
}

/// Solves the problem after multiplying both sides by an explicit sketch
/// matrix. Pivoted QR handles the full-column-rank case; rank deficiency
/// falls back to the minimum-norm pseudo-inverse solution.
pub fn solve_with_sketch(
    a: &DenseMatrix,
    b: &[f64],
    sketch: &DenseMatrix,
) -> Result<RegressionSolution> {
    if a.rows() != b.len() {
        return Err(Error::shape(
            "solve_with_sketch",
            format!("rhs of length {}", a.rows()),
            format!("{}", b.len()),
        ));
    }
    if sketch.cols() != a.rows() {
        return Err(Error::shape(
            "solve_with_sketch",
            format!("sketch with {} columns", a.rows()),
            format!("{}", sketch.cols()),
        ));
    }
    let sa = sketch.mul(a)?;
    let sb = sketch.mul_vec(b)?;
    let x = small_solve(&sa, &sb)?;
    let mut sol = solution_from(a, b, x)?;
    sol.sketched = true;
    sol.t_used = Some(sketch.rows());
    Ok(sol)
}

/// Sketch-and-solve with a sign sketch of `t` rows: one sketch is applied
/// jointly to `A` and `b`, then the small problem is solved.
pub fn solve_sketched(
    a: &DenseMatrix,
    b: &[f64],
    t: usize,
    seed: u64,
) -> Result<RegressionSolution> {
    if a.rows() != b.len() {
        return Err(Error::shape(
            "solve_sketched",
            format!("rhs of length {}", a.rows()),
            format!("{}", b.len()),
        ));
    }
    let stacked = stack_rhs(a, b)?;
    let op = SketchOp::sign(t, a.rows(), seed);
    let sketched = apply_sketch(&op, &stacked)?;
    let (sa, sb) = split_rhs(&sketched);
    let x = small_solve(&sa, &sb)?;
    let mut sol = solution_from(a, b, x)?;
    sol.sketched = true;
    sol.t_used = Some(t);
    sol.seed = Some(seed);
    Ok(sol)
}

/// Matrix right-hand-side variant: minimizes `||A X - B||` columnwise with
/// one shared sign sketch. Identical to running `solve_sketched` per column
/// of an augmented problem with the same seed.
pub fn solve_sketched_multi(
    a: &DenseMatrix,
    b: &DenseMatrix,
    t: usize,
    seed: u64,
) -> Result<DenseMatrix> {
    if a.rows() != b.rows() {
        return Err(Error::shape(
            "solve_sketched_multi",
            format!("{} rows", a.rows()),
            format!("{}", b.rows()),
        ));
    }
    let mut stacked = Vec::with_capacity(a.rows() * (a.cols() + b.cols()));
    for i in 0..a.rows() {
        stacked.extend_from_slice(a.row(i));
        stacked.extend_from_slice(b.row(i));
    }
    let stacked = DenseMatrix::from_vec(a.rows(), a.cols() + b.cols(), stacked)?;
    let op = SketchOp::sign(t, a.rows(), seed);
    let sk = apply_sketch(&op, &stacked)?;
    let sa = DenseMatrix::from_fn(t, a.cols(), |i, j| sk.get(i, j))?;
    let sb = DenseMatrix::from_fn(t, b.cols(), |i, j| sk.get(i, a.cols() + j))?;
    match lstsq_full_rank(&sa, &sb, QR_RANK_REL_TOL)? {
        Some(x) => Ok(x),
        None => {
            if sa.is_zero() {
                return DenseMatrix::zeros(sa.cols(), sb.cols());
            }
            pseudo_inverse(&sa, default_rank_tol(sa.rows(), sa.cols()))?.mul(&sb)
        }
    }
}

/// Evaluates a sketched solution against the exact one. Both solutions are
/// re-verified against the raw problem first; a stored residual that does
/// not reproduce marks the pair as belonging to a different problem.
pub fn regression_report(
    a: &DenseMatrix,
    b: &[f64],
    exact: &RegressionSolution,
    sketched: &RegressionSolution,
    eps: f64,
) -> Result<RegressionReport> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidQuery(format!(
            "eps must be positive and finite, got {eps}"
        )));
    }
    let norm_b = vec_norm(b);
    for (label, sol) in [("exact", exact), ("sketched", sketched)] {
        if sol.x.len() != a.cols() {
            return Err(Error::MismatchedProblem(format!(
                "{label} solution has {} coefficients for a {}-column matrix",
                sol.x.len(),
                a.cols()
            )));
        }
        let recomputed = residual_norm(a, b, &sol.x)?;
        let tol = 1e-10 * (1.0 + norm_b + sol.residual_norm);
        if (recomputed - sol.residual_norm).abs() > tol {
            return Err(Error::MismatchedProblem(format!(
                "{label} residual {} does not reproduce (got {recomputed})",
                sol.residual_norm
            )));
        }
    }
    let exact_res = exact.residual_norm;
    let sk_res = sketched.residual_norm;
    let residual_ratio = if exact_res <= RESIDUAL_ZERO_TOL {
        if sk_res <= RESIDUAL_ZERO_TOL {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        sk_res / exact_res
    };
    let diff: Vec<f64> = exact
        .x
        .iter()
        .zip(&sketched.x)
        .map(|(&e, &s)| e - s)
        .collect();
    let solution_distance = vec_norm(&diff);
    let sigma_min = if a.is_zero() {
        0.0
    } else {
        sigma_min_positive(a, default_rank_tol(a.rows(), a.cols()))?
    };
    let bound_rhs = if sigma_min > 0.0 {
        eps / sigma_min * exact_res
    } else {
        0.0
    };
    Ok(RegressionReport {
        residual_ratio,
        solution_distance,
        bound_rhs,
        passed_approx: residual_ratio <= 1.0 + eps,
        passed_distance: solution_distance <= bound_rhs,
    })
}

fn stack_rhs(a: &DenseMatrix, b: &[f64]) -> Result<DenseMatrix> {
    let mut entries = Vec::with_capacity(a.rows() * (a.cols() + 1));
    for i in 0..a.rows() {
        entries.extend_from_slice(a.row(i));
        entries.push(b[i]);
    }
    DenseMatrix::from_vec(a.rows(), a.cols() + 1, entries)
}

fn split_rhs(stacked: &DenseMatrix) -> (DenseMatrix, Vec<f64>) {
    let m = stacked.cols() - 1;
    let sa = DenseMatrix::from_fn(stacked.rows(), m, |i, j| stacked.get(i, j))
        .expect("split keeps finite entries");
    let sb: Vec<f64> = (0..stacked.rows()).map(|i| stacked.get(i, m)).collect();
    (sa, sb)
}

fn small_solve(sa: &DenseMatrix, sb: &[f64]) -> Result<Vec<f64>> {
    let rhs = DenseMatrix::from_vec(sb.len(), 1, sb.to_vec())?;
    if let Some(x) = lstsq_full_rank(sa, &rhs, QR_RANK_REL_TOL)? {
        return Ok((0..sa.cols()).map(|j| x.get(j, 0)).collect());
    }
    if sa.is_zero() {
        return Ok(vec![0.0; sa.cols()]);
    }
    let pinv = pseudo_inverse(sa, default_rank_tol(sa.rows(), sa.cols()))?;
    let x = pinv.mul(&rhs)?;
    Ok((0..sa.cols()).map(|j| x.get(j, 0)).collect())
}
