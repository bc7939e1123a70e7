//! Spectral-norm low-rank approximation from sketches: project the input
//! onto the row space of a sketch, truncate, and compare the error against
//! the best rank-k approximation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    default_rank_tol, project_onto_rowspace, project_rank_k, qr_diagonal, rowspace_basis,
    spectral_norm, svd_default,
};
use crate::matrix::DenseMatrix;
use crate::sketch::{apply_sketch, leverage_from_u, SampleDistribution, SketchOp};

/// Which sketch drives the approximation. The two tail variants both use a
/// sign sketch; `TailFullProj` keeps the whole projection instead of
/// truncating to rank k.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LowRankMethod {
    SignProj,
    GaussianProj,
    LeverageSample,
    TailSignProj,
    TailFullProj,
}

/// One low-rank approximation trial.
#[derive(Debug, Clone, PartialEq)]
pub struct LowRankResult {
    pub approx: DenseMatrix,
    pub k: usize,
    pub method: LowRankMethod,
    pub t_used: usize,
    pub seed: u64,
    /// `||A - approx|| / ||A - A_k||`, with the zero-denominator convention
    /// of [`lowrank_ratio`].
    pub ratio: f64,
    /// Whether the sketched top-k left factor kept full column rank.
    pub rank_condition: bool,
}

/// Per-k errors and ratios from one shared sketch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowRankSweep {
    pub method: LowRankMethod,
    pub t_used: usize,
    pub seed: u64,
    /// `errors[k-1] = ||A - P_{Atil,k}(A)||` for k = 1..=k_max.
    pub errors: Vec<f64>,
    pub ratios: Vec<f64>,
    pub rank_condition: Vec<bool>,
}

/// Denominators at or below `RATIO_DENOM_REL_TOL * ||A||` trigger the
/// zero-residual convention; method errors at or below
/// `RATIO_NUMER_REL_TOL * ||A||` then count as exact.
pub const RATIO_DENOM_REL_TOL: f64 = 1e-14;
pub const RATIO_NUMER_REL_TOL: f64 = 1e-12;

/// Precomputed spectral data of the input, shared across trials: the thin
/// SVD, the spectral norm, and the leverage distribution derived from `U`.
#[derive(Debug, Clone)]
pub struct LowRankContext {
    pub a: DenseMatrix,
    pub u: DenseMatrix,
    pub sigma: Vec<f64>,
    pub v: DenseMatrix,
    pub spectral: f64,
    pub leverage: SampleDistribution,
}

impl LowRankContext {
    pub fn new(a: &DenseMatrix) -> Result<Self> {
        let f = svd_default(a)?;
        let leverage = leverage_from_u(&f.u)?;
        Ok(LowRankContext {
            a: a.clone(),
            spectral: f.sigma[0],
            u: f.u,
            sigma: f.sigma,
            v: f.v,
            leverage,
        })
    }

    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    /// `sigma_{k+1}`, the best possible rank-k spectral error; zero at or
    /// beyond the numerical rank.
    pub fn sigma_tail(&self, k: usize) -> f64 {
        if k < self.sigma.len() {
            self.sigma[k]
        } else {
            0.0
        }
    }
}

fn ratio_with_convention(error: f64, denom: f64, spectral: f64) -> f64 {
    if denom <= RATIO_DENOM_REL_TOL * spectral {
        if error <= RATIO_NUMER_REL_TOL * spectral {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        error / denom
    }
}

fn validate_k_t(a: &DenseMatrix, k: usize, t: usize) -> Result<()> {
    let limit = a.rows().min(a.cols());
    if k == 0 || k > limit {
        return Err(Error::InvalidQuery(format!(
            "rank target k must lie in 1..={limit}, got {k}"
        )));
    }
    if t == 0 {
        return Err(Error::InvalidQuery("sketch size t must be >= 1".into()));
    }
    Ok(())
}

fn build_op(ctx: &LowRankContext, method: LowRankMethod, t: usize, seed: u64) -> SketchOp {
    let n = ctx.a.rows();
    match method {
        LowRankMethod::SignProj | LowRankMethod::TailSignProj | LowRankMethod::TailFullProj => {
            SketchOp::sign(t, n, seed)
        }
        LowRankMethod::GaussianProj => SketchOp::gaussian(t, n, seed),
        LowRankMethod::LeverageSample => SketchOp::row_sample(t, seed, &ctx.leverage),
    }
}

/// Cumulative full-column-rank flags for the sketched left factor: entry
/// `k-1` says whether `sketch * U_k` has rank k numerically.
fn rank_condition_flags(ctx: &LowRankContext, op: &SketchOp, k_max: usize) -> Result<Vec<bool>> {
    let utilde = apply_sketch(op, &ctx.u)?;
    let diag = qr_diagonal(&utilde);
    let scale = diag.iter().cloned().fold(0.0f64, f64::max);
    let tol = default_rank_tol(utilde.rows(), utilde.cols()) * scale;
    let mut flags = Vec::with_capacity(k_max);
    let mut ok = true;
    for k in 0..k_max {
        ok = ok && k < diag.len() && diag[k] > tol;
        flags.push(ok);
    }
    Ok(flags)
}

/// Runs one trial with an explicit dense sketch matrix. Passing the identity
/// reproduces the exact truncated SVD; passing a materialized `SketchOp`
/// exposes the realized randomness.
pub fn lowrank_with_sketch(
    a: &DenseMatrix,
    sketch: &DenseMatrix,
    k: usize,
    method: LowRankMethod,
) -> Result<LowRankResult> {
    validate_k_t(a, k, sketch.rows())?;
    if sketch.cols() != a.rows() {
        return Err(Error::shape(
            "lowrank_with_sketch",
            format!("sketch with {} columns", a.rows()),
            format!("{}", sketch.cols()),
        ));
    }
    let ctx = LowRankContext::new(a)?;
    let atil = sketch.mul(a)?;
    let approx = match method {
        LowRankMethod::TailFullProj => project_onto_rowspace(a, &atil)?,
        _ => project_rank_k(a, &atil, k)?,
    };
    let error = spectral_norm(&a.sub(&approx)?)?;
    let ratio = ratio_with_convention(error, ctx.sigma_tail(k), ctx.spectral);
    let su = sketch.mul(&ctx.u)?;
    let diag = qr_diagonal(&su);
    let scale = diag.iter().cloned().fold(0.0f64, f64::max);
    let tol = default_rank_tol(su.rows(), su.cols()) * scale;
    let kk = k.min(ctx.rank());
    let rank_condition = diag.len() >= kk && diag[..kk].iter().all(|&d| d > tol);
    Ok(LowRankResult {
        approx,
        k,
        method,
        t_used: sketch.rows(),
        seed: 0,
        ratio,
        rank_condition,
    })
}

/// Shared implementation for the seeded per-method entry points.
pub fn lowrank_run(
    ctx: &LowRankContext,
    method: LowRankMethod,
    k: usize,
    t: usize,
    seed: u64,
) -> Result<LowRankResult> {
    validate_k_t(&ctx.a, k, t)?;
    let op = build_op(ctx, method, t, seed);
    let atil = apply_sketch(&op, &ctx.a)?;
    let approx = match method {
        LowRankMethod::TailFullProj => project_onto_rowspace(&ctx.a, &atil)?,
        _ => project_rank_k(&ctx.a, &atil, k)?,
    };
    let error = spectral_norm(&ctx.a.sub(&approx)?)?;
    let ratio = ratio_with_convention(error, ctx.sigma_tail(k), ctx.spectral);
    let flags = rank_condition_flags(ctx, &op, k.min(ctx.rank()))?;
    Ok(LowRankResult {
        approx,
        k,
        method,
        t_used: t,
        seed,
        ratio,
        rank_condition: flags.last().copied().unwrap_or(false),
    })
}

/// Sign-projection low-rank approximation.
pub fn lowrank_sign(a: &DenseMatrix, k: usize, t: usize, seed: u64) -> Result<LowRankResult> {
    lowrank_run(&LowRankContext::new(a)?, LowRankMethod::SignProj, k, t, seed)
}

/// Gaussian-projection low-rank approximation.
pub fn lowrank_gaussian(a: &DenseMatrix, k: usize, t: usize, seed: u64) -> Result<LowRankResult> {
    lowrank_run(&LowRankContext::new(a)?, LowRankMethod::GaussianProj, k, t, seed)
}

/// Leverage-score row-sampling low-rank approximation.
pub fn lowrank_leverage(a: &DenseMatrix, k: usize, t: usize, seed: u64) -> Result<LowRankResult> {
    lowrank_run(&LowRankContext::new(a)?, LowRankMethod::LeverageSample, k, t, seed)
}

/// Sign-sketch approximation aimed at inputs whose spectral tail past rank k
/// has stable rank at most k. `full_rank_mode` keeps the entire projection
/// (rank up to t) instead of truncating to k. Use
/// [`tail_precondition_holds`] to check the stable-rank assumption first.
pub fn lowrank_tail(
    a: &DenseMatrix,
    k: usize,
    t: usize,
    seed: u64,
    full_rank_mode: bool,
) -> Result<LowRankResult> {
    let method = if full_rank_mode {
        LowRankMethod::TailFullProj
    } else {
        LowRankMethod::TailSignProj
    };
    lowrank_run(&LowRankContext::new(a)?, method, k, t, seed)
}

/// Whether `stable_rank(A - A_k) <= k`, the assumption behind the tail
/// variants.
pub fn tail_precondition_holds(a: &DenseMatrix, k: usize) -> Result<bool> {
    Ok(residual_stable_rank(a, k)? <= k as f64 + 1e-9)
}

/// Stable rank of the best-rank-k residual: `(sum_{j>k} sigma_j^2) /
/// sigma_{k+1}^2`, and 0 when k is at or beyond the numerical rank.
pub fn residual_stable_rank(a: &DenseMatrix, k: usize) -> Result<f64> {
    if a.is_zero() {
        return Ok(0.0);
    }
    let f = svd_default(a)?;
    if k >= f.rank() {
        return Ok(0.0);
    }
    let tail_sq: f64 = f.sigma[k..].iter().map(|&s| s * s).sum();
    Ok(tail_sq / (f.sigma[k] * f.sigma[k]))
}

/// `||A - approx|| / ||A - A_k||` computed from scratch. When the
/// denominator vanishes (k at or beyond the rank), the ratio is 1 if the
/// numerator also vanishes and +inf otherwise.
pub fn lowrank_ratio(a: &DenseMatrix, approx: &DenseMatrix, k: usize) -> Result<f64> {
    if a.shape() != approx.shape() {
        return Err(Error::shape(
            "lowrank_ratio",
            format!("{}x{}", a.rows(), a.cols()),
            format!("{}x{}", approx.rows(), approx.cols()),
        ));
    }
    if k == 0 {
        return Err(Error::InvalidQuery("rank target k must be >= 1".into()));
    }
    let error = spectral_norm(&a.sub(approx)?)?;
    if a.is_zero() {
        return Ok(ratio_with_convention(error, 0.0, 0.0));
    }
    let f = svd_default(a)?;
    let denom = if k < f.rank() { f.sigma[k] } else { 0.0 };
    Ok(ratio_with_convention(error, denom, f.sigma[0]))
}

/// Runs one sketch trial and evaluates every truncation level `k =
/// 1..=k_max` from that single sketch. The errors come from the identity
/// `||A - P_{Atil,k}(A)|| = ||Sigma - U^T P_{Atil,k}(A) V||` on the row and
/// column spaces of `A`, so only small matrices are formed per step.
pub fn lowrank_sweep(
    ctx: &LowRankContext,
    method: LowRankMethod,
    t: usize,
    seed: u64,
    k_max: usize,
) -> Result<LowRankSweep> {
    validate_k_t(&ctx.a, k_max, t)?;
    let op = build_op(ctx, method, t, seed);
    let atil = apply_sketch(&op, &ctx.a)?;
    let rank_condition = rank_condition_flags(ctx, &op, k_max)?;
    let errors = projection_errors(ctx, &atil, k_max, method == LowRankMethod::TailFullProj)?;
    let ratios = errors
        .iter()
        .enumerate()
        .map(|(idx, &e)| ratio_with_convention(e, ctx.sigma_tail(idx + 1), ctx.spectral))
        .collect();
    Ok(LowRankSweep {
        method,
        t_used: t,
        seed,
        errors,
        ratios,
        rank_condition,
    })
}

/// `||A - P_{Atil,k}(A)||` for k = 1..=k_max (or the untruncated projection
/// error repeated, in full mode).
fn projection_errors(
    ctx: &LowRankContext,
    atil: &DenseMatrix,
    k_max: usize,
    full_mode: bool,
) -> Result<Vec<f64>> {
    if atil.is_zero() {
        return Ok(vec![ctx.spectral; k_max]);
    }
    let q = rowspace_basis(atil, default_rank_tol(atil.rows(), atil.cols()))?;
    let y = ctx.a.mul_t(&q)?;
    if y.is_zero() {
        return Ok(vec![ctx.spectral; k_max]);
    }
    let fy = svd_default(&y)?;
    let d = fy.rank();
    let r = ctx.rank();
    // Core coordinates: U^T P_{Atil,k}(A) V accumulates rank-one terms
    // s_j * (U^T w_j)(z_j^T Q V) as k grows.
    let wu = ctx.u.t_mul(&fy.u)?;
    let qv = q.mul(&ctx.v)?;
    let g = fy.v.t_mul(&qv)?;
    let mut core = vec![0.0f64; r * r];
    let mut errors = Vec::with_capacity(k_max);
    let steps = if full_mode { d } else { d.min(k_max) };
    let mut last = ctx.spectral;
    for step in 0..steps {
        let s = fy.sigma[step];
        for i in 0..r {
            let wi = s * wu.get(i, step);
            for j in 0..r {
                core[i * r + j] += wi * g.get(step, j);
            }
        }
        last = core_error(ctx, &core, r)?;
        if !full_mode {
            errors.push(last);
        }
    }
    while errors.len() < k_max {
        errors.push(last);
    }
    Ok(errors)
}

fn core_error(ctx: &LowRankContext, core: &[f64], r: usize) -> Result<f64> {
    let diff = DenseMatrix::from_fn(r, r, |i, j| {
        let base = -core[i * r + j];
        if i == j {
            base + ctx.sigma[i]
        } else {
            base
        }
    })?;
    spectral_norm(&diff)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::best_rank_k;
    use crate::rng::SeedStream;
    use crate::sketch::identity_sketch;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        let mut s = SeedStream::new(seed);
        DenseMatrix::from_fn(rows, cols, |_, _| s.next_gauss()).unwrap()
    }

    /// rows x cols matrix with prescribed singular values.
    fn spectrum_matrix(rows: usize, cols: usize, sigma: &[f64], seed: u64) -> DenseMatrix {
        let r = sigma.len();
        let gu = random_matrix(rows, r, seed);
        let gv = random_matrix(cols, r, seed ^ 0x9E37);
        let qu = crate::linalg::orthonormal_columns(&gu).unwrap();
        let qv = crate::linalg::orthonormal_columns(&gv).unwrap();
        let mut scaled = qu.clone();
        for j in 0..r {
            for i in 0..rows {
                let v = scaled.get(i, j) * sigma[j];
                scaled.set(i, j, v);
            }
        }
        scaled.mul_t(&qv).unwrap()
    }

    #[test]
    fn identity_sketch_recovers_best_rank_k() {
        let a = spectrum_matrix(10, 6, &[5.0, 3.0, 2.0, 1.0], 1);
        let id = identity_sketch(10, 10).unwrap();
        for k in 1..=3 {
            let res = lowrank_with_sketch(&a, &id, k, LowRankMethod::SignProj).unwrap();
            let ak = best_rank_k(&a, k).unwrap();
            let diff = crate::linalg::frobenius_norm(&res.approx.sub(&ak).unwrap());
            assert!(diff < 1e-10, "k={k}: {diff}");
            assert!((res.ratio - 1.0).abs() < 1e-8, "k={k}: ratio {}", res.ratio);
            assert!(res.rank_condition);
        }
    }

    #[test]
    fn exact_rank_k_input_gives_ratio_one() {
        let a = spectrum_matrix(12, 8, &[4.0, 2.0, 1.0], 2);
        let res = lowrank_sign(&a, 3, 6, 11).unwrap();
        assert!(
            (res.ratio - 1.0).abs() < 1e-8,
            "ratio {} should hit the zero-residual convention",
            res.ratio
        );
    }

    #[test]
    fn gaussian_matches_dense_composition_oracle() {
        let mut sigma = vec![1.0f64; 7];
        sigma[0] = 10.0;
        let a = spectrum_matrix(14, 9, &sigma, 3);
        let op = SketchOp::gaussian(5, 14, 21);
        let r = op.materialize().unwrap();
        let res = lowrank_with_sketch(&a, &r, 1, LowRankMethod::GaussianProj).unwrap();
        let atil = r.mul(&a).unwrap();
        let oracle = best_rank_k(&project_onto_rowspace(&a, &atil).unwrap(), 1).unwrap();
        let diff = crate::linalg::frobenius_norm(&res.approx.sub(&oracle).unwrap());
        assert!(diff < 1e-9, "{diff}");
    }

    #[test]
    fn rank_one_input_any_nonzero_sketch_is_exact() {
        let x = random_matrix(9, 1, 4);
        let y = random_matrix(5, 1, 5);
        let a = x.mul_t(&y).unwrap();
        for seed in 0..5 {
            let res = lowrank_leverage(&a, 1, 3, seed).unwrap();
            assert!(res.ratio <= 1.0 + 1e-8, "seed {seed}: ratio {}", res.ratio);
        }
    }

    #[test]
    fn residual_stable_rank_examples() {
        let a = spectrum_matrix(9, 7, &[5.0, 1.0, 1.0, 1.0, 1.0], 6);
        assert!((residual_stable_rank(&a, 1).unwrap() - 4.0).abs() < 1e-8);
        let exact = spectrum_matrix(9, 7, &[3.0, 2.0], 7);
        assert_eq!(residual_stable_rank(&exact, 2).unwrap(), 0.0);
        assert_eq!(residual_stable_rank(&DenseMatrix::zeros(3, 3).unwrap(), 1).unwrap(), 0.0);

        let b = random_matrix(10, 6, 8);
        let f = svd_default(&b).unwrap();
        let k = 2;
        let formula: f64 =
            f.sigma[k..].iter().map(|&s| s * s).sum::<f64>() / (f.sigma[k] * f.sigma[k]);
        assert!((residual_stable_rank(&b, k).unwrap() - formula).abs() < 1e-8);
    }

    #[test]
    fn ratio_examples() {
        let a = spectrum_matrix(11, 8, &[6.0, 3.0, 1.5, 0.5], 9);
        let f = svd_default(&a).unwrap();
        let ak = best_rank_k(&a, 2).unwrap();
        assert!((lowrank_ratio(&a, &ak, 2).unwrap() - 1.0).abs() < 1e-8);
        let zero = DenseMatrix::zeros(11, 8).unwrap();
        let r0 = lowrank_ratio(&a, &zero, 2).unwrap();
        assert!((r0 - f.sigma[0] / f.sigma[2]).abs() < 1e-8);
        assert!(matches!(
            lowrank_ratio(&a, &zero, 0),
            Err(Error::InvalidQuery(_))
        ));
        let wrong = DenseMatrix::zeros(8, 11).unwrap();
        assert!(matches!(
            lowrank_ratio(&a, &wrong, 2),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn tail_full_mode_never_beats_rank_k_mode() {
        let sigma: Vec<f64> = (1..=12).map(|j| 1.0 / j as f64).collect();
        let a = spectrum_matrix(20, 14, &sigma, 10);
        for seed in 0..5 {
            let full = lowrank_tail(&a, 4, 8, seed, true).unwrap();
            let cut = lowrank_tail(&a, 4, 8, seed, false).unwrap();
            let err_full = spectral_norm(&a.sub(&full.approx).unwrap()).unwrap();
            let err_cut = spectral_norm(&a.sub(&cut.approx).unwrap()).unwrap();
            assert!(
                err_full <= err_cut + 1e-12,
                "seed {seed}: {err_full} vs {err_cut}"
            );
        }
    }

    #[test]
    fn tail_precondition_matches_residual_stable_rank() {
        let sigma: Vec<f64> = (1..=10).map(|j| 1.0 / j as f64).collect();
        let a = spectrum_matrix(16, 12, &sigma, 11);
        let srk = residual_stable_rank(&a, 3).unwrap();
        assert_eq!(tail_precondition_holds(&a, 3).unwrap(), srk <= 3.0 + 1e-9);
    }

    #[test]
    fn approx_rank_stays_within_k() {
        let a = spectrum_matrix(13, 9, &[4.0, 3.0, 2.0, 1.0, 0.5], 12);
        let res = lowrank_sign(&a, 2, 7, 31).unwrap();
        let f = svd_default(&res.approx).unwrap();
        assert!(f.rank() <= 2, "rank {}", f.rank());

        let full = lowrank_tail(&a, 2, 4, 31, true).unwrap();
        let ff = svd_default(&full.approx).unwrap();
        assert!(ff.rank() <= 4, "rank {}", ff.rank());
    }

    #[test]
    fn sweep_matches_single_k_runs() {
        let sigma: Vec<f64> = (1..=6).map(|j| 1.0 / j as f64).collect();
        let a = spectrum_matrix(15, 10, &sigma, 13);
        let ctx = LowRankContext::new(&a).unwrap();
        for method in [
            LowRankMethod::SignProj,
            LowRankMethod::GaussianProj,
            LowRankMethod::LeverageSample,
        ] {
            let sweep = lowrank_sweep(&ctx, method, 8, 41, 5).unwrap();
            for k in 1..=5usize {
                let single = lowrank_run(&ctx, method, k, 8, 41).unwrap();
                let direct =
                    spectral_norm(&a.sub(&single.approx).unwrap()).unwrap();
                assert!(
                    (sweep.errors[k - 1] - direct).abs() < 1e-9 * ctx.spectral.max(1.0),
                    "{method:?} k={k}: sweep {} vs direct {direct}",
                    sweep.errors[k - 1]
                );
                assert_eq!(sweep.rank_condition[k - 1], single.rank_condition, "{method:?} k={k}");
            }
        }
    }

    #[test]
    fn sweep_full_mode_errors_are_constant() {
        let sigma: Vec<f64> = (1..=6).map(|j| 1.0 / j as f64).collect();
        let a = spectrum_matrix(15, 10, &sigma, 14);
        let ctx = LowRankContext::new(&a).unwrap();
        let sweep = lowrank_sweep(&ctx, LowRankMethod::TailFullProj, 7, 5, 4).unwrap();
        for k in 1..4 {
            assert_eq!(sweep.errors[k], sweep.errors[0]);
        }
        let single = lowrank_run(&ctx, LowRankMethod::TailFullProj, 2, 7, 5).unwrap();
        let direct = spectral_norm(&a.sub(&single.approx).unwrap()).unwrap();
        assert!((sweep.errors[1] - direct).abs() < 1e-9);
    }

    #[test]
    fn validation_rejects_bad_k_and_t() {
        let a = random_matrix(6, 4, 15);
        assert!(matches!(
            lowrank_sign(&a, 0, 3, 1),
            Err(Error::InvalidQuery(_))
        ));
        assert!(matches!(
            lowrank_sign(&a, 5, 3, 1),
            Err(Error::InvalidQuery(_))
        ));
        assert!(matches!(
            lowrank_sign(&a, 2, 0, 1),
            Err(Error::InvalidQuery(_))
        ));
        let z = DenseMatrix::zeros(4, 4).unwrap();
        assert!(matches!(
            lowrank_leverage(&z, 1, 2, 1),
            Err(Error::NoSpectrum(_))
        ));
    }
}
