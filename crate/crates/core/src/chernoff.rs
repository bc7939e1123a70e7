//! Monte Carlo lab for matrix concentration: deviation curves for averages of
//! random symmetric matrices, subspace norm-preservation failure rates, and
//! sketch operator-norm inflation rates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{orthonormal_columns, spectral_norm, stable_rank, svd_default};
use crate::matrix::DenseMatrix;
use crate::rng::{derive, SeedStream};
use crate::sketch::{apply_sketch, SketchOp};

/// Families of random symmetric matrices the lab can draw from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnsembleKind {
    /// `M = n * x xᵀ` for `x` uniform on the unit sphere of `R^n`.
    IsotropicOuterProduct,
    /// `M = gamma * Q Qᵀ` for a uniformly random orthonormal `n x r` frame
    /// `Q`; the default scale `gamma = n/r` makes the mean exactly `I`.
    RankRFrame,
    /// `M` diagonal with independent `±1` entries.
    DiagonalRademacher,
    /// Point mass on one fixed symmetric matrix.
    Custom,
}

impl EnsembleKind {
    /// Stable kebab-case label used in CSV output.
    pub fn label(self) -> &'static str {
        match self {
            EnsembleKind::IsotropicOuterProduct => "isotropic-outer-product",
            EnsembleKind::RankRFrame => "rank-r-frame",
            EnsembleKind::DiagonalRademacher => "diagonal-rademacher",
            EnsembleKind::Custom => "custom",
        }
    }
}

/// A distribution over symmetric `n x n` matrices with an almost-sure rank cap
/// `r` and an almost-sure spectral-norm cap `gamma`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixEnsemble {
    pub kind: EnsembleKind,
    /// Ambient dimension.
    pub n: usize,
    /// Almost-sure rank bound of one draw.
    pub r: usize,
    /// Almost-sure spectral-norm bound of one draw.
    pub gamma: f64,
    /// The fixed matrix of a `Custom` ensemble; unused otherwise.
    #[serde(skip)]
    pub custom: Option<DenseMatrix>,
}

impl MatrixEnsemble {
    /// Rank-one isotropic ensemble: draws have norm exactly `n` and mean `I`.
    pub fn isotropic(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidQuery("ensemble dimension must be positive".into()));
        }
        Ok(MatrixEnsemble {
            kind: EnsembleKind::IsotropicOuterProduct,
            n,
            r: 1,
            gamma: n as f64,
            custom: None,
        })
    }

    /// Rank-`r` frame ensemble: draws have norm exactly `n/r` and mean `I`.
    pub fn rank_r_frame(n: usize, r: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidQuery("ensemble dimension must be positive".into()));
        }
        Self::rank_r_frame_scaled(n, r, n as f64 / r as f64)
    }

    /// Rank-`r` frame ensemble with an explicit norm cap: draws are
    /// `gamma * Q Qᵀ`, so the mean is `(gamma * r / n) * I`. Holding `gamma`
    /// fixed while `n` grows keeps the deviation distribution comparable
    /// across dimensions; `gamma` may not exceed `n/r`, which would push the
    /// mean norm past 1.
    pub fn rank_r_frame_scaled(n: usize, r: usize, gamma: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidQuery("ensemble dimension must be positive".into()));
        }
        if r == 0 || r > n {
            return Err(Error::InvalidQuery(format!(
                "frame rank must satisfy 1 <= r <= n, got r = {r} with n = {n}"
            )));
        }
        if !gamma.is_finite() || gamma <= 0.0 {
            return Err(Error::InvalidQuery(format!(
                "frame norm cap must be positive and finite, got {gamma}"
            )));
        }
        let cap = n as f64 / r as f64;
        if gamma > cap * (1.0 + 1e-12) {
            return Err(Error::InvalidQuery(format!(
                "frame norm cap {gamma} exceeds n/r = {cap}, which would make \
                 the mean norm exceed 1"
            )));
        }
        Ok(MatrixEnsemble {
            kind: EnsembleKind::RankRFrame,
            n,
            r,
            gamma,
            custom: None,
        })
    }

    /// Full-rank diagonal sign ensemble: draws have norm exactly 1 and mean 0.
    pub fn diagonal_rademacher(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidQuery("ensemble dimension must be positive".into()));
        }
        Ok(MatrixEnsemble {
            kind: EnsembleKind::DiagonalRademacher,
            n,
            r: n,
            gamma: 1.0,
            custom: None,
        })
    }

    /// Point mass on one fixed symmetric matrix.
    pub fn custom(m: DenseMatrix) -> Result<Self> {
        if m.rows() != m.cols() || m.rows() == 0 {
            return Err(Error::shape(
                "custom ensemble",
                "nonempty square matrix",
                format!("{}x{}", m.rows(), m.cols()),
            ));
        }
        let scale = m.max_abs().max(1.0);
        for i in 0..m.rows() {
            for j in (i + 1)..m.cols() {
                if (m.get(i, j) - m.get(j, i)).abs() > 1e-12 * scale {
                    return Err(Error::InvalidQuery(
                        "custom ensemble matrix must be symmetric".into(),
                    ));
                }
            }
        }
        let (r, gamma) = if m.is_zero() {
            (0, 0.0)
        } else {
            (svd_default(&m)?.rank(), spectral_norm(&m)?)
        };
        Ok(MatrixEnsemble {
            kind: EnsembleKind::Custom,
            n: m.rows(),
            r,
            gamma,
            custom: Some(m),
        })
    }

    /// Checks the structural invariants of the ensemble description itself.
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidQuery("ensemble dimension must be positive".into()));
        }
        if !self.gamma.is_finite() || self.gamma < 0.0 {
            return Err(Error::InvalidQuery(format!(
                "ensemble norm cap must be finite and nonnegative, got {}",
                self.gamma
            )));
        }
        match self.kind {
            EnsembleKind::Custom => match &self.custom {
                Some(m) if m.rows() == self.n && m.cols() == self.n => Ok(()),
                Some(m) => Err(Error::shape(
                    "custom ensemble",
                    format!("{0}x{0}", self.n),
                    format!("{}x{}", m.rows(), m.cols()),
                )),
                None => Err(Error::InvalidQuery(
                    "custom ensemble is missing its matrix".into(),
                )),
            },
            EnsembleKind::RankRFrame => {
                if self.r == 0 || self.r > self.n {
                    return Err(Error::InvalidQuery(format!(
                        "frame rank must satisfy 1 <= r <= n, got r = {} with n = {}",
                        self.r, self.n
                    )));
                }
                let cap = self.n as f64 / self.r as f64;
                if self.gamma > cap * (1.0 + 1e-12) {
                    return Err(Error::InvalidQuery(format!(
                        "frame norm cap {} exceeds n/r = {cap}",
                        self.gamma
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// The exact mean matrix `E(M)` of the ensemble.
    pub fn mean_matrix(&self) -> DenseMatrix {
        match self.kind {
            EnsembleKind::IsotropicOuterProduct => {
                let id = DenseMatrix::identity(self.n).expect("ensemble dimension is positive");
                id.scale(self.gamma / self.n as f64)
            }
            EnsembleKind::RankRFrame => {
                let id = DenseMatrix::identity(self.n).expect("ensemble dimension is positive");
                id.scale(self.gamma / (self.n as f64 / self.r as f64))
            }
            EnsembleKind::DiagonalRademacher => {
                DenseMatrix::zeros(self.n, self.n).expect("ensemble dimension is positive")
            }
            EnsembleKind::Custom => self
                .custom
                .clone()
                .expect("validated custom ensemble holds a matrix"),
        }
    }
}

/// Draws a unit vector uniformly distributed on the sphere of `R^n`.
fn unit_sphere_vector(n: usize, stream: &mut SeedStream) -> Vec<f64> {
    loop {
        let x: Vec<f64> = (0..n).map(|_| stream.next_gauss()).collect();
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            return x.into_iter().map(|v| v / norm).collect();
        }
    }
}

/// Draws a uniformly random orthonormal `n x r` frame.
fn random_frame(n: usize, r: usize, seed: u64) -> DenseMatrix {
    for attempt in 0..64u64 {
        let mut stream = SeedStream::new(derive(seed, attempt));
        let g = DenseMatrix::from_fn(n, r, |_, _| stream.next_gauss())
            .expect("positive frame dimensions");
        if let Ok(q) = orthonormal_columns(&g) {
            return q;
        }
    }
    unreachable!("a fresh Gaussian matrix is almost surely full rank");
}

/// Draws one matrix from the ensemble. The draw is a deterministic function of
/// the seed.
pub fn sample_ensemble(e: &MatrixEnsemble, seed: u64) -> DenseMatrix {
    match e.kind {
        EnsembleKind::IsotropicOuterProduct => {
            let mut stream = SeedStream::new(seed);
            let x = unit_sphere_vector(e.n, &mut stream);
            let scale = e.gamma;
            DenseMatrix::from_fn(e.n, e.n, |i, j| scale * x[i] * x[j])
                .expect("ensemble dimension is positive")
        }
        EnsembleKind::RankRFrame => {
            let q = random_frame(e.n, e.r, seed);
            q.mul_t(&q)
                .expect("frame product shapes agree")
                .scale(e.gamma)
        }
        EnsembleKind::DiagonalRademacher => {
            let mut stream = SeedStream::new(seed);
            let mut m =
                DenseMatrix::zeros(e.n, e.n).expect("ensemble dimension is positive");
            for i in 0..e.n {
                m.set(i, i, stream.next_sign());
            }
            m
        }
        EnsembleKind::Custom => e
            .custom
            .clone()
            .expect("validated custom ensemble holds a matrix"),
    }
}

/// Adds one ensemble draw into a row-major accumulation buffer without
/// materializing the draw as a separate matrix.
fn accumulate_sample(e: &MatrixEnsemble, seed: u64, buf: &mut [f64]) {
    let n = e.n;
    match e.kind {
        EnsembleKind::IsotropicOuterProduct => {
            let mut stream = SeedStream::new(seed);
            let x = unit_sphere_vector(n, &mut stream);
            let scale = e.gamma;
            for i in 0..n {
                let xi = scale * x[i];
                let row = &mut buf[i * n..(i + 1) * n];
                for (j, slot) in row.iter_mut().enumerate() {
                    *slot += xi * x[j];
                }
            }
        }
        EnsembleKind::RankRFrame => {
            let q = random_frame(n, e.r, seed);
            let scale = e.gamma;
            for i in 0..n {
                let qi = q.row(i);
                let row = &mut buf[i * n..(i + 1) * n];
                for j in 0..n {
                    let qj = q.row(j);
                    let mut dot = 0.0;
                    for l in 0..e.r {
                        dot += qi[l] * qj[l];
                    }
                    row[j] += scale * dot;
                }
            }
        }
        EnsembleKind::DiagonalRademacher => {
            let mut stream = SeedStream::new(seed);
            for i in 0..n {
                buf[i * n + i] += stream.next_sign();
            }
        }
        EnsembleKind::Custom => {
            let m = e
                .custom
                .as_ref()
                .expect("validated custom ensemble holds a matrix");
            for (slot, v) in buf.iter_mut().zip(m.entries()) {
                *slot += v;
            }
        }
    }
}

const DEVIATION_NORM_TOL: f64 = 1e-9;
const DEVIATION_NORM_MAX_ITERS: usize = 10_000;

/// Spectral norm of a symmetric matrix by seeded power iteration, with an
/// exact fallback when the iteration stalls.
fn symmetric_norm(m: &DenseMatrix, seed: u64) -> f64 {
    let n = m.rows();
    if m.is_zero() {
        return 0.0;
    }
    for restart in 0..4u64 {
        let mut stream = SeedStream::new(derive(seed, restart));
        let mut x: Vec<f64> = (0..n).map(|_| stream.next_gauss()).collect();
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        for v in x.iter_mut() {
            *v /= norm;
        }
        let mut est = 0.0f64;
        for iter in 0..DEVIATION_NORM_MAX_ITERS {
            let y = m.mul_vec(&x).expect("square matrix times matching vector");
            let ynorm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            if ynorm == 0.0 {
                break;
            }
            x = y.into_iter().map(|v| v / ynorm).collect();
            if iter > 0 && (ynorm - est).abs() <= DEVIATION_NORM_TOL * est.max(f64::MIN_POSITIVE) {
                return ynorm;
            }
            est = ynorm;
        }
    }
    spectral_norm(m).unwrap_or(0.0)
}

/// Quantile summary of spectral deviations at one sample count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationQuantiles {
    pub t: usize,
    pub median: f64,
    pub q90: f64,
    pub q99: f64,
}

/// Empirical deviation quantiles of `‖(1/t) Σ M_i − E(M)‖` across a grid of
/// sample counts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeviationCurve {
    pub t_values: Vec<usize>,
    /// One quantile row per entry of `t_values`, in the same order.
    pub quantiles: Vec<DeviationQuantiles>,
    pub trials_per_point: usize,
    pub ensemble: MatrixEnsemble,
    pub seed_base: u64,
}

impl DeviationCurve {
    /// Renders the curve as CSV with one row per sample count.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("ensemble,n,r,gamma,t,trials,median,q90,q99,seed_base\n");
        for q in &self.quantiles {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                self.ensemble.kind.label(),
                self.ensemble.n,
                self.ensemble.r,
                self.ensemble.gamma,
                q.t,
                self.trials_per_point,
                q.median,
                q.q90,
                q.q99,
                self.seed_base,
            ));
        }
        out
    }
}

/// Nearest-rank quantile of an ascending-sorted sample.
fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let rank = (p * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// Whether every requested sample count respects the almost-sure rank cap of
/// the ensemble, the regime the deviation bound is stated for.
pub fn rank_cap_satisfied(e: &MatrixEnsemble, t_values: &[usize]) -> bool {
    t_values.iter().all(|&t| e.r <= t)
}

/// Raw spectral deviations `‖(1/t) Σ M_i − E(M)‖` of `trials` independent
/// averages of `t` ensemble samples, in trial order. Deterministic in
/// `seed_base`; [`deviation_curve`] aggregates these into quantiles.
pub fn deviation_samples(
    e: &MatrixEnsemble,
    t: usize,
    trials: usize,
    seed_base: u64,
) -> Result<Vec<f64>> {
    e.validate()?;
    if t == 0 {
        return Err(Error::InvalidQuery(
            "deviation samples need a positive sample count".into(),
        ));
    }
    if trials == 0 {
        return Err(Error::InvalidQuery(
            "deviation samples need at least one trial".into(),
        ));
    }
    let n = e.n;
    let t_seed = derive(seed_base, t as u64);
    let mut deviations = Vec::with_capacity(trials);
    if e.kind == EnsembleKind::DiagonalRademacher {
        for trial in 0..trials {
            let trial_seed = derive(t_seed, trial as u64);
            let mut diag = vec![0.0f64; n];
            for i in 0..t {
                let mut stream = SeedStream::new(derive(trial_seed, i as u64));
                for slot in diag.iter_mut() {
                    *slot += stream.next_sign();
                }
            }
            let dev = diag
                .iter()
                .map(|s| (s / t as f64).abs())
                .fold(0.0f64, f64::max);
            deviations.push(dev);
        }
    } else {
        let mean = e.mean_matrix();
        for trial in 0..trials {
            let trial_seed = derive(t_seed, trial as u64);
            let mut buf = vec![0.0f64; n * n];
            for i in 0..t {
                accumulate_sample(e, derive(trial_seed, i as u64), &mut buf);
            }
            let inv_t = 1.0 / t as f64;
            for (slot, m) in buf.iter_mut().zip(mean.entries()) {
                *slot = *slot * inv_t - m;
            }
            let dev_matrix = DenseMatrix::from_vec(n, n, buf)?;
            deviations.push(symmetric_norm(&dev_matrix, derive(trial_seed, u64::MAX)));
        }
    }
    Ok(deviations)
}

/// Estimates deviation quantiles by Monte Carlo. For each `t` it draws
/// `trials` independent averages of `t` ensemble samples and records the
/// spectral norm of the deviation from the exact mean. Statistically stable
/// output expects `trials >= 100`. Deterministic in `seed_base`.
pub fn deviation_curve(
    e: &MatrixEnsemble,
    t_values: &[usize],
    trials: usize,
    seed_base: u64,
) -> Result<DeviationCurve> {
    e.validate()?;
    if t_values.is_empty() || t_values.contains(&0) {
        return Err(Error::InvalidQuery(
            "deviation curve needs at least one positive sample count".into(),
        ));
    }
    if trials == 0 {
        return Err(Error::InvalidQuery("deviation curve needs at least one trial".into()));
    }
    let mut quantiles = Vec::with_capacity(t_values.len());
    for &t in t_values {
        let mut deviations = deviation_samples(e, t, trials, seed_base)?;
        deviations.sort_by(f64::total_cmp);
        quantiles.push(DeviationQuantiles {
            t,
            median: nearest_rank(&deviations, 0.5),
            q90: nearest_rank(&deviations, 0.9),
            q99: nearest_rank(&deviations, 0.99),
        });
    }
    Ok(DeviationCurve {
        t_values: t_values.to_vec(),
        quantiles,
        trials_per_point: trials,
        ensemble: e.clone(),
        seed_base,
    })
}

/// Whether any singular value of a sketched orthonormal basis escapes the
/// norm-preservation band `[sqrt(1-eps), sqrt(1+eps)]`. A product whose rank
/// fell below `k` counts as a violation because a singular value reached 0.
pub fn jl_band_violation(rq: &DenseMatrix, k: usize, eps: f64) -> Result<bool> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidQuery(format!(
            "band width eps must lie in (0, 1), got {eps}"
        )));
    }
    if rq.cols() != k {
        return Err(Error::shape(
            "band check",
            format!("{k} columns"),
            format!("{} columns", rq.cols()),
        ));
    }
    if rq.is_zero() {
        return Ok(true);
    }
    let f = svd_default(rq)?;
    if f.rank() < k {
        return Ok(true);
    }
    let lo = (1.0 - eps).sqrt();
    let hi = (1.0 + eps).sqrt();
    Ok(f.sigma[0] > hi || f.sigma[k - 1] < lo)
}

fn jl_rate_impl(
    k: usize,
    d: usize,
    t: usize,
    eps: f64,
    trials: usize,
    seed_base: u64,
    orthonormal_hook: bool,
) -> Result<f64> {
    if k == 0 || k > d {
        return Err(Error::InvalidQuery(format!(
            "subspace dimension must satisfy 1 <= k <= d, got k = {k} with d = {d}"
        )));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidQuery(format!(
            "band width eps must lie in (0, 1), got {eps}"
        )));
    }
    if t == 0 || trials == 0 {
        return Err(Error::InvalidQuery(
            "failure rate needs a positive sketch size and at least one trial".into(),
        ));
    }
    if orthonormal_hook && t > d {
        return Err(Error::InvalidQuery(format!(
            "orthonormal hook needs t <= d, got t = {t} with d = {d}"
        )));
    }
    let mut failures = 0usize;
    for trial in 0..trials {
        let trial_seed = derive(seed_base, trial as u64);
        let q = random_frame(d, k, derive(trial_seed, 1));
        let rq = if orthonormal_hook {
            random_frame(d, t, derive(trial_seed, 2)).t_mul(&q)?
        } else {
            let op = SketchOp::sign(t, d, derive(trial_seed, 2));
            apply_sketch(&op, &q)?
        };
        if jl_band_violation(&rq, k, eps)? {
            failures += 1;
        }
    }
    Ok(failures as f64 / trials as f64)
}

/// Fraction of trials in which a sign sketch of dimension `t` fails to
/// preserve, within `1 ± eps`, the squared norm of every vector of a random
/// `k`-dimensional subspace of `R^d`. The for-all event is checked exactly
/// through the extreme singular values of the sketched basis.
pub fn subspace_jl_failure_rate(
    k: usize,
    d: usize,
    t: usize,
    eps: f64,
    trials: usize,
    seed_base: u64,
) -> Result<f64> {
    jl_rate_impl(k, d, t, eps, trials, seed_base, false)
}

/// Debug variant of [`subspace_jl_failure_rate`] that replaces the sign
/// sketch with a random matrix having orthonormal rows, which preserves norms
/// exactly when `t = d`.
pub fn subspace_jl_failure_rate_orthonormal(
    k: usize,
    d: usize,
    t: usize,
    eps: f64,
    trials: usize,
    seed_base: u64,
) -> Result<f64> {
    jl_rate_impl(k, d, t, eps, trials, seed_base, true)
}

/// Fraction of sign-sketch trials in which `‖RA‖ >= 4‖A‖`, without checking
/// the sample-count precondition. Useful for exploring the regime below the
/// stable rank where the concentration statement does not apply.
pub fn rudelson_norm_rate_unchecked(
    a: &DenseMatrix,
    t: usize,
    trials: usize,
    seed_base: u64,
) -> Result<f64> {
    if t == 0 || trials == 0 {
        return Err(Error::InvalidQuery(
            "norm rate needs a positive sketch size and at least one trial".into(),
        ));
    }
    let norm_a = spectral_norm(a)?;
    let threshold = 4.0 * norm_a;
    let mut count = 0usize;
    for trial in 0..trials {
        let op = SketchOp::sign(t, a.rows(), derive(seed_base, trial as u64));
        let ra = apply_sketch(&op, a)?;
        if spectral_norm(&ra)? >= threshold {
            count += 1;
        }
    }
    Ok(count as f64 / trials as f64)
}

/// Fraction of sign-sketch trials in which the sketched matrix norm inflates
/// past `4‖A‖`. Requires the sketch size to be at least the stable rank of
/// `A`, the regime in which the inflation probability is at most
/// `2 exp(-t/2)`.
pub fn rudelson_norm_rate(
    a: &DenseMatrix,
    t: usize,
    trials: usize,
    seed_base: u64,
) -> Result<f64> {
    let sr = stable_rank(a)?;
    if (t as f64) < sr * (1.0 - 1e-12) {
        return Err(Error::PreconditionViolation(format!(
            "sketch size t = {t} is below the stable rank {sr:.6}; \
             use the unchecked variant to explore this regime"
        )));
    }
    rudelson_norm_rate_unchecked(a, t, trials, seed_base)
}
