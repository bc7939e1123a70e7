//! Sketch constructions: sign projection, Gaussian projection, and
//! non-uniform row sampling.
//!
//! All sketches are `t x n` operators applied from the left. Projections are
//! rescaled by `1/sqrt(t)` so that `E[R^T R] = I_n`; the row-sampling sketch
//! places `1/sqrt(t * p_i)` on the sampled coordinate so that `E[S^T S] = I_n`
//! holds exactly as well.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::take_columns;
use crate::matrix::DenseMatrix;
use crate::rng::SeedStream;

/// The three sketch families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SketchKind {
    SignProjection,
    GaussianProjection,
    RowSample,
}

/// Where a sampling distribution came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DistributionSource {
    OuterProductNorms,
    LeverageScores,
    Custom,
}

/// A probability distribution over row indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleDistribution {
    pub probs: Vec<f64>,
    pub support_size: usize,
    pub source: DistributionSource,
}

/// Largest tolerated deviation of a distribution's total mass from 1.
pub const PROB_SUM_TOL: f64 = 1e-12;

impl SampleDistribution {
    /// Wraps and validates an explicit probability vector.
    pub fn new(probs: Vec<f64>, source: DistributionSource) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::DegenerateDistribution("empty support".into()));
        }
        if probs.iter().any(|&p| !p.is_finite() || p < 0.0) {
            return Err(Error::DegenerateDistribution(
                "probabilities must be finite and non-negative".into(),
            ));
        }
        let total: f64 = probs.iter().sum();
        if total <= 0.0 {
            return Err(Error::DegenerateDistribution("zero total mass".into()));
        }
        if (total - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::DegenerateDistribution(format!(
                "total mass {total} deviates from 1 by more than {PROB_SUM_TOL}"
            )));
        }
        let support_size = probs.iter().filter(|&&p| p > 0.0).count();
        Ok(SampleDistribution {
            probs,
            support_size,
            source,
        })
    }

    /// Normalizes non-negative weights into a distribution.
    fn from_weights(weights: Vec<f64>, source: DistributionSource) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if total <= 0.0 || !total.is_finite() {
            return Err(Error::DegenerateDistribution(
                "weights have zero or non-finite total mass".into(),
            ));
        }
        let mut probs: Vec<f64> = weights.iter().map(|&w| w / total).collect();
        // One refinement pass keeps the sum within PROB_SUM_TOL even for long
        // vectors where a single division accumulates rounding drift.
        let sum2: f64 = probs.iter().sum();
        for p in probs.iter_mut() {
            *p /= sum2;
        }
        SampleDistribution::new(probs, source)
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// A fully specified sketch operator: kind, shape, seed, and (for row
/// sampling) the distribution it draws from. Serializes to JSON as
/// `{kind, t, n, seed, probabilities?}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SketchOp {
    pub kind: SketchKind,
    pub t: usize,
    pub n: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probabilities: Option<Vec<f64>>,
}

impl SketchOp {
    pub fn sign(t: usize, n: usize, seed: u64) -> Self {
        SketchOp {
            kind: SketchKind::SignProjection,
            t,
            n,
            seed,
            probabilities: None,
        }
    }

    pub fn gaussian(t: usize, n: usize, seed: u64) -> Self {
        SketchOp {
            kind: SketchKind::GaussianProjection,
            t,
            n,
            seed,
            probabilities: None,
        }
    }

    pub fn row_sample(t: usize, seed: u64, dist: &SampleDistribution) -> Self {
        SketchOp {
            kind: SketchKind::RowSample,
            t,
            n: dist.len(),
            seed,
            probabilities: Some(dist.probs.clone()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.t == 0 || self.n == 0 {
            return Err(Error::InvalidQuery(format!(
                "sketch dimensions must be positive, got t={} n={}",
                self.t, self.n
            )));
        }
        match self.kind {
            SketchKind::RowSample => {
                let probs = self.probabilities.as_ref().ok_or_else(|| {
                    Error::InvalidQuery("row-sample sketch needs probabilities".into())
                })?;
                if probs.len() != self.n {
                    return Err(Error::shape(
                        "SketchOp::validate",
                        format!("{} probabilities", self.n),
                        format!("{}", probs.len()),
                    ));
                }
                SampleDistribution::new(probs.clone(), DistributionSource::Custom)?;
            }
            _ => {
                if self.probabilities.is_some() {
                    return Err(Error::InvalidQuery(
                        "projection sketches carry no probabilities".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// The dense `t x n` sketch matrix this operator stands for.
    pub fn materialize(&self) -> Result<DenseMatrix> {
        self.validate()?;
        match self.kind {
            SketchKind::SignProjection => Ok(sign_sketch(self.t, self.n, self.seed)),
            SketchKind::GaussianProjection => Ok(gaussian_sketch(self.t, self.n, self.seed)),
            SketchKind::RowSample => {
                let dist = SampleDistribution::new(
                    self.probabilities.clone().expect("validated above"),
                    DistributionSource::Custom,
                )?;
                row_sample_sketch(&dist, self.t, self.seed)
            }
        }
    }
}

/// Sign projection: entries `±1/sqrt(t)`, drawn row-major from single bits of
/// the seed's stream.
pub fn sign_sketch(t: usize, n: usize, seed: u64) -> DenseMatrix {
    assert!(t >= 1 && n >= 1, "sketch dimensions must be positive");
    let scale = 1.0 / (t as f64).sqrt();
    let mut stream = SeedStream::new(seed);
    DenseMatrix::from_fn(t, n, |_, _| stream.next_sign() * scale)
        .expect("sign entries are finite")
}

/// Gaussian projection: i.i.d. `N(0, 1/t)` entries, drawn row-major.
pub fn gaussian_sketch(t: usize, n: usize, seed: u64) -> DenseMatrix {
    assert!(t >= 1 && n >= 1, "sketch dimensions must be positive");
    let scale = 1.0 / (t as f64).sqrt();
    let mut stream = SeedStream::new(seed);
    DenseMatrix::from_fn(t, n, |_, _| stream.next_gauss() * scale)
        .expect("gaussian entries are finite")
}

/// Outer-product sampling weights for a matrix pair: `p_i` proportional to
/// `||A_(i)|| * ||B_(i)||`.
pub fn amm_row_distribution(a: &DenseMatrix, b: &DenseMatrix) -> Result<SampleDistribution> {
    if a.rows() != b.rows() {
        return Err(Error::shape(
            "amm_row_distribution",
            format!("{} rows", a.rows()),
            format!("{}", b.rows()),
        ));
    }
    let weights: Vec<f64> = (0..a.rows())
        .map(|i| crate::matrix::vec_norm(a.row(i)) * crate::matrix::vec_norm(b.row(i)))
        .collect();
    SampleDistribution::from_weights(weights, DistributionSource::OuterProductNorms)
}

/// Leverage distribution from an already-computed left factor with
/// orthonormal columns: `p_i = ||U_(i)||^2 / r` where `r` is the column
/// count.
pub fn leverage_from_u(u: &DenseMatrix) -> Result<SampleDistribution> {
    let weights: Vec<f64> = (0..u.rows())
        .map(|i| {
            let row = u.row(i);
            crate::matrix::vec_dot(row, row)
        })
        .collect();
    SampleDistribution::from_weights(weights, DistributionSource::LeverageScores)
}

/// Row leverage scores of `a` at rank tolerance `tol`, normalized by the
/// numerical rank: `p_i = ||U_(i)||^2 / r`.
pub fn leverage_distribution(a: &DenseMatrix, tol: f64) -> Result<SampleDistribution> {
    if a.is_zero() {
        return Err(Error::NoSpectrum("zero matrix has no leverage scores"));
    }
    let f = crate::linalg::svd(a, tol)?;
    leverage_from_u(&f.u)
}

/// Draws `t` row indices by inverse-CDF sampling. Each draw uses one stream
/// double; when the draw lands exactly on a cumulative boundary the tie goes
/// to the lower index (zero-probability indices are never selected).
pub fn sample_rows(dist: &SampleDistribution, t: usize, seed: u64) -> Result<Vec<usize>> {
    if t == 0 {
        return Err(Error::InvalidQuery("sample count t must be >= 1".into()));
    }
    SampleDistribution::new(dist.probs.clone(), dist.source)?;
    let n = dist.len();
    let mut cum = Vec::with_capacity(n);
    let mut acc = 0.0f64;
    for &p in &dist.probs {
        acc += p;
        cum.push(acc);
    }
    let total = cum[n - 1];

    let mut stream = SeedStream::new(seed);
    let mut out = Vec::with_capacity(t);
    for _ in 0..t {
        let u = stream.next_f64() * total;
        // First index with cum[idx] > u, then walk boundary ties down to the
        // lowest positive-probability index.
        let mut idx = cum.partition_point(|&c| c <= u);
        if idx >= n {
            idx = n - 1;
        }
        while idx > 0 && cum[idx - 1] == u && dist.probs[idx - 1] > 0.0 {
            idx -= 1;
        }
        while dist.probs[idx] == 0.0 && idx > 0 {
            idx -= 1;
        }
        if dist.probs[idx] == 0.0 {
            return Err(Error::DegenerateDistribution(
                "sampled an index with zero probability".into(),
            ));
        }
        out.push(idx);
    }
    Ok(out)
}

/// Materialized row-sampling sketch: row `k` has the single entry
/// `1/sqrt(t * p_{i_k})` at the sampled index `i_k`.
pub fn row_sample_sketch(dist: &SampleDistribution, t: usize, seed: u64) -> Result<DenseMatrix> {
    let indices = sample_rows(dist, t, seed)?;
    let mut s = DenseMatrix::zeros(t, dist.len())?;
    for (k, &i) in indices.iter().enumerate() {
        s.set(k, i, 1.0 / (t as f64 * dist.probs[i]).sqrt());
    }
    Ok(s)
}

/// Applies a sketch operator to `a` without materializing the operator:
/// projections stream their rows, row sampling gathers and rescales rows.
pub fn apply_sketch(op: &SketchOp, a: &DenseMatrix) -> Result<DenseMatrix> {
    op.validate()?;
    if a.rows() != op.n {
        return Err(Error::shape(
            "apply_sketch",
            format!("matrix with {} rows", op.n),
            format!("{}", a.rows()),
        ));
    }
    match op.kind {
        SketchKind::SignProjection | SketchKind::GaussianProjection => {
            let scale = 1.0 / (op.t as f64).sqrt();
            let mut stream = SeedStream::new(op.seed);
            let m = a.cols();
            let mut out = vec![0.0f64; op.t * m];
            let mut rrow = vec![0.0f64; op.n];
            for k in 0..op.t {
                for r in rrow.iter_mut() {
                    *r = match op.kind {
                        SketchKind::SignProjection => stream.next_sign() * scale,
                        SketchKind::GaussianProjection => stream.next_gauss() * scale,
                        SketchKind::RowSample => unreachable!(),
                    };
                }
                let orow = &mut out[k * m..(k + 1) * m];
                for (l, &r) in rrow.iter().enumerate() {
                    let arow = a.row(l);
                    for (o, &v) in orow.iter_mut().zip(arow) {
                        *o += r * v;
                    }
                }
            }
            DenseMatrix::from_vec(op.t, m, out)
        }
        SketchKind::RowSample => {
            let dist = SampleDistribution::new(
                op.probabilities.clone().expect("validated"),
                DistributionSource::Custom,
            )?;
            let indices = sample_rows(&dist, op.t, op.seed)?;
            let mut out = Vec::with_capacity(op.t * a.cols());
            for &i in &indices {
                let scale = 1.0 / (op.t as f64 * dist.probs[i]).sqrt();
                out.extend(a.row(i).iter().map(|&v| v * scale));
            }
            DenseMatrix::from_vec(op.t, a.cols(), out)
        }
    }
}

/// First `t` rows of the identity, the debug substitute for a projection
/// sketch (`t = n` gives exact results downstream).
pub fn identity_sketch(t: usize, n: usize) -> Result<DenseMatrix> {
    if t > n {
        return Err(Error::InvalidQuery(format!(
            "identity sketch needs t <= n, got t={t} n={n}"
        )));
    }
    DenseMatrix::from_fn(t, n, |i, j| if i == j { 1.0 } else { 0.0 })
}

/// Leverage scores must sum to the numerical rank; `leverage_distribution`
/// normalizes them to mass 1, so the rank is recovered as the pre-normalized
/// total. Exposed for tests and diagnostics.
pub fn leverage_mass(a: &DenseMatrix, tol: f64) -> Result<f64> {
    let f = crate::linalg::svd(a, tol)?;
    let u = take_columns(&f.u, f.rank());
    Ok((0..a.rows())
        .map(|i| {
            let row = u.row(i);
            crate::matrix::vec_dot(row, row)
        })
        .sum())
}

/// Convenience wrapper: `svd_default` based leverage distribution.
pub fn leverage_distribution_default(a: &DenseMatrix) -> Result<SampleDistribution> {
    leverage_distribution(a, crate::linalg::default_rank_tol(a.rows(), a.cols()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::frobenius_norm;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        let mut s = SeedStream::new(seed);
        DenseMatrix::from_fn(rows, cols, |_, _| s.next_gauss()).unwrap()
    }

    #[test]
    fn sign_sketch_entries_and_determinism() {
        let r = sign_sketch(4, 6, 9);
        let scale = 0.5;
        for &v in r.entries() {
            assert!(v == scale || v == -scale);
        }
        assert_eq!(r, sign_sketch(4, 6, 9));
        assert_ne!(r, sign_sketch(4, 6, 10));
    }

    #[test]
    fn sign_sketch_rows_have_unit_norm() {
        let r = sign_sketch(8, 16, 3);
        for i in 0..8 {
            let row = r.row(i);
            let norm = crate::matrix::vec_dot(row, row);
            assert!((norm - 16.0 / 8.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gaussian_sketch_variance_matches_one_over_t() {
        let t = 16;
        let r = gaussian_sketch(t, 4000, 5);
        let var = r.entries().iter().map(|v| v * v).sum::<f64>() / r.entries().len() as f64;
        let expect = 1.0 / t as f64;
        assert!((var - expect).abs() < 0.05 * expect, "var {var} vs {expect}");
        assert_eq!(r, gaussian_sketch(t, 4000, 5));
    }

    #[test]
    fn amm_distribution_matches_row_norm_products() {
        let a = DenseMatrix::from_vec(3, 2, vec![3.0, 4.0, 0.0, 0.0, 1.0, 0.0]).unwrap();
        let b = DenseMatrix::from_vec(3, 2, vec![1.0, 0.0, 5.0, 0.0, 2.0, 0.0]).unwrap();
        let d = amm_row_distribution(&a, &b).unwrap();
        // Weights: 5*1, 0*5, 1*2 -> 5/7, 0, 2/7.
        assert!((d.probs[0] - 5.0 / 7.0).abs() < 1e-12);
        assert_eq!(d.probs[1], 0.0);
        assert!((d.probs[2] - 2.0 / 7.0).abs() < 1e-12);
        assert_eq!(d.support_size, 2);
        assert_eq!(d.source, DistributionSource::OuterProductNorms);

        let z = DenseMatrix::zeros(3, 2).unwrap();
        assert!(matches!(
            amm_row_distribution(&a, &z),
            Err(Error::DegenerateDistribution(_))
        ));
    }

    #[test]
    fn leverage_distribution_of_orthogonal_rows_is_uniform_on_support() {
        // Rows 0 and 2 carry the mass; row 1 is zero.
        let a = DenseMatrix::from_vec(3, 2, vec![2.0, 0.0, 0.0, 0.0, 0.0, 7.0]).unwrap();
        let d = leverage_distribution_default(&a).unwrap();
        assert!((d.probs[0] - 0.5).abs() < 1e-12);
        assert_eq!(d.probs[1], 0.0);
        assert!((d.probs[2] - 0.5).abs() < 1e-12);
        assert_eq!(d.source, DistributionSource::LeverageScores);
    }

    #[test]
    fn leverage_mass_equals_rank() {
        let a = random_matrix(9, 4, 17);
        let mass = leverage_mass(&a, crate::linalg::default_rank_tol(9, 4)).unwrap();
        assert!((mass - 4.0).abs() < 1e-10);
    }

    #[test]
    fn sample_rows_is_deterministic_and_respects_support() {
        let d = SampleDistribution::new(vec![0.0, 0.25, 0.75], DistributionSource::Custom).unwrap();
        let idx = sample_rows(&d, 64, 3).unwrap();
        assert_eq!(idx, sample_rows(&d, 64, 3).unwrap());
        assert!(idx.iter().all(|&i| i > 0));
        let freq1 = idx.iter().filter(|&&i| i == 1).count();
        assert!(freq1 > 0, "index with probability 0.25 never drawn in 64 tries");
    }

    #[test]
    fn row_sample_sketch_scales_by_inverse_probability() {
        let d = SampleDistribution::new(vec![0.5, 0.5], DistributionSource::Custom).unwrap();
        let t = 8;
        let s = row_sample_sketch(&d, t, 11).unwrap();
        for k in 0..t {
            let row = s.row(k);
            let nonzero: Vec<f64> = row.iter().copied().filter(|&v| v != 0.0).collect();
            assert_eq!(nonzero.len(), 1);
            assert!((nonzero[0] - 1.0 / (t as f64 * 0.5).sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn distribution_validation_rejects_bad_input() {
        assert!(SampleDistribution::new(vec![], DistributionSource::Custom).is_err());
        assert!(SampleDistribution::new(vec![0.5, -0.1, 0.6], DistributionSource::Custom).is_err());
        assert!(SampleDistribution::new(vec![0.2, 0.2], DistributionSource::Custom).is_err());
        assert!(SampleDistribution::new(vec![0.0, 0.0], DistributionSource::Custom).is_err());
    }

    #[test]
    fn apply_sketch_matches_materialized_operator() {
        let a = random_matrix(10, 3, 23);
        let ops = [
            SketchOp::sign(5, 10, 7),
            SketchOp::gaussian(5, 10, 7),
            SketchOp::row_sample(
                6,
                7,
                &leverage_distribution_default(&a).unwrap(),
            ),
        ];
        for op in &ops {
            let fast = apply_sketch(op, &a).unwrap();
            let dense = op.materialize().unwrap().mul(&a).unwrap();
            let err = frobenius_norm(&fast.sub(&dense).unwrap());
            assert!(err < 1e-12 * frobenius_norm(&dense).max(1.0), "{:?}", op.kind);
        }
        let short = random_matrix(4, 3, 24);
        assert!(matches!(
            apply_sketch(&ops[0], &short),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn sketch_op_json_round_trips() {
        let d = SampleDistribution::new(vec![0.25, 0.75], DistributionSource::Custom).unwrap();
        let op = SketchOp::row_sample(3, 99, &d);
        let text = serde_json::to_string(&op).unwrap();
        assert!(text.contains("\"probabilities\""));
        let back: SketchOp = serde_json::from_str(&text).unwrap();
        assert_eq!(op, back);

        let proj = SketchOp::sign(2, 5, 1);
        let text = serde_json::to_string(&proj).unwrap();
        assert!(!text.contains("probabilities"));
        let back: SketchOp = serde_json::from_str(&text).unwrap();
        assert_eq!(proj, back);
    }

    #[test]
    fn identity_sketch_is_exact() {
        let a = random_matrix(6, 4, 31);
        let id = identity_sketch(6, 6).unwrap();
        assert_eq!(id.mul(&a).unwrap(), a);
        assert!(identity_sketch(7, 6).is_err());
    }

    #[test]
    fn projection_isotropy_on_average() {
        // Mean of R^T R over many seeds approaches the identity; entrywise
        // deviations shrink like 1/sqrt(trials). Checked at 5 standard errors
        // with an exact-zero-variance fast path for the diagonal of the sign
        // sketch, whose rows always have norm exactly n/t.
        let (t, n) = (8usize, 4usize);
        let trials = 10_000u64;
        let mut mean = vec![0.0f64; n * n];
        let mut m2 = vec![0.0f64; n * n];
        for trial in 0..trials {
            let r = sign_sketch(t, n, 1000 + trial);
            let g = r.t_mul(&r).unwrap();
            for (idx, &v) in g.entries().iter().enumerate() {
                let delta = v - mean[idx];
                mean[idx] += delta / (trial as f64 + 1.0);
                m2[idx] += delta * (v - mean[idx]);
            }
        }
        for i in 0..n {
            for j in 0..n {
                let idx = i * n + j;
                let target = if i == j { 1.0 } else { 0.0 };
                let se = (m2[idx] / (trials as f64 - 1.0) / trials as f64).sqrt();
                let dev = (mean[idx] - target).abs();
                assert!(
                    dev <= 5.0 * se + 1e-12,
                    "entry ({i},{j}): dev {dev} vs 5se {}",
                    5.0 * se
                );
                assert!(dev <= 0.05, "entry ({i},{j}) deviates by {dev}");
            }
        }
    }
}
