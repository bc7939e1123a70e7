//! Approximate multiplication of `A^T B` from sketches, with spectral-norm
//! error reports and the sample-size formulas for every supported regime.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::spectral_norm;
use crate::matrix::DenseMatrix;
use crate::sketch::{amm_row_distribution, apply_sketch, sample_rows, SketchKind, SketchOp};

/// Outcome of one approximate-multiplication trial: the achieved spectral
/// error against the target bound `eps * ||A|| * ||B||`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub achieved_error: f64,
    pub bound: f64,
    pub relative_eps: f64,
    pub norm_a: f64,
    pub norm_b: f64,
    pub t_used: usize,
    pub passed: bool,
}

/// Sample-size regimes. The first three drive the sketching algorithms; the
/// three table regimes exist for comparison sweeps only and reuse the same
/// sketches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    ProjRank,
    ProjStableRank,
    RowSampleStableRank,
    HoeffdingTable,
    BernsteinTable,
    RankOneTable,
}

/// A sample-size request: `t = ceil(constant * f_regime(rank_param, eps,
/// dims))` with natural logarithms throughout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSizeQuery {
    pub regime: Regime,
    pub rank_param: f64,
    pub eps: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dims: Option<(usize, usize)>,
    pub constant: f64,
    #[serde(default)]
    pub sharp: bool,
}

impl SampleSizeQuery {
    pub fn new(regime: Regime, rank_param: f64, eps: f64, constant: f64) -> Self {
        SampleSizeQuery {
            regime,
            rank_param,
            eps,
            dims: None,
            constant,
            sharp: false,
        }
    }

    pub fn with_dims(mut self, m: usize, p: usize) -> Self {
        self.dims = Some((m, p));
        self
    }

    pub fn sharp(mut self) -> Self {
        self.sharp = true;
        self
    }
}

/// Evaluates the sample-size formula for a query. Natural log convention;
/// the result is clamped to at least 1.
pub fn sample_size(q: &SampleSizeQuery) -> Result<usize> {
    if !(q.eps > 0.0 && q.eps < 1.0) {
        return Err(Error::InvalidQuery(format!(
            "eps must lie in (0,1), got {}",
            q.eps
        )));
    }
    if !(q.rank_param >= 1.0 && q.rank_param.is_finite()) {
        return Err(Error::InvalidQuery(format!(
            "rank_param must be >= 1, got {}",
            q.rank_param
        )));
    }
    if !(q.constant > 0.0 && q.constant.is_finite()) {
        return Err(Error::InvalidQuery(format!(
            "constant must be positive, got {}",
            q.constant
        )));
    }
    if q.sharp && q.regime != Regime::RowSampleStableRank {
        return Err(Error::InvalidQuery(
            "the sharp flag applies only to RowSampleStableRank".into(),
        ));
    }
    let eps2 = q.eps * q.eps;
    let rp = q.rank_param;
    let dims_sum = || -> Result<f64> {
        let (m, p) = q.dims.ok_or_else(|| {
            Error::InvalidQuery("this regime needs dims = (m, p)".into())
        })?;
        if m == 0 || p == 0 {
            return Err(Error::InvalidQuery("dims must be positive".into()));
        }
        Ok((m + p) as f64)
    };
    let f = match q.regime {
        Regime::ProjRank => rp / eps2,
        Regime::ProjStableRank => rp / (eps2 * eps2),
        Regime::RowSampleStableRank => {
            if q.sharp {
                rp * (rp * rp / (eps2 * eps2)).ln() / eps2
            } else {
                rp * (rp / eps2).ln() / eps2
            }
        }
        Regime::HoeffdingTable => rp * rp * dims_sum()?.ln() / eps2,
        Regime::BernsteinTable => rp * dims_sum()?.ln() / eps2,
        Regime::RankOneTable => rp * (rp / eps2).ln() / eps2,
    };
    let t = (q.constant * f).ceil();
    if !t.is_finite() {
        return Err(Error::InvalidQuery("sample size overflows".into()));
    }
    Ok((t as usize).max(1))
}

/// Precomputed exact side of an approximation problem, reused across trials.
#[derive(Debug, Clone)]
pub struct AmmBaseline {
    pub product: DenseMatrix,
    pub norm_a: f64,
    pub norm_b: f64,
}

impl AmmBaseline {
    pub fn new(a: &DenseMatrix, b: &DenseMatrix) -> Result<Self> {
        if a.rows() != b.rows() {
            return Err(Error::shape(
                "AmmBaseline::new",
                format!("{} rows", a.rows()),
                format!("{}", b.rows()),
            ));
        }
        Ok(AmmBaseline {
            product: a.t_mul(b)?,
            norm_a: spectral_norm(a)?,
            norm_b: spectral_norm(b)?,
        })
    }
}

/// Error report for sketched factors against a precomputed baseline. The
/// cheap path for Monte Carlo sweeps: only the small `t x m` factors enter.
pub fn amm_error_against(
    baseline: &AmmBaseline,
    atil: &DenseMatrix,
    btil: &DenseMatrix,
    eps: f64,
) -> Result<ErrorReport> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidQuery(format!(
            "eps must be positive and finite, got {eps}"
        )));
    }
    if atil.rows() != btil.rows() {
        return Err(Error::shape(
            "amm_error_against",
            format!("{} sketched rows", atil.rows()),
            format!("{}", btil.rows()),
        ));
    }
    if atil.cols() != baseline.product.rows() || btil.cols() != baseline.product.cols() {
        return Err(Error::shape(
            "amm_error_against",
            format!(
                "factors with {} and {} columns",
                baseline.product.rows(),
                baseline.product.cols()
            ),
            format!("{} and {}", atil.cols(), btil.cols()),
        ));
    }
    let diff = atil.t_mul(btil)?.sub(&baseline.product)?;
    let achieved_error = spectral_norm(&diff)?;
    let scale = baseline.norm_a * baseline.norm_b;
    let bound = eps * scale;
    let relative_eps = if scale > 0.0 {
        achieved_error / scale
    } else if achieved_error == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(ErrorReport {
        achieved_error,
        bound,
        relative_eps,
        norm_a: baseline.norm_a,
        norm_b: baseline.norm_b,
        t_used: atil.rows(),
        passed: achieved_error <= bound,
    })
}

/// Exact spectral-norm error of sketched factors for a matrix pair.
pub fn amm_error(
    a: &DenseMatrix,
    b: &DenseMatrix,
    atil: &DenseMatrix,
    btil: &DenseMatrix,
    eps: f64,
) -> Result<ErrorReport> {
    if a.cols() != atil.cols() || b.cols() != btil.cols() {
        return Err(Error::shape(
            "amm_error",
            format!("factors with {} and {} columns", a.cols(), b.cols()),
            format!("{} and {}", atil.cols(), btil.cols()),
        ));
    }
    amm_error_against(&AmmBaseline::new(a, b)?, atil, btil, eps)
}

/// Sketches both matrices with one shared projection and reports the error.
/// `kind` selects sign or Gaussian entries.
pub fn amm_project_with(
    kind: SketchKind,
    a: &DenseMatrix,
    b: &DenseMatrix,
    t: usize,
    seed: u64,
    eps: f64,
) -> Result<(DenseMatrix, DenseMatrix, ErrorReport)> {
    if kind == SketchKind::RowSample {
        return Err(Error::InvalidQuery(
            "projection sketching takes SignProjection or GaussianProjection".into(),
        ));
    }
    let baseline = AmmBaseline::new(a, b)?;
    let op = match kind {
        SketchKind::SignProjection => SketchOp::sign(t, a.rows(), seed),
        SketchKind::GaussianProjection => SketchOp::gaussian(t, a.rows(), seed),
        SketchKind::RowSample => unreachable!(),
    };
    let atil = apply_sketch(&op, a)?;
    let btil = apply_sketch(&op, b)?;
    let report = amm_error_against(&baseline, &atil, &btil, eps)?;
    Ok((atil, btil, report))
}

/// Sign-projection sketching of a matrix pair.
pub fn amm_project(
    a: &DenseMatrix,
    b: &DenseMatrix,
    t: usize,
    seed: u64,
    eps: f64,
) -> Result<(DenseMatrix, DenseMatrix, ErrorReport)> {
    amm_project_with(SketchKind::SignProjection, a, b, t, seed, eps)
}

/// Sketches both matrices with an explicit dense operator. The debug path:
/// passing the identity makes the product exact, and passing a materialized
/// `SketchOp` exposes the realized randomness.
pub fn amm_with_sketch(
    a: &DenseMatrix,
    b: &DenseMatrix,
    r: &DenseMatrix,
    eps: f64,
) -> Result<(DenseMatrix, DenseMatrix, ErrorReport)> {
    if r.cols() != a.rows() || r.cols() != b.rows() {
        return Err(Error::shape(
            "amm_with_sketch",
            format!("sketch with {} columns", a.rows()),
            format!("{}", r.cols()),
        ));
    }
    let baseline = AmmBaseline::new(a, b)?;
    let atil = r.mul(a)?;
    let btil = r.mul(b)?;
    let report = amm_error_against(&baseline, &atil, &btil, eps)?;
    Ok((atil, btil, report))
}

/// Row-sampling sketch of a matrix pair: one shared index sequence drawn
/// from the outer-product distribution, rows rescaled by `1/sqrt(t * p_i)`.
pub fn amm_row_sample(
    a: &DenseMatrix,
    b: &DenseMatrix,
    t: usize,
    seed: u64,
    eps: f64,
) -> Result<(DenseMatrix, DenseMatrix, ErrorReport)> {
    let baseline = AmmBaseline::new(a, b)?;
    let dist = amm_row_distribution(a, b)?;
    let indices = sample_rows(&dist, t, seed)?;
    let gather = |m: &DenseMatrix| -> Result<DenseMatrix> {
        let mut out = Vec::with_capacity(t * m.cols());
        for &i in &indices {
            let scale = 1.0 / (t as f64 * dist.probs[i]).sqrt();
            out.extend(m.row(i).iter().map(|&v| v * scale));
        }
        DenseMatrix::from_vec(t, m.cols(), out)
    };
    let atil = gather(a)?;
    let btil = gather(b)?;
    let report = amm_error_against(&baseline, &atil, &btil, eps)?;
    Ok((atil, btil, report))
}
