//! Small numeric and instance helpers shared by the runner and the
//! calibration search.

use sketchspec_core::generate::{generate, GeneratorSpec, Spectrum};
use sketchspec_core::rng::{derive, SeedStream};
use sketchspec_core::sketch::{sample_rows, SampleDistribution};
use sketchspec_core::{DenseMatrix, Result as CoreResult};

/// Nearest-rank quantile of an ascending-sorted slice: the smallest entry
/// whose rank is at least `p * len`.
pub fn nearest_rank_quantile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let n = sorted.len();
    let rank = ((p * n as f64).ceil() as usize).clamp(1, n);
    sorted[rank - 1]
}

/// Nearest-rank median of an arbitrary finite sample.
pub fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    nearest_rank_quantile(&sorted, 0.5)
}

/// Row-sampling sketch of a matrix pair against a shared index draw: row
/// `i` enters scaled by `1 / sqrt(t * p_i)`.
pub fn row_sample_pair(
    a: &DenseMatrix,
    b: &DenseMatrix,
    dist: &SampleDistribution,
    t: usize,
    seed: u64,
) -> CoreResult<(DenseMatrix, DenseMatrix)> {
    let indices = sample_rows(dist, t, seed)?;
    let gather = |m: &DenseMatrix| -> CoreResult<DenseMatrix> {
        let mut out = Vec::with_capacity(t * m.cols());
        for &i in &indices {
            let scale = 1.0 / (t as f64 * dist.probs[i]).sqrt();
            out.extend(m.row(i).iter().map(|&v| v * scale));
        }
        DenseMatrix::from_vec(t, m.cols(), out)
    };
    Ok((gather(a)?, gather(b)?))
}

/// Unit-norm standard Gaussian direction.
pub fn gaussian_unit_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut stream = SeedStream::new(seed);
    loop {
        let v: Vec<f64> = (0..n).map(|_| stream.next_gauss()).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            return v.iter().map(|x| x / norm).collect();
        }
    }
}

/// Deterministic regression right-hand side: `b = A x0 + residual_scale *
/// ||A x0|| * g` with Gaussian `x0` and an independent unit direction `g`.
/// The planted residual keeps ratio checks away from the zero-residual
/// degeneracy.
pub fn synth_rhs(a: &DenseMatrix, seed: u64, residual_scale: f64) -> CoreResult<Vec<f64>> {
    let mut stream = SeedStream::new(derive(seed, 1));
    let x0: Vec<f64> = (0..a.cols()).map(|_| stream.next_gauss()).collect();
    let ax0 = a.mul_vec(&x0)?;
    let signal = ax0.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = if signal > 0.0 {
        residual_scale * signal
    } else {
        residual_scale
    };
    let g = gaussian_unit_vector(a.rows(), derive(seed, 2));
    Ok(ax0
        .iter()
        .zip(g.iter())
        .map(|(&s, &d)| s + scale * d)
        .collect())
}

/// Pass threshold for the Gaussian-projection ratio at target rank `k`
/// inside a rank-`r` input: `2 + eps * sqrt((r - k) / k)`.
pub fn gaussian_threshold(r: usize, k: usize, eps: f64) -> f64 {
    let excess = r.saturating_sub(k) as f64;
    2.0 + eps * (excess / k as f64).sqrt()
}

/// `ceil(x)` clamped to at least 1, for sample-size arithmetic done outside
/// the regime table.
pub fn ceil_at_least_one(x: f64) -> usize {
    let c = x.ceil();
    if c < 1.0 {
        1
    } else {
        c as usize
    }
}

/// Flat-spectrum instance of a given rank.
pub fn exact_rank_instance(rows: usize, cols: usize, r: usize, seed: u64) -> DenseMatrix {
    let spec = GeneratorSpec::new((rows, cols), Spectrum::ExactRank { r }, seed);
    generate(&spec).expect("reference generator specs are valid")
}

/// Power-law instance, `sigma_j = j^(-alpha)`.
pub fn power_law_instance(rows: usize, cols: usize, alpha: f64, seed: u64) -> DenseMatrix {
    let spec = GeneratorSpec::new((rows, cols), Spectrum::PowerLaw { alpha }, seed);
    generate(&spec).expect("reference generator specs are valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_is_nearest_rank() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.0);
        assert_eq!(median(&[5.0]), 5.0);
    }

    #[test]
    fn quantile_hits_extremes() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(nearest_rank_quantile(&xs, 0.99), 4.0);
        assert_eq!(nearest_rank_quantile(&xs, 1e-9), 1.0);
    }

    #[test]
    fn unit_vectors_have_unit_norm() {
        let v = gaussian_unit_vector(37, 5);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn synth_rhs_plants_the_requested_residual() {
        let a = exact_rank_instance(48, 6, 6, 3);
        let b = synth_rhs(&a, 11, 0.5).unwrap();
        let exact = sketchspec_core::regression::solve_exact(&a, &b).unwrap();
        let bnorm = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(exact.residual_norm > 0.0);
        assert!(exact.residual_norm < bnorm);
        let b2 = synth_rhs(&a, 11, 0.5).unwrap();
        assert_eq!(b, b2);
    }

    #[test]
    fn gaussian_threshold_shrinks_to_two() {
        assert!((gaussian_threshold(40, 40, 0.25) - 2.0).abs() < 1e-15);
        let th = gaussian_threshold(40, 10, 0.25);
        assert!((th - (2.0 + 0.25 * (30.0f64 / 10.0).sqrt())).abs() < 1e-15);
        assert!(gaussian_threshold(10, 20, 0.25) == 2.0);
    }

    #[test]
    fn ceil_at_least_one_clamps() {
        assert_eq!(ceil_at_least_one(0.2), 1);
        assert_eq!(ceil_at_least_one(3.01), 4);
        assert_eq!(ceil_at_least_one(-2.0), 1);
    }

    #[test]
    fn row_sample_pair_is_deterministic() {
        let a = exact_rank_instance(32, 4, 4, 9);
        let b = exact_rank_instance(32, 3, 3, 10);
        let dist = sketchspec_core::sketch::amm_row_distribution(&a, &b).unwrap();
        let (a1, b1) = row_sample_pair(&a, &b, &dist, 8, 77).unwrap();
        let (a2, b2) = row_sample_pair(&a, &b, &dist, 8, 77).unwrap();
        assert_eq!(a1.entries(), a2.entries());
        assert_eq!(b1.entries(), b2.entries());
        assert_eq!(a1.rows(), 8);
        assert_eq!(b1.cols(), 3);
    }
}
