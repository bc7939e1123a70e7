//! Synthetic test-matrix generation with prescribed singular spectra and a
//! random graph incidence family, all deterministic per seed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{orthonormal_columns, scale_columns};
use crate::matrix::DenseMatrix;
use crate::rng::{derive, SeedStream};

/// Singular-spectrum families the generator can realize.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Spectrum {
    /// `sigma_j = j^(-alpha)` for `j = 1..min(n, m)`.
    PowerLaw { alpha: f64 },
    /// `sigma_j = exp(-beta * (j - 1))`.
    ExpDecay { beta: f64 },
    /// Flat rank-`r` signal with unit singular values plus i.i.d. Gaussian
    /// noise of standard deviation `noise_sigma`.
    LowRankPlusNoise { r: usize, noise_sigma: f64 },
    /// Flat spectrum of exactly `r` unit singular values.
    ExactRank { r: usize },
    /// Signed edge-vertex incidence matrix of a random graph: one row per
    /// sampled edge, `+1` and `-1` in the endpoint columns.
    GraphIncidence { vertices: usize, edge_prob: f64 },
}

/// A reproducible recipe for one synthetic matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    /// Requested `(rows, cols)`. `GraphIncidence` derives its row count from
    /// the sampled edge set, so it uses the sentinel shape `(0, vertices)`.
    pub shape: (usize, usize),
    pub spectrum: Spectrum,
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn new(shape: (usize, usize), spectrum: Spectrum, seed: u64) -> Self {
        GeneratorSpec { shape, spectrum, seed }
    }

    /// Checks parameter ranges and shape consistency.
    pub fn validate(&self) -> Result<()> {
        let (n, m) = self.shape;
        match &self.spectrum {
            Spectrum::GraphIncidence { vertices, edge_prob } => {
                if *vertices < 2 {
                    return Err(Error::InvalidSpec(
                        "graph incidence needs at least two vertices".into(),
                    ));
                }
                if !(0.0..=1.0).contains(edge_prob) {
                    return Err(Error::InvalidSpec(format!(
                        "edge probability must lie in [0, 1], got {edge_prob}"
                    )));
                }
                if n != 0 || m != *vertices {
                    return Err(Error::InvalidSpec(format!(
                        "graph incidence uses the sentinel shape (0, vertices) = (0, {vertices}), got ({n}, {m})"
                    )));
                }
                return Ok(());
            }
            _ => {
                if n == 0 || m == 0 {
                    return Err(Error::InvalidSpec(format!(
                        "matrix shape must be positive, got ({n}, {m})"
                    )));
                }
            }
        }
        let d = n.min(m);
        match &self.spectrum {
            Spectrum::PowerLaw { alpha } => {
                if !alpha.is_finite() || *alpha < 0.0 {
                    return Err(Error::InvalidSpec(format!(
                        "power-law exponent must be finite and nonnegative, got {alpha}"
                    )));
                }
            }
            Spectrum::ExpDecay { beta } => {
                if !beta.is_finite() || *beta < 0.0 {
                    return Err(Error::InvalidSpec(format!(
                        "exponential decay rate must be finite and nonnegative, got {beta}"
                    )));
                }
            }
            Spectrum::LowRankPlusNoise { r, noise_sigma } => {
                if *r == 0 || *r > d {
                    return Err(Error::InvalidSpec(format!(
                        "signal rank must satisfy 1 <= r <= min(n, m) = {d}, got {r}"
                    )));
                }
                if !noise_sigma.is_finite() || *noise_sigma < 0.0 {
                    return Err(Error::InvalidSpec(format!(
                        "noise scale must be finite and nonnegative, got {noise_sigma}"
                    )));
                }
            }
            Spectrum::ExactRank { r } => {
                if *r == 0 || *r > d {
                    return Err(Error::InvalidSpec(format!(
                        "rank must satisfy 1 <= r <= min(n, m) = {d}, got {r}"
                    )));
                }
            }
            Spectrum::GraphIncidence { .. } => unreachable!("handled above"),
        }
        Ok(())
    }
}

/// Random matrix with orthonormal columns, deterministic per seed. The QR
/// sign convention fixes the factor uniquely, so equal seeds give equal
/// factors.
fn random_orthonormal(rows: usize, cols: usize, seed: u64) -> Result<DenseMatrix> {
    for attempt in 0..64u64 {
        let mut stream = SeedStream::new(derive(seed, attempt));
        let g = DenseMatrix::from_fn(rows, cols, |_, _| stream.next_gauss())?;
        if let Ok(q) = orthonormal_columns(&g) {
            return Ok(q);
        }
    }
    Err(Error::NumericalFailure(
        "could not draw a full-rank Gaussian factor".into(),
    ))
}

/// Assembles `U * diag(sigma) * Vᵀ` from freshly drawn orthonormal factors.
fn spectrum_matrix(n: usize, m: usize, sigma: &[f64], seed: u64) -> Result<DenseMatrix> {
    let u = random_orthonormal(n, sigma.len(), derive(seed, 1))?;
    let v = random_orthonormal(m, sigma.len(), derive(seed, 2))?;
    scale_columns(&u, sigma).mul_t(&v)
}

fn incidence_matrix(vertices: usize, edge_prob: f64, seed: u64) -> Result<DenseMatrix> {
    let mut stream = SeedStream::new(seed);
    let mut entries = Vec::new();
    let mut edges = 0usize;
    for i in 0..vertices {
        for j in (i + 1)..vertices {
            if stream.next_f64() < edge_prob {
                let mut row = vec![0.0; vertices];
                row[i] = 1.0;
                row[j] = -1.0;
                entries.extend_from_slice(&row);
                edges += 1;
            }
        }
    }
    if edges == 0 {
        return Err(Error::InvalidSpec(
            "sampled graph has no edges; raise edge_prob or change the seed".into(),
        ));
    }
    DenseMatrix::from_vec(edges, vertices, entries)
}

/// Generates the matrix described by the spec. Deterministic per seed;
/// spectrum-prescribed kinds realize their singular values exactly up to
/// floating-point rounding.
pub fn generate(spec: &GeneratorSpec) -> Result<DenseMatrix> {
    spec.validate()?;
    let (n, m) = spec.shape;
    match &spec.spectrum {
        Spectrum::PowerLaw { alpha } => {
            let d = n.min(m);
            let sigma: Vec<f64> = (1..=d).map(|j| (j as f64).powf(-alpha)).collect();
            spectrum_matrix(n, m, &sigma, spec.seed)
        }
        Spectrum::ExpDecay { beta } => {
            let d = n.min(m);
            let sigma: Vec<f64> = (1..=d).map(|j| (-beta * (j as f64 - 1.0)).exp()).collect();
            spectrum_matrix(n, m, &sigma, spec.seed)
        }
        Spectrum::ExactRank { r } => {
            let sigma = vec![1.0; *r];
            spectrum_matrix(n, m, &sigma, spec.seed)
        }
        Spectrum::LowRankPlusNoise { r, noise_sigma } => {
            let sigma = vec![1.0; *r];
            let signal = spectrum_matrix(n, m, &sigma, spec.seed)?;
            if *noise_sigma == 0.0 {
                return Ok(signal);
            }
            let mut stream = SeedStream::new(derive(spec.seed, 3));
            let noise =
                DenseMatrix::from_fn(n, m, |_, _| noise_sigma * stream.next_gauss())?;
            signal.add(&noise)
        }
        Spectrum::GraphIncidence { vertices, edge_prob } => {
            incidence_matrix(*vertices, *edge_prob, spec.seed)
        }
    }
}
