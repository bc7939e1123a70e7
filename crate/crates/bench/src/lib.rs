//! Shared fixtures for the workspace benchmarks.

use sketchspec_core::generate::{generate, GeneratorSpec, Spectrum};
use sketchspec_core::DenseMatrix;

/// Power-law decay instance used across the benchmark groups.
pub fn power_law(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    let spec = GeneratorSpec::new((rows, cols), Spectrum::PowerLaw { alpha: 1.0 }, seed);
    generate(&spec).expect("benchmark fixture generates")
}

/// Exact low-rank instance used by the product benchmarks.
pub fn exact_rank(rows: usize, cols: usize, r: usize, seed: u64) -> DenseMatrix {
    let spec = GeneratorSpec::new((rows, cols), Spectrum::ExactRank { r }, seed);
    generate(&spec).expect("benchmark fixture generates")
}
