//! Dense row-major matrix type shared by every module.

use crate::error::{Error, Result};

/// Dense matrix of `f64` entries stored row-major in a single `Vec`.
///
/// Invariants enforced by the constructors: `rows >= 1`, `cols >= 1`,
/// `entries.len() == rows * cols`, and every entry is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl DenseMatrix {
    /// Builds a matrix from row-major entries, validating shape and finiteness.
    pub fn from_vec(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::shape(
                "DenseMatrix::from_vec",
                "positive dimensions",
                format!("{rows}x{cols}"),
            ));
        }
        if entries.len() != rows * cols {
            return Err(Error::shape(
                "DenseMatrix::from_vec",
                format!("{} entries", rows * cols),
                format!("{}", entries.len()),
            ));
        }
        if let Some(pos) = entries.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidQuery(format!(
                "non-finite entry {} at flat index {pos}",
                entries[pos]
            )));
        }
        Ok(DenseMatrix { rows, cols, entries })
    }

    /// Builds a matrix by evaluating `f(i, j)` for every position.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut entries = Vec::with_capacity(rows.saturating_mul(cols));
        for i in 0..rows {
            for j in 0..cols {
                entries.push(f(i, j));
            }
        }
        DenseMatrix::from_vec(rows, cols, entries)
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::shape(
                "DenseMatrix::zeros",
                "positive dimensions",
                format!("{rows}x{cols}"),
            ));
        }
        Ok(DenseMatrix {
            rows,
            cols,
            entries: vec![0.0; rows * cols],
        })
    }

    pub fn identity(n: usize) -> Result<Self> {
        let mut m = DenseMatrix::zeros(n, n)?;
        for i in 0..n {
            m.entries[i * n + i] = 1.0;
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        assert!(i < self.rows && j < self.cols, "index ({i},{j}) out of bounds");
        self.entries[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(i < self.rows && j < self.cols, "index ({i},{j}) out of bounds");
        assert!(v.is_finite(), "non-finite entry {v}");
        self.entries[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        assert!(i < self.rows, "row {i} out of bounds");
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        assert!(j < self.cols, "col {j} out of bounds");
        (0..self.rows).map(|i| self.entries[i * self.cols + j]).collect()
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut out = vec![0.0; self.entries.len()];
        for i in 0..self.rows {
            let src = &self.entries[i * self.cols..(i + 1) * self.cols];
            for (j, &v) in src.iter().enumerate() {
                out[j * self.rows + i] = v;
            }
        }
        DenseMatrix {
            rows: self.cols,
            cols: self.rows,
            entries: out,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|&v| v == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, &v| m.max(v.abs()))
    }

    /// `self * other`.
    pub fn mul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(Error::shape(
                "DenseMatrix::mul",
                format!("inner dimension {}", self.cols),
                format!("{}", other.rows),
            ));
        }
        let mut out = vec![0.0; self.rows * other.cols];
        let oc = other.cols;
        for i in 0..self.rows {
            let arow = &self.entries[i * self.cols..(i + 1) * self.cols];
            let orow = &mut out[i * oc..(i + 1) * oc];
            for (k, &aik) in arow.iter().enumerate() {
                if aik == 0.0 {
                    continue;
                }
                let brow = &other.entries[k * oc..(k + 1) * oc];
                for (o, &b) in orow.iter_mut().zip(brow) {
                    *o += aik * b;
                }
            }
        }
        Ok(DenseMatrix {
            rows: self.rows,
            cols: other.cols,
            entries: out,
        })
    }

    /// `self^T * other`, without materializing the transpose.
    pub fn t_mul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.rows != other.rows {
            return Err(Error::shape(
                "DenseMatrix::t_mul",
                format!("matching row count {}", self.rows),
                format!("{}", other.rows),
            ));
        }
        let mut out = vec![0.0; self.cols * other.cols];
        let oc = other.cols;
        for k in 0..self.rows {
            let arow = &self.entries[k * self.cols..(k + 1) * self.cols];
            let brow = &other.entries[k * oc..(k + 1) * oc];
            for (i, &aki) in arow.iter().enumerate() {
                if aki == 0.0 {
                    continue;
                }
                let orow = &mut out[i * oc..(i + 1) * oc];
                for (o, &b) in orow.iter_mut().zip(brow) {
                    *o += aki * b;
                }
            }
        }
        Ok(DenseMatrix {
            rows: self.cols,
            cols: other.cols,
            entries: out,
        })
    }

    /// `self * other^T`.
    pub fn mul_t(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.cols {
            return Err(Error::shape(
                "DenseMatrix::mul_t",
                format!("matching column count {}", self.cols),
                format!("{}", other.cols),
            ));
        }
        let mut out = vec![0.0; self.rows * other.rows];
        for i in 0..self.rows {
            let arow = &self.entries[i * self.cols..(i + 1) * self.cols];
            for j in 0..other.rows {
                let brow = &other.entries[j * other.cols..(j + 1) * other.cols];
                let mut acc = 0.0;
                for (&a, &b) in arow.iter().zip(brow) {
                    acc += a * b;
                }
                out[i * other.rows + j] = acc;
            }
        }
        Ok(DenseMatrix {
            rows: self.rows,
            cols: other.rows,
            entries: out,
        })
    }

    /// `self * x` for a vector `x`.
    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::shape(
                "DenseMatrix::mul_vec",
                format!("vector of length {}", self.cols),
                format!("{}", x.len()),
            ));
        }
        let mut out = vec![0.0; self.rows];
        for i in 0..self.rows {
            let arow = &self.entries[i * self.cols..(i + 1) * self.cols];
            let mut acc = 0.0;
            for (&a, &v) in arow.iter().zip(x) {
                acc += a * v;
            }
            out[i] = acc;
        }
        Ok(out)
    }

    /// `self^T * x` for a vector `x`.
    pub fn t_mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.rows {
            return Err(Error::shape(
                "DenseMatrix::t_mul_vec",
                format!("vector of length {}", self.rows),
                format!("{}", x.len()),
            ));
        }
        let mut out = vec![0.0; self.cols];
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let arow = &self.entries[i * self.cols..(i + 1) * self.cols];
            for (o, &a) in out.iter_mut().zip(arow) {
                *o += xi * a;
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        self.zip_entries("DenseMatrix::add", other, |a, b| a + b)
    }

    pub fn sub(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        self.zip_entries("DenseMatrix::sub", other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> DenseMatrix {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|&v| v * s).collect(),
        }
    }

    /// Adds `s * other` into `self` in place.
    pub fn add_scaled(&mut self, other: &DenseMatrix, s: f64) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::shape(
                "DenseMatrix::add_scaled",
                format!("{}x{}", self.rows, self.cols),
                format!("{}x{}", other.rows, other.cols),
            ));
        }
        for (a, &b) in self.entries.iter_mut().zip(&other.entries) {
            *a += s * b;
        }
        Ok(())
    }

    fn zip_entries(
        &self,
        context: &'static str,
        other: &DenseMatrix,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<DenseMatrix> {
        if self.shape() != other.shape() {
            return Err(Error::shape(
                context,
                format!("{}x{}", self.rows, self.cols),
                format!("{}x{}", other.rows, other.cols),
            ));
        }
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            entries,
        })
    }
}

/// Euclidean norm of a vector.
pub fn vec_norm(x: &[f64]) -> f64 {
    x.iter().map(|&v| v * v).sum::<f64>().sqrt()
}

/// Dot product of two equal-length vectors.
pub fn vec_dot(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(&a, &b)| a * b).sum()
}
