//! Dense row-major feature matrix with a cached zero-fraction.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MatrixError {
    #[error("matrix has no entries")]
    EmptyMatrix,
    #[error("shape mismatch: expected {expected} values for {rows}x{cols}, got {got}")]
    Shape {
        rows: usize,
        cols: usize,
        expected: usize,
        got: usize,
    },
    #[error("row {row} has {got} columns, expected {expected}")]
    RaggedRow {
        row: usize,
        expected: usize,
        got: usize,
    },
}

/// Dense `n_rows x n_cols` matrix stored row-major.
///
/// The fraction of exact-zero entries is computed once at construction and
/// cached; the matrix exposes no in-place mutation so the cache cannot go
/// stale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrix", into = "RawMatrix")]
pub struct FeatureMatrix {
    n_rows: usize,
    n_cols: usize,
    values: Vec<f64>,
    zeros: usize,
}

#[derive(Serialize, Deserialize)]
struct RawMatrix {
    n_rows: usize,
    n_cols: usize,
    values: Vec<f64>,
}

impl TryFrom<RawMatrix> for FeatureMatrix {
    type Error = MatrixError;

    fn try_from(raw: RawMatrix) -> Result<Self, Self::Error> {
        FeatureMatrix::from_vec(raw.n_rows, raw.n_cols, raw.values)
    }
}

impl From<FeatureMatrix> for RawMatrix {
    fn from(m: FeatureMatrix) -> Self {
        RawMatrix {
            n_rows: m.n_rows,
            n_cols: m.n_cols,
            values: m.values,
        }
    }
}

fn count_zeros(values: &[f64]) -> usize {
    values.iter().filter(|v| **v == 0.0).count()
}

impl FeatureMatrix {
    pub fn from_vec(n_rows: usize, n_cols: usize, values: Vec<f64>) -> Result<Self, MatrixError> {
        let expected = n_rows * n_cols;
        if values.len() != expected {
            return Err(MatrixError::Shape {
                rows: n_rows,
                cols: n_cols,
                expected,
                got: values.len(),
            });
        }
        let zeros = count_zeros(&values);
        Ok(Self {
            n_rows,
            n_cols,
            values,
            zeros,
        })
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            values: vec![0.0; n_rows * n_cols],
            zeros: n_rows * n_cols,
        }
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, MatrixError> {
        let n_cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut values = Vec::with_capacity(rows.len() * n_cols);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != n_cols {
                return Err(MatrixError::RaggedRow {
                    row: i,
                    expected: n_cols,
                    got: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        Self::from_vec(rows.len(), n_cols, values)
    }

    /// Builds a matrix by filling each row in place.
    pub fn from_fn_rows(n_rows: usize, n_cols: usize, mut fill: impl FnMut(usize, &mut [f64])) -> Self {
        let mut values = vec![0.0; n_rows * n_cols];
        if n_cols > 0 {
            for (i, row) in values.chunks_exact_mut(n_cols).enumerate() {
                fill(i, row);
            }
        }
        let zeros = count_zeros(&values);
        Self {
            n_rows,
            n_cols,
            values,
            zeros,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact panics on a zero chunk size
        let width = self.n_cols.max(1);
        let take = if self.n_cols == 0 { 0 } else { self.n_rows };
        self.values.chunks_exact(width).take(take)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_cols + j]
    }

    /// Number of exact-zero entries.
    pub fn zero_count(&self) -> usize {
        self.zeros
    }

    /// Fraction of exact-zero entries, `count(x == 0) / (rows * cols)`.
    pub fn sparsity(&self) -> Result<f64, MatrixError> {
        if self.values.is_empty() {
            return Err(MatrixError::EmptyMatrix);
        }
        Ok(self.zeros as f64 / self.values.len() as f64)
    }

    /// Copies out the columns `[start, end)`.
    pub fn column_slice(&self, start: usize, end: usize) -> FeatureMatrix {
        assert!(start <= end && end <= self.n_cols, "column range out of bounds");
        let width = end - start;
        FeatureMatrix::from_fn_rows(self.n_rows, width, |i, out| {
            out.copy_from_slice(&self.row(i)[start..end]);
        })
    }

    /// Copies out the given rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> FeatureMatrix {
        FeatureMatrix::from_fn_rows(indices.len(), self.n_cols, |i, out| {
            out.copy_from_slice(self.row(indices[i]));
        })
    }

    /// Horizontal concatenation of matrices sharing a row count.
    pub fn hstack(parts: &[&FeatureMatrix]) -> Result<FeatureMatrix, MatrixError> {
        let n_rows = parts.first().map(|m| m.n_rows).unwrap_or(0);
        for m in parts {
            if m.n_rows != n_rows {
                return Err(MatrixError::RaggedRow {
                    row: m.n_rows,
                    expected: n_rows,
                    got: m.n_rows,
                });
            }
        }
        let n_cols = parts.iter().map(|m| m.n_cols).sum();
        Ok(FeatureMatrix::from_fn_rows(n_rows, n_cols, |i, out| {
            let mut at = 0;
            for m in parts {
                out[at..at + m.n_cols].copy_from_slice(m.row(i));
                at += m.n_cols;
            }
        }))
    }

    /// Writes the matrix as CSV with a header row.
    pub fn write_csv<W: Write>(&self, mut out: W, header: &[String]) -> std::io::Result<()> {
        writeln!(out, "{}", header.join(","))?;
        for row in self.rows() {
            let mut first = true;
            for v in row {
                if !first {
                    out.write_all(b",")?;
                }
                first = false;
                write!(out, "{v}")?;
            }
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_zero_matrix_is_fully_sparse() {
        let m = FeatureMatrix::zeros(3, 3);
        assert_eq!(m.sparsity().unwrap(), 1.0);
    }

    #[test]
    fn single_row_sparsity() {
        let m = FeatureMatrix::from_rows(&[[0.0, 0.0, 1.0, 0.0]]).unwrap();
        assert_eq!(m.sparsity().unwrap(), 0.75);
    }

    #[test]
    fn empty_matrix_has_no_sparsity() {
        let m = FeatureMatrix::zeros(0, 5);
        assert_eq!(m.sparsity(), Err(MatrixError::EmptyMatrix));
    }

    #[test]
    fn negative_zero_counts_as_zero() {
        let m = FeatureMatrix::from_rows(&[[-0.0, 1e-300]]).unwrap();
        assert_eq!(m.zero_count(), 1);
    }

    #[test]
    fn ragged_rows_rejected() {
        let rows: Vec<Vec<f64>> = vec![vec![1.0, 2.0], vec![3.0]];
        assert!(matches!(
            FeatureMatrix::from_rows(&rows),
            Err(MatrixError::RaggedRow { row: 1, .. })
        ));
    }

    #[test]
    fn hstack_and_slice_roundtrip() {
        let a = FeatureMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let b = FeatureMatrix::from_rows(&[[5.0], [6.0]]).unwrap();
        let c = FeatureMatrix::hstack(&[&a, &b]).unwrap();
        assert_eq!(c.row(1), &[3.0, 4.0, 6.0]);
        assert_eq!(c.column_slice(0, 2), a);
        assert_eq!(c.column_slice(2, 3), b);
    }

    #[test]
    fn serde_rebuilds_zero_cache() {
        let m = FeatureMatrix::from_rows(&[[0.0, 2.0], [0.0, 0.0]]).unwrap();
        let json = serde_json::to_string(&m).unwrap();
        let back: FeatureMatrix = serde_json::from_str(&json).unwrap();
        assert_eq!(back.zero_count(), 3);
        assert_eq!(back, m);
    }
}
