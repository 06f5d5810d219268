use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MatrixError {
    #[error("embedding matrix has no rows")]
    Empty,
    #[error("row {row} has dimension {found}, expected {expected}")]
    DimensionMismatch { row: usize, expected: usize, found: usize },
    #[error("row {row} contains a non-finite value")]
    NonFinite { row: usize },
    #[error("embedding dimension must be at least 1")]
    ZeroDimension,
}

/// Row-major matrix of embeddings; row `i` embeds the `i`-th source text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl EmbeddingMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, MatrixError> {
        let dim = rows.first().ok_or(MatrixError::Empty)?.len();
        if dim == 0 {
            return Err(MatrixError::ZeroDimension);
        }
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (row, values) in rows.into_iter().enumerate() {
            if values.len() != dim {
                return Err(MatrixError::DimensionMismatch {
                    row,
                    expected: dim,
                    found: values.len(),
                });
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(MatrixError::NonFinite { row });
            }
            data.extend(values);
        }
        Ok(Self { dim, data })
    }

    pub fn from_flat(dim: usize, data: Vec<f64>) -> Result<Self, MatrixError> {
        if dim == 0 {
            return Err(MatrixError::ZeroDimension);
        }
        if data.is_empty() {
            return Err(MatrixError::Empty);
        }
        if !data.len().is_multiple_of(dim) {
            return Err(MatrixError::DimensionMismatch {
                row: data.len() / dim,
                expected: dim,
                found: data.len() % dim,
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(MatrixError::NonFinite { row: pos / dim });
        }
        Ok(Self { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_rows(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// New matrix made of the selected rows, in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<Self, MatrixError> {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self::from_flat(self.dim, data)
    }

    /// Stacks `other` below `self`.
    pub fn vstack(&self, other: &Self) -> Result<Self, MatrixError> {
        if other.dim != self.dim {
            return Err(MatrixError::DimensionMismatch {
                row: self.n_rows(),
                expected: self.dim,
                found: other.dim,
            });
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Self { dim: self.dim, data })
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_ragged_and_non_finite() {
        assert_eq!(
            EmbeddingMatrix::from_rows(vec![vec![1.0, 2.0], vec![1.0]]),
            Err(MatrixError::DimensionMismatch { row: 1, expected: 2, found: 1 })
        );
        assert_eq!(
            EmbeddingMatrix::from_rows(vec![vec![1.0, f64::NAN]]),
            Err(MatrixError::NonFinite { row: 0 })
        );
        assert_eq!(EmbeddingMatrix::from_rows(vec![]), Err(MatrixError::Empty));
    }

    #[test]
    fn select_and_stack() {
        let m = EmbeddingMatrix::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let s = m.select(&[2, 0]).unwrap();
        assert_eq!(s.to_rows(), vec![vec![1.0, 1.0], vec![1.0, 0.0]]);
        let st = s.vstack(&m).unwrap();
        assert_eq!(st.n_rows(), 5);
        assert_eq!(st.row(4), &[1.0, 1.0]);
    }
}
