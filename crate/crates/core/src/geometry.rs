//! Cosine distance, `dist(u, v) = 1 - u·v / (‖u‖‖v‖)`, and the matrix
//! computations built on it.

use serde::{Deserialize, Serialize};

use crate::embed::EmbeddingMatrix;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("degenerate embedding: {role} row {row} has zero norm")]
    DegenerateEmbedding { role: Role, row: usize },
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("no inlier questions remain")]
    NoInlierQuestions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Chunk,
    Question,
    Centroid,
}

impl std::fmt::Display for Role {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Role::Chunk => "chunk",
            Role::Question => "question",
            Role::Centroid => "centroid",
        })
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `1 - cos(u, v)`, clamped to `[0, 2]` against rounding.
pub fn cosine_distance(u: &[f64], v: &[f64]) -> Result<f64, GeometryError> {
    if u.len() != v.len() {
        return Err(GeometryError::DimensionMismatch(u.len(), v.len()));
    }
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 {
        return Err(GeometryError::DegenerateEmbedding { role: Role::Chunk, row: 0 });
    }
    if nv == 0.0 {
        return Err(GeometryError::DegenerateEmbedding { role: Role::Question, row: 0 });
    }
    Ok((1.0 - dot(u, v) / (nu * nv)).clamp(0.0, 2.0))
}

/// Unit-length copies of every row.
pub fn normalized_rows(m: &EmbeddingMatrix, role: Role) -> Result<Vec<Vec<f64>>, GeometryError> {
    m.rows()
        .enumerate()
        .map(|(row, r)| {
            let n = norm(r);
            if n == 0.0 {
                Err(GeometryError::DegenerateEmbedding { role, row })
            } else {
                Ok(r.iter().map(|x| x / n).collect())
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub row_role: Role,
    pub col_role: Role,
    values: Vec<f64>,
}

impl DistanceMatrix {
    pub fn new(n_rows: usize, n_cols: usize, row_role: Role, col_role: Role, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), n_rows * n_cols, "distance matrix shape");
        Self {
            n_rows,
            n_cols,
            row_role,
            col_role,
            values,
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Keeps only the listed columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Self {
        let mut values = Vec::with_capacity(self.n_rows * cols.len());
        for i in 0..self.n_rows {
            let row = self.row(i);
            values.extend(cols.iter().map(|&j| row[j]));
        }
        Self::new(self.n_rows, cols.len(), self.row_role, self.col_role, values)
    }
}

/// All cosine distances between rows of `a` and rows of `b`.
pub fn pairwise_distances(
    a: &EmbeddingMatrix,
    a_role: Role,
    b: &EmbeddingMatrix,
    b_role: Role,
) -> Result<DistanceMatrix, GeometryError> {
    if a.dim() != b.dim() {
        return Err(GeometryError::DimensionMismatch(a.dim(), b.dim()));
    }
    let an = normalized_rows(a, a_role)?;
    let bn = normalized_rows(b, b_role)?;
    pairwise_normalized(&an, a_role, &bn, b_role)
}

/// Same as [`pairwise_distances`] for rows that are already unit length.
pub fn pairwise_normalized(
    a: &[Vec<f64>],
    a_role: Role,
    b: &[Vec<f64>],
    b_role: Role,
) -> Result<DistanceMatrix, GeometryError> {
    let mut values = Vec::with_capacity(a.len() * b.len());
    for ra in a {
        for rb in b {
            values.push((1.0 - dot(ra, rb)).clamp(0.0, 2.0));
        }
    }
    Ok(DistanceMatrix::new(a.len(), b.len(), a_role, b_role, values))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinDistVector {
    pub values: Vec<f64>,
    /// Column index of the first minimum in each row.
    pub argmin: Vec<usize>,
}

/// Row minima of a chunk-by-question distance matrix.
pub fn min_distances(chunk_to_question: &DistanceMatrix) -> Result<MinDistVector, GeometryError> {
    if chunk_to_question.n_cols == 0 {
        return Err(GeometryError::NoInlierQuestions);
    }
    let mut values = Vec::with_capacity(chunk_to_question.n_rows);
    let mut argmin = Vec::with_capacity(chunk_to_question.n_rows);
    for i in 0..chunk_to_question.n_rows {
        let (j, v) = chunk_to_question
            .row(i)
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::INFINITY), |(bj, bv), (j, v)| if v < bv { (j, v) } else { (bj, bv) });
        values.push(v);
        argmin.push(j);
    }
    Ok(MinDistVector { values, argmin })
}
