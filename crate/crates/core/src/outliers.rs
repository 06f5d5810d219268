//! Local Outlier Factor scoring of test questions.
//!
//! In the default novelty mode each question is scored against the document
//! embeddings only: its neighbourhood is drawn from the chunks, and the
//! chunks' own k-distances and densities are computed within the chunk set.
//! Scores are reported as `LOF - 1`, so inliers sit near zero.

use serde::{Deserialize, Serialize};

use crate::corpus::TestQuestion;
use crate::embed::EmbeddingMatrix;
use crate::geometry::{pairwise_normalized, normalized_rows, GeometryError, Role};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LofError {
    #[error(
        "LOF needs at least n_neighbors + 1 = {needed} reference points but only {available} are available; \
         lower n_neighbors to at most {max}"
    )]
    TooFewReferences { needed: usize, available: usize, max: usize },
    #[error("n_neighbors must be at least 1")]
    ZeroNeighbors,
    #[error("outlier threshold must be finite")]
    BadThreshold,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

pub const DEFAULT_NEIGHBORS: usize = 20;
pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LofMode {
    /// Questions scored against the chunk embeddings.
    #[default]
    Novelty,
    /// Classic LOF over the question embeddings alone.
    QuestionsOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LofConfig {
    /// `None` means the default of 20, clamped to the reference set size
    /// minus one. An explicit value is never clamped.
    pub n_neighbors: Option<usize>,
    pub outlier_threshold: f64,
    pub mode: LofMode,
}

impl Default for LofConfig {
    fn default() -> Self {
        Self {
            n_neighbors: None,
            outlier_threshold: DEFAULT_THRESHOLD,
            mode: LofMode::Novelty,
        }
    }
}

impl LofConfig {
    pub fn validate(&self) -> Result<(), LofError> {
        if self.n_neighbors == Some(0) {
            return Err(LofError::ZeroNeighbors);
        }
        if !self.outlier_threshold.is_finite() {
            return Err(LofError::BadThreshold);
        }
        Ok(())
    }

    fn effective_k(&self, references: usize) -> Result<usize, LofError> {
        let max = references.saturating_sub(1);
        match self.n_neighbors {
            Some(k) if k + 1 > references => Err(LofError::TooFewReferences {
                needed: k + 1,
                available: references,
                max,
            }),
            Some(k) => Ok(k),
            None if max == 0 => Err(LofError::TooFewReferences {
                needed: 2,
                available: references,
                max,
            }),
            None => Ok(DEFAULT_NEIGHBORS.min(max)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionAssessment {
    pub question_index: usize,
    pub lof_raw: f64,
    pub reported_score: f64,
    pub is_outlier: bool,
    pub nearest_doc_distance: f64,
}

/// k nearest columns of `row` (ties to the lower index), skipping `exclude`.
fn k_nearest(row: &[f64], k: usize, exclude: Option<usize>) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..row.len()).filter(|&j| Some(j) != exclude).collect();
    idx.sort_by(|&a, &b| row[a].total_cmp(&row[b]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// Neighbourhoods, k-distances and local reachability densities of a
/// reference set, given its square distance matrix.
struct Reference {
    k_distance: Vec<f64>,
    lrd: Vec<f64>,
}

fn reach_density(dists: &[f64], neighbors: &[usize], k_distance: &[f64]) -> f64 {
    let mean = neighbors
        .iter()
        .map(|&o| k_distance[o].max(dists[o]))
        .sum::<f64>()
        / neighbors.len() as f64;
    if mean == 0.0 {
        f64::INFINITY
    } else {
        1.0 / mean
    }
}

fn reference(square: &[Vec<f64>], k: usize) -> Reference {
    let neighbors: Vec<Vec<usize>> = square
        .iter()
        .enumerate()
        .map(|(i, row)| k_nearest(row, k, Some(i)))
        .collect();
    let k_distance: Vec<f64> = square
        .iter()
        .zip(&neighbors)
        .map(|(row, nb)| row[*nb.last().expect("k >= 1")])
        .collect();
    let lrd = square
        .iter()
        .zip(&neighbors)
        .map(|(row, nb)| reach_density(row, nb, &k_distance))
        .collect();
    Reference { k_distance, lrd }
}

/// `mean(lrd(o) / lrd(p))` with `inf / inf = 1`. An infinite ratio is
/// reported as `f64::MAX` so scores stay representable.
fn lof_value(lrd_point: f64, neighbor_lrds: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for l in neighbor_lrds {
        let ratio = match (l.is_infinite(), lrd_point.is_infinite()) {
            (true, true) => 1.0,
            (false, true) => 0.0,
            _ => l / lrd_point,
        };
        sum += ratio;
        count += 1;
    }
    let v = sum / count as f64;
    if v.is_finite() {
        v
    } else {
        f64::MAX
    }
}

fn square_rows(m: &[Vec<f64>], role: Role) -> Result<Vec<Vec<f64>>, GeometryError> {
    let d = pairwise_normalized(m, role, m, role)?;
    Ok((0..d.n_rows).map(|i| d.row(i).to_vec()).collect())
}

/// Scores every question; `is_outlier` iff `lof_raw - 1 > outlier_threshold`.
pub fn lof_assess(
    e_q: &EmbeddingMatrix,
    e_d: &EmbeddingMatrix,
    cfg: &LofConfig,
) -> Result<Vec<QuestionAssessment>, LofError> {
    cfg.validate()?;
    if e_q.dim() != e_d.dim() {
        return Err(GeometryError::DimensionMismatch(e_q.dim(), e_d.dim()).into());
    }
    let q = normalized_rows(e_q, Role::Question)?;
    let d = normalized_rows(e_d, Role::Chunk)?;
    let q_to_d = pairwise_normalized(&q, Role::Question, &d, Role::Chunk)?;
    let nearest_doc: Vec<f64> = (0..q.len())
        .map(|i| q_to_d.row(i).iter().copied().fold(f64::INFINITY, f64::min))
        .collect();

    let lof_raw: Vec<f64> = match cfg.mode {
        LofMode::Novelty => {
            let k = cfg.effective_k(d.len())?;
            let reference = reference(&square_rows(&d, Role::Chunk)?, k);
            (0..q.len())
                .map(|i| {
                    let row = q_to_d.row(i);
                    let nb = k_nearest(row, k, None);
                    let lrd_q = reach_density(row, &nb, &reference.k_distance);
                    lof_value(lrd_q, nb.iter().map(|&b| reference.lrd[b]))
                })
                .collect()
        }
        LofMode::QuestionsOnly => {
            let k = cfg.effective_k(q.len())?;
            let square = square_rows(&q, Role::Question)?;
            let reference = reference(&square, k);
            square
                .iter()
                .enumerate()
                .map(|(i, row)| {
                    let nb = k_nearest(row, k, Some(i));
                    lof_value(reference.lrd[i], nb.iter().map(|&o| reference.lrd[o]))
                })
                .collect()
        }
    };

    Ok(lof_raw
        .into_iter()
        .zip(nearest_doc)
        .enumerate()
        .map(|(question_index, (lof_raw, nearest_doc_distance))| {
            let reported_score = lof_raw - 1.0;
            QuestionAssessment {
                question_index,
                lof_raw,
                reported_score,
                is_outlier: reported_score > cfg.outlier_threshold,
                nearest_doc_distance,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionPartition {
    pub inliers: Vec<TestQuestion>,
    pub outliers: Vec<TestQuestion>,
}

impl QuestionPartition {
    /// True when every question was filtered; coverage cannot be computed.
    pub fn no_inliers(&self) -> bool {
        self.inliers.is_empty()
    }

    pub fn inlier_indices(&self) -> Vec<usize> {
        self.inliers.iter().map(|q| q.index).collect()
    }
}

/// Stable split of `questions` by their assessments.
///
/// # Panics
/// If an assessment is missing for some question index.
pub fn filter_inliers(assessments: &[QuestionAssessment], questions: &[TestQuestion]) -> QuestionPartition {
    let (outliers, inliers): (Vec<TestQuestion>, Vec<TestQuestion>) = questions.iter().cloned().partition(|q| {
        assessments
            .iter()
            .find(|a| a.question_index == q.index)
            .unwrap_or_else(|| panic!("no assessment for question {}", q.index))
            .is_outlier
    });
    QuestionPartition { inliers, outliers }
}
