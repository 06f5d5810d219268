//! 2-D projection of chunks and questions, rendered as an SVG scatter plot.

pub mod pca;
mod svg;
pub mod tsne;

use serde::{Deserialize, Serialize};

use crate::cluster::ClusterModel;
use crate::embed::EmbeddingMatrix;
use crate::outliers::QuestionAssessment;

pub use pca::pca_2d;
pub use svg::{render_scatter, scatter_svg};
pub use tsne::{tsne, TsneParams};

/// Above this many points the projection falls back to PCA automatically.
pub const PCA_AUTO_THRESHOLD: usize = 5000;
pub const MIN_TSNE_POINTS: usize = 4;

#[derive(Debug, thiserror::Error)]
pub enum VizError {
    #[error("t-SNE needs at least {needed} points, got {points}; use the pca method for tiny inputs")]
    TooFewPoints { points: usize, needed: usize },
    #[error("perplexity {perplexity} is too large for {points} points (maximum {max:.3}); lower the perplexity or add points")]
    BadPerplexity { perplexity: f64, points: usize, max: f64 },
    #[error("inconsistent projection: {0}")]
    Inconsistent(String),
    #[error("projection produced a non-finite coordinate at row {0}")]
    NonFinite(usize),
    #[error("cannot write plot {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProjectionMethod {
    Tsne,
    Pca,
}

impl ProjectionMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Tsne => "tsne",
            Self::Pca => "pca",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointRole {
    Chunk,
    InlierQuestion,
    OutlierQuestion,
}

/// Roles and cluster ids for the rows of a joint chunk/question matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PointLabels {
    pub roles: Vec<PointRole>,
    pub cluster_of: Vec<usize>,
    /// Original question index for each question row.
    pub question_index: Vec<usize>,
}

impl PointLabels {
    pub fn new(model: &ClusterModel, assessments: &[QuestionAssessment]) -> Self {
        let mut roles = vec![PointRole::Chunk; model.n()];
        roles.extend(assessments.iter().map(|a| {
            if a.is_outlier {
                PointRole::OutlierQuestion
            } else {
                PointRole::InlierQuestion
            }
        }));
        Self {
            roles,
            cluster_of: model.assignments.clone(),
            question_index: assessments.iter().map(|a| a.question_index).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection2D {
    /// Chunks first, then questions.
    pub points: Vec<[f64; 2]>,
    pub roles: Vec<PointRole>,
    pub cluster_of: Vec<usize>,
    pub question_index: Vec<usize>,
    pub method: ProjectionMethod,
    pub seed: u64,
}

impl Projection2D {
    pub fn n_chunks(&self) -> usize {
        self.roles.iter().filter(|r| **r == PointRole::Chunk).count()
    }

    pub fn validate(&self) -> Result<(), VizError> {
        if self.points.len() != self.roles.len() {
            return Err(VizError::Inconsistent(format!(
                "{} points but {} roles",
                self.points.len(),
                self.roles.len()
            )));
        }
        let n = self.n_chunks();
        if self.roles[..n].iter().any(|r| *r != PointRole::Chunk) {
            return Err(VizError::Inconsistent("chunk rows must precede question rows".into()));
        }
        if self.cluster_of.len() != n {
            return Err(VizError::Inconsistent(format!("{} chunks but {} cluster ids", n, self.cluster_of.len())));
        }
        if self.question_index.len() != self.roles.len() - n {
            return Err(VizError::Inconsistent("question index length does not match question rows".into()));
        }
        if let Some(i) = self.points.iter().position(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(VizError::NonFinite(i));
        }
        Ok(())
    }
}

/// Largest admissible perplexity for `points` rows.
pub fn max_perplexity(points: usize) -> f64 {
    (points.saturating_sub(1)) as f64 / 3.0
}

pub fn default_perplexity(points: usize) -> f64 {
    max_perplexity(points).min(30.0)
}

/// Picks t-SNE unless the input is too large for the exact algorithm or too
/// small for it to be defined.
pub fn auto_method(points: usize) -> ProjectionMethod {
    if !(MIN_TSNE_POINTS..=PCA_AUTO_THRESHOLD).contains(&points) {
        ProjectionMethod::Pca
    } else {
        ProjectionMethod::Tsne
    }
}

fn unit_rows(e_all: &EmbeddingMatrix) -> Vec<Vec<f64>> {
    e_all
        .rows()
        .map(|r| {
            let norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                r.iter().map(|x| x / norm).collect()
            } else {
                r.to_vec()
            }
        })
        .collect()
}

/// Projects the joint matrix (chunks then questions) to 2-D.
///
/// Rows are L2-normalised first so Euclidean layout follows cosine distance.
/// `method = None` selects automatically.
pub fn project_2d(
    e_all: &EmbeddingMatrix,
    labels: PointLabels,
    method: Option<ProjectionMethod>,
    seed: u64,
    perplexity: Option<f64>,
) -> Result<Projection2D, VizError> {
    let n = e_all.n_rows();
    if labels.roles.len() != n {
        return Err(VizError::Inconsistent(format!("{} rows but {} roles", n, labels.roles.len())));
    }
    let method = method.unwrap_or_else(|| auto_method(n));
    let rows = unit_rows(e_all);
    let points = match method {
        ProjectionMethod::Pca => pca_2d(&rows),
        ProjectionMethod::Tsne => {
            if n < MIN_TSNE_POINTS {
                return Err(VizError::TooFewPoints { points: n, needed: MIN_TSNE_POINTS });
            }
            let max = max_perplexity(n);
            let p = perplexity.unwrap_or_else(|| default_perplexity(n));
            if !(p > 0.0 && p <= max) {
                return Err(VizError::BadPerplexity { perplexity: p, points: n, max });
            }
            tsne(&rows, &TsneParams::new(p, seed))
        }
    };
    let proj = Projection2D {
        points,
        roles: labels.roles,
        cluster_of: labels.cluster_of,
        question_index: labels.question_index,
        method,
        seed,
    };
    proj.validate()?;
    Ok(proj)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(n: usize) -> PointLabels {
        PointLabels { roles: vec![PointRole::Chunk; n], cluster_of: vec![0; n], question_index: vec![] }
    }

    #[test]
    fn tiny_inputs_need_pca() {
        let e = EmbeddingMatrix::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let err = project_2d(&e, labels(3), Some(ProjectionMethod::Tsne), 0, None).unwrap_err();
        assert!(err.to_string().contains("pca"));
        let p = project_2d(&e, labels(3), None, 0, None).unwrap();
        assert_eq!(p.method, ProjectionMethod::Pca);
    }

    #[test]
    fn perplexity_bound() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![1.0, i as f64]).collect();
        let e = EmbeddingMatrix::from_rows(rows).unwrap();
        assert!(matches!(
            project_2d(&e, labels(10), Some(ProjectionMethod::Tsne), 0, Some(3.5)),
            Err(VizError::BadPerplexity { .. })
        ));
        assert_eq!(default_perplexity(10), 3.0);
        assert_eq!(default_perplexity(1000), 30.0);
    }

    #[test]
    fn auto_switches_on_size() {
        assert_eq!(auto_method(50), ProjectionMethod::Tsne);
        assert_eq!(auto_method(5001), ProjectionMethod::Pca);
    }
}
