//! Coverage metrics over inlier questions.
//!
//! With `mindist(d_i)` the distance from chunk `i` to its nearest inlier
//! question:
//!
//! * basic    = `1 - mean_i mindist(d_i)`
//! * weighted = `sum_k |C_k|/n * (1 - clusterdist(C_k))`, where
//!   `clusterdist` is the mean `mindist` over the cluster's chunks
//! * multi    = the weighted form with each cluster's question pool
//!   restricted to the questions that cover it, i.e. those whose distance
//!   to the centroid is strictly below the threshold; clusters with no
//!   covering question contribute 0.
//!
//! Scores are relative: they compare question sets against one corpus and
//! are not meaningful as absolute grades.

use serde::{Deserialize, Serialize};

use crate::cluster::ClusterModel;
use crate::embed::EmbeddingMatrix;
use crate::geometry::{pairwise_distances, DistanceMatrix, GeometryError, MinDistVector, Role};

pub const DEFAULT_MULTI_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CoverageError {
    #[error("no chunks to cover")]
    NoChunks,
    #[error("cluster model covers {model} chunks but the distance data has {data}")]
    Inconsistent { model: usize, data: usize },
    #[error("multi-coverage threshold {0} outside [0, 2]")]
    BadThreshold(f64),
    #[error("N-closest coverage needs N >= 1")]
    BadClosest,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "value")]
pub enum MultiCoverageMode {
    /// A question covers every cluster whose centroid is strictly closer
    /// than the threshold (cosine distance).
    Threshold(f64),
    /// A question covers its N closest centroids.
    NClosest(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiCoverageConfig {
    pub mode: MultiCoverageMode,
}

impl Default for MultiCoverageConfig {
    fn default() -> Self {
        Self::threshold(DEFAULT_MULTI_THRESHOLD)
    }
}

impl MultiCoverageConfig {
    pub fn threshold(t: f64) -> Self {
        Self {
            mode: MultiCoverageMode::Threshold(t),
        }
    }

    pub fn validate(&self) -> Result<(), CoverageError> {
        match self.mode {
            MultiCoverageMode::Threshold(t) if !(0.0..=2.0).contains(&t) => Err(CoverageError::BadThreshold(t)),
            MultiCoverageMode::NClosest(0) => Err(CoverageError::BadClosest),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterCoverage {
    pub cluster_id: usize,
    pub size: usize,
    pub share: f64,
    /// `1 - clusterdist(C_k)` over all inlier questions.
    pub cluster_coverage: f64,
    /// `1 - multidist(C_k, Q_k)`, or 0 when no question covers the cluster.
    pub multi_coverage: f64,
    pub covering_question_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageScores {
    pub basic: f64,
    pub weighted: f64,
    pub multi_threshold: f64,
    pub multi_mode: MultiCoverageMode,
    pub n_chunks: usize,
    pub n_inlier_questions: usize,
    pub per_cluster: Vec<ClusterCoverage>,
}

pub fn basic_coverage(mindist: &MinDistVector) -> Result<f64, CoverageError> {
    if mindist.values.is_empty() {
        return Err(CoverageError::NoChunks);
    }
    let mean = mindist.values.iter().sum::<f64>() / mindist.values.len() as f64;
    Ok(1.0 - mean)
}

fn check_model(model: &ClusterModel, n: usize) -> Result<(), CoverageError> {
    if n == 0 {
        return Err(CoverageError::NoChunks);
    }
    if model.n() != n {
        return Err(CoverageError::Inconsistent { model: model.n(), data: n });
    }
    Ok(())
}

/// Weighted coverage plus per-cluster `(1 - clusterdist)` values.
/// The returned per-cluster entries carry zero `multi_coverage`.
pub fn weighted_coverage(mindist: &MinDistVector, model: &ClusterModel) -> Result<(f64, Vec<ClusterCoverage>), CoverageError> {
    let n = mindist.values.len();
    check_model(model, n)?;
    let mut total = 0.0;
    let per_cluster = model
        .members
        .iter()
        .enumerate()
        .map(|(cluster_id, members)| {
            let clusterdist = members.iter().map(|&i| mindist.values[i]).sum::<f64>() / members.len() as f64;
            let share = members.len() as f64 / n as f64;
            total += share * (1.0 - clusterdist);
            ClusterCoverage {
                cluster_id,
                size: members.len(),
                share,
                cluster_coverage: 1.0 - clusterdist,
                multi_coverage: 0.0,
                covering_question_count: 0,
            }
        })
        .collect();
    Ok((total, per_cluster))
}

/// Per-cluster covering sets `Q_k` (indices into the inlier question rows).
pub fn covering_sets(question_to_centroid: &DistanceMatrix, mode: MultiCoverageMode) -> Vec<Vec<usize>> {
    let k = question_to_centroid.n_cols;
    let mut sets = vec![Vec::new(); k];
    for q in 0..question_to_centroid.n_rows {
        let row = question_to_centroid.row(q);
        match mode {
            MultiCoverageMode::Threshold(t) => {
                for (c, &d) in row.iter().enumerate() {
                    if d < t {
                        sets[c].push(q);
                    }
                }
            }
            MultiCoverageMode::NClosest(n) => {
                let mut order: Vec<usize> = (0..k).collect();
                order.sort_by(|&a, &b| row[a].total_cmp(&row[b]).then(a.cmp(&b)));
                for &c in order.iter().take(n) {
                    sets[c].push(q);
                }
            }
        }
    }
    sets
}

/// Multi-cluster coverage from precomputed chunk-question and
/// question-centroid distances.
pub fn multi_coverage_from_distances(
    chunk_to_question: &DistanceMatrix,
    question_to_centroid: &DistanceMatrix,
    model: &ClusterModel,
    cfg: &MultiCoverageConfig,
) -> Result<(f64, Vec<(f64, usize)>), CoverageError> {
    cfg.validate()?;
    let n = chunk_to_question.n_rows;
    check_model(model, n)?;
    let sets = covering_sets(question_to_centroid, cfg.mode);
    let mut total = 0.0;
    let mut per_cluster = Vec::with_capacity(model.k);
    for (members, q_k) in model.members.iter().zip(&sets) {
        if q_k.is_empty() {
            per_cluster.push((0.0, 0));
            continue;
        }
        let multidist = members
            .iter()
            .map(|&i| {
                let row = chunk_to_question.row(i);
                q_k.iter().map(|&q| row[q]).fold(f64::INFINITY, f64::min)
            })
            .sum::<f64>()
            / members.len() as f64;
        let share = members.len() as f64 / n as f64;
        total += share * (1.0 - multidist);
        per_cluster.push((1.0 - multidist, q_k.len()));
    }
    Ok((total, per_cluster))
}

/// Multi-cluster coverage; returns the total and `(1 - multidist, |Q_k|)`
/// per cluster.
pub fn multi_threshold_coverage(
    e_q_inliers: &EmbeddingMatrix,
    e_d: &EmbeddingMatrix,
    model: &ClusterModel,
    cfg: &MultiCoverageConfig,
) -> Result<(f64, Vec<(f64, usize)>), CoverageError> {
    let d_q = pairwise_distances(e_d, Role::Chunk, e_q_inliers, Role::Question)?;
    let q_c = pairwise_distances(e_q_inliers, Role::Question, &model.centroid_matrix(), Role::Centroid)?;
    multi_coverage_from_distances(&d_q, &q_c, model, cfg)
}

/// All three metrics at once.
pub fn compute_coverage(
    e_q_inliers: &EmbeddingMatrix,
    e_d: &EmbeddingMatrix,
    model: &ClusterModel,
    cfg: &MultiCoverageConfig,
) -> Result<CoverageScores, CoverageError> {
    let d_q = pairwise_distances(e_d, Role::Chunk, e_q_inliers, Role::Question)?;
    let mindist = crate::geometry::min_distances(&d_q)?;
    let basic = basic_coverage(&mindist)?;
    let (weighted, mut per_cluster) = weighted_coverage(&mindist, model)?;
    let q_c = pairwise_distances(e_q_inliers, Role::Question, &model.centroid_matrix(), Role::Centroid)?;
    let (multi, multi_per) = multi_coverage_from_distances(&d_q, &q_c, model, cfg)?;
    for (pc, (m, count)) in per_cluster.iter_mut().zip(multi_per) {
        pc.multi_coverage = m;
        pc.covering_question_count = count;
    }
    Ok(CoverageScores {
        basic,
        weighted,
        multi_threshold: multi,
        multi_mode: cfg.mode,
        n_chunks: e_d.n_rows(),
        n_inlier_questions: e_q_inliers.n_rows(),
        per_cluster,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::min_distances;

    fn mat(rows: Vec<Vec<f64>>) -> EmbeddingMatrix {
        EmbeddingMatrix::from_rows(rows).unwrap()
    }

    fn md(values: Vec<f64>) -> MinDistVector {
        let argmin = vec![0; values.len()];
        MinDistVector { values, argmin }
    }

    #[test]
    fn identical_sets_give_full_coverage() {
        let d = mat(vec![vec![1.0, 0.0], vec![0.3, 0.7], vec![0.0, 1.0]]);
        let dq = pairwise_distances(&d, Role::Chunk, &d, Role::Question).unwrap();
        let b = basic_coverage(&min_distances(&dq).unwrap()).unwrap();
        assert!((b - 1.0).abs() < 1e-9);
    }

    #[test]
    fn two_chunk_example() {
        let d = mat(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let q = mat(vec![vec![1.0, 0.0]]);
        let dq = pairwise_distances(&d, Role::Chunk, &q, Role::Question).unwrap();
        assert_eq!(basic_coverage(&min_distances(&dq).unwrap()).unwrap(), 0.5);
    }

    #[test]
    fn weighted_arithmetic_example() {
        // sizes 3 and 1; clusterdists 0.2 and 0.6
        let e = mat(vec![vec![1.0, 0.0], vec![1.0, 0.1], vec![1.0, 0.2], vec![0.0, 1.0]]);
        let model = ClusterModel::from_assignments(&e, vec![0, 0, 0, 1], 0).unwrap();
        let (w, per) = weighted_coverage(&md(vec![0.1, 0.2, 0.3, 0.6]), &model).unwrap();
        assert!((w - 0.7).abs() < 1e-12);
        assert!((per[0].cluster_coverage - 0.8).abs() < 1e-12);
        assert!((per[1].cluster_coverage - 0.4).abs() < 1e-12);
        assert_eq!(per[0].share, 0.75);
    }

    #[test]
    fn table_style_contribution() {
        // 15 of 120 chunks at coverage 0.42 contribute 0.125 * 0.42
        let mut assignments = vec![0usize; 120];
        assignments[..15].iter_mut().for_each(|a| *a = 1);
        let rows: Vec<Vec<f64>> = (0..120).map(|i| vec![1.0, i as f64]).collect();
        let model = ClusterModel::from_assignments(&mat(rows), assignments, 0).unwrap();
        let mut values = vec![0.0; 120];
        values[..15].iter_mut().for_each(|v| *v = 0.58);
        let (w, per) = weighted_coverage(&md(values), &model).unwrap();
        assert_eq!(per[1].size, 15);
        assert!((per[1].share - 0.125).abs() < 1e-12);
        assert!((per[1].cluster_coverage - 0.42).abs() < 1e-12);
        assert!((w - (0.875 + 0.125 * 0.42)).abs() < 1e-12);
    }

    #[test]
    fn single_cluster_weighted_equals_basic() {
        let d = mat(vec![vec![1.0, 0.2], vec![0.1, 1.0], vec![0.5, 0.5]]);
        let q = mat(vec![vec![1.0, 0.0]]);
        let mind = min_distances(&pairwise_distances(&d, Role::Chunk, &q, Role::Question).unwrap()).unwrap();
        let model = ClusterModel::trivial(&d).unwrap();
        assert_eq!(weighted_coverage(&mind, &model).unwrap().0, basic_coverage(&mind).unwrap());
    }

    #[test]
    fn threshold_extremes() {
        let d = mat(vec![vec![1.0, 0.0], vec![0.9, 0.1], vec![0.0, 1.0], vec![0.1, 0.9]]);
        let q = mat(vec![vec![1.0, 0.05], vec![0.2, 1.0]]);
        let model = ClusterModel::from_assignments(&d, vec![0, 0, 1, 1], 0).unwrap();
        let all = compute_coverage(&q, &d, &model, &MultiCoverageConfig::threshold(2.0)).unwrap();
        assert!((all.multi_threshold - all.weighted).abs() < 1e-9);
        let none = compute_coverage(&q, &d, &model, &MultiCoverageConfig::threshold(0.0)).unwrap();
        assert_eq!(none.multi_threshold, 0.0);
        assert!(none.per_cluster.iter().all(|c| c.covering_question_count == 0));
    }

    #[test]
    fn two_cluster_threshold_instance() {
        // q0 sits near C0's centroid, q1 near C1's; threshold 0.4 keeps them apart.
        let d = mat(vec![vec![1.0, 0.0], vec![1.0, 0.2], vec![0.0, 1.0], vec![0.2, 1.0]]);
        let q = mat(vec![vec![1.0, 0.1], vec![0.1, 1.0]]);
        let model = ClusterModel::from_assignments(&d, vec![0, 0, 1, 1], 0).unwrap();
        let s = compute_coverage(&q, &d, &model, &MultiCoverageConfig::threshold(0.4)).unwrap();
        assert_eq!(s.per_cluster[0].covering_question_count, 1);
        assert_eq!(s.per_cluster[1].covering_question_count, 1);
        // each cluster's covering question is also its nearest, so multi == weighted
        assert!((s.multi_threshold - s.weighted).abs() < 1e-12);
    }

    #[test]
    fn n_closest_mode() {
        let d = mat(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let q = mat(vec![vec![1.0, 0.1]]);
        let model = ClusterModel::from_assignments(&d, vec![0, 1], 0).unwrap();
        let cfg = MultiCoverageConfig {
            mode: MultiCoverageMode::NClosest(1),
        };
        let s = compute_coverage(&q, &d, &model, &cfg).unwrap();
        assert_eq!(s.per_cluster[0].covering_question_count, 1);
        assert_eq!(s.per_cluster[1].covering_question_count, 0);
        assert!(MultiCoverageConfig { mode: MultiCoverageMode::NClosest(0) }.validate().is_err());
        assert!(MultiCoverageConfig::threshold(2.5).validate().is_err());
    }

    #[test]
    fn model_size_mismatch() {
        let d = mat(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let model = ClusterModel::trivial(&d).unwrap();
        assert_eq!(
            weighted_coverage(&md(vec![0.1]), &model),
            Err(CoverageError::Inconsistent { model: 2, data: 1 })
        );
    }
}
