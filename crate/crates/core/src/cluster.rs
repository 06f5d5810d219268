//! K-means over L2-normalized chunk embeddings.
//!
//! Normalizing first makes squared Euclidean distance equal to twice the
//! cosine distance, so the clusters live in the same geometry as the
//! coverage metrics. Centroids are plain means of the normalized members and
//! are not re-projected onto the sphere.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embed::EmbeddingMatrix;
use crate::geometry::{normalized_rows, Role};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ClusterError {
    #[error("corpus too small to cluster: {0} chunk(s), need at least 2")]
    TooSmall(usize),
    #[error("cannot form {k} clusters from {n} chunks")]
    TooManyClusters { k: usize, n: usize },
    #[error("k must be at least 1")]
    ZeroClusters,
    #[error("non-finite or zero-norm embedding in row {0}")]
    InvalidInput(usize),
}

pub const DEFAULT_MAX_ITER: usize = 300;
pub const DEFAULT_RESTARTS: usize = 10;

/// Number of clusters: the request clamped to `[1, n]`, or
/// `round(sqrt(n / 2))` clamped to `[2, 25]`.
pub fn choose_k(n: usize, requested: Option<usize>) -> Result<usize, ClusterError> {
    if n < 2 {
        return Err(ClusterError::TooSmall(n));
    }
    Ok(match requested {
        Some(k) => k.clamp(1, n),
        None => ((n as f64 / 2.0).sqrt().round() as usize).clamp(2, 25).min(n),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub max_iter: usize,
    /// Independent k-means++ restarts; the lowest final objective wins.
    pub restarts: usize,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            max_iter: DEFAULT_MAX_ITER,
            restarts: DEFAULT_RESTARTS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k: usize,
    pub assignments: Vec<usize>,
    /// Row-major `k x dim`.
    pub centroids: Vec<Vec<f64>>,
    pub members: Vec<Vec<usize>>,
    pub seed: u64,
    /// Within-cluster sum of squared distances after each assignment step.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
}

impl ClusterModel {
    pub fn n(&self) -> usize {
        self.assignments.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.members.iter().map(Vec::len).collect()
    }

    pub fn share(&self, cluster: usize) -> f64 {
        self.members[cluster].len() as f64 / self.n() as f64
    }

    /// Single cluster holding every chunk.
    pub fn trivial(e_d: &EmbeddingMatrix) -> Result<Self, ClusterError> {
        kmeans(e_d, 1, 0, 1)
    }

    pub fn centroid_matrix(&self) -> EmbeddingMatrix {
        EmbeddingMatrix::from_rows(self.centroids.clone()).expect("centroids are finite and non-empty")
    }

    /// Builds a model from explicit assignments; centroids are the means of
    /// the normalized member rows.
    pub fn from_assignments(e_d: &EmbeddingMatrix, assignments: Vec<usize>, seed: u64) -> Result<Self, ClusterError> {
        let rows = unit_rows(e_d)?;
        let k = assignments.iter().copied().max().map_or(0, |m| m + 1);
        if k == 0 {
            return Err(ClusterError::ZeroClusters);
        }
        let centroids = means(&rows, &assignments, k);
        let members = member_sets(&assignments, k);
        if members.iter().any(Vec::is_empty) {
            return Err(ClusterError::TooManyClusters { k, n: rows.len() });
        }
        let objective = sse(&rows, &assignments, &centroids);
        Ok(Self {
            k,
            assignments,
            centroids,
            members,
            seed,
            objective_trace: vec![objective],
            iterations: 0,
        })
    }
}

fn unit_rows(e_d: &EmbeddingMatrix) -> Result<Vec<Vec<f64>>, ClusterError> {
    normalized_rows(e_d, Role::Chunk).map_err(|e| match e {
        crate::geometry::GeometryError::DegenerateEmbedding { row, .. } => ClusterError::InvalidInput(row),
        _ => ClusterError::InvalidInput(0),
    })
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(row: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(row, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn means(rows: &[Vec<f64>], assignments: &[usize], k: usize) -> Vec<Vec<f64>> {
    let dim = rows[0].len();
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (row, &a) in rows.iter().zip(assignments) {
        counts[a] += 1;
        for (s, x) in sums[a].iter_mut().zip(row) {
            *s += x;
        }
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        if c > 0 {
            s.iter_mut().for_each(|x| *x /= c as f64);
        }
    }
    sums
}

fn member_sets(assignments: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut members = vec![Vec::new(); k];
    for (i, &a) in assignments.iter().enumerate() {
        members[a].push(i);
    }
    members
}

fn sse(rows: &[Vec<f64>], assignments: &[usize], centroids: &[Vec<f64>]) -> f64 {
    rows.iter()
        .zip(assignments)
        .map(|(r, &a)| sq_dist(r, &centroids[a]))
        .sum()
}

/// k-means++ seeding: first centre uniform, the rest sampled with
/// probability proportional to squared distance from the nearest centre.
fn plus_plus(rows: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = rows.len();
    let mut centroids = vec![rows[rng.gen_range(0..n)].clone()];
    let mut d2: Vec<f64> = rows.iter().map(|r| sq_dist(r, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.gen_range(0..n)
        };
        let c = rows[pick].clone();
        for (d, r) in d2.iter_mut().zip(rows) {
            *d = d.min(sq_dist(r, &c));
        }
        centroids.push(c);
    }
    centroids
}

struct Run {
    assignments: Vec<usize>,
    centroids: Vec<Vec<f64>>,
    trace: Vec<f64>,
    iterations: usize,
}

fn lloyd(rows: &[Vec<f64>], k: usize, max_iter: usize, rng: &mut ChaCha8Rng) -> Run {
    let mut centroids = plus_plus(rows, k, rng);
    let mut assignments = vec![usize::MAX; rows.len()];
    let mut trace = Vec::new();
    let mut iterations = 0;
    for _ in 0..max_iter.max(1) {
        iterations += 1;
        let mut changed = false;
        for (a, r) in assignments.iter_mut().zip(rows) {
            let (c, _) = nearest(r, &centroids);
            if *a != c {
                *a = c;
                changed = true;
            }
        }
        changed |= repair_empty(rows, &mut assignments, &mut centroids, k);
        trace.push(sse(rows, &assignments, &centroids));
        centroids = means(rows, &assignments, k);
        if !changed {
            break;
        }
    }
    Run {
        assignments,
        centroids,
        trace,
        iterations,
    }
}

/// Reseeds each empty cluster with the point farthest from its centroid.
fn repair_empty(rows: &[Vec<f64>], assignments: &mut [usize], centroids: &mut [Vec<f64>], k: usize) -> bool {
    let mut repaired = false;
    loop {
        let mut counts = vec![0usize; k];
        assignments.iter().for_each(|&a| counts[a] += 1);
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return repaired;
        };
        let far = rows
            .iter()
            .enumerate()
            .filter(|(i, _)| counts[assignments[*i]] > 1)
            .map(|(i, r)| (i, sq_dist(r, &centroids[assignments[i]])))
            .fold((usize::MAX, -1.0), |best, (i, d)| if d > best.1 { (i, d) } else { best });
        if far.0 == usize::MAX {
            return repaired;
        }
        assignments[far.0] = empty;
        repaired = true;
        centroids[empty] = rows[far.0].clone();
    }
}

/// Clusters the rows of `e_d` into `k` groups, deterministic in `seed`.
pub fn kmeans(e_d: &EmbeddingMatrix, k: usize, seed: u64, max_iter: usize) -> Result<ClusterModel, ClusterError> {
    kmeans_with(
        e_d,
        k,
        seed,
        &KMeansConfig {
            max_iter,
            ..KMeansConfig::default()
        },
    )
}

pub fn kmeans_with(e_d: &EmbeddingMatrix, k: usize, seed: u64, cfg: &KMeansConfig) -> Result<ClusterModel, ClusterError> {
    let n = e_d.n_rows();
    if k == 0 {
        return Err(ClusterError::ZeroClusters);
    }
    if k > n {
        return Err(ClusterError::TooManyClusters { k, n });
    }
    let rows = unit_rows(e_d)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<Run> = None;
    for _ in 0..cfg.restarts.max(1) {
        let run = lloyd(&rows, k, cfg.max_iter, &mut rng);
        let obj = sse(&rows, &run.assignments, &run.centroids);
        let better = best
            .as_ref()
            .is_none_or(|b| obj < sse(&rows, &b.assignments, &b.centroids));
        if better {
            best = Some(run);
        }
    }
    let run = best.expect("at least one restart");
    let members = member_sets(&run.assignments, k);
    debug_assert!(members.iter().all(|m| !m.is_empty()));
    Ok(ClusterModel {
        k,
        members,
        assignments: run.assignments,
        centroids: run.centroids,
        seed,
        objective_trace: run.trace,
        iterations: run.iterations,
    })
}
