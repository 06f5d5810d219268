//! Semantic coverage analysis for RAG test question sets.
//!
//! Documents are split into chunks, chunks and questions are embedded into
//! one vector space, off-topic questions are filtered with a local outlier
//! factor, and coverage is scored as one minus the distance from each chunk
//! to its nearest question: overall, per k-means cluster, and with questions
//! counted toward every nearby cluster. Clusters that score below a threshold
//! are reported as gaps with themes and suggested questions.
//!
//! ```
//! use ragcov::coverage::compute_coverage;
//! use ragcov::coverage::MultiCoverageConfig;
//! use ragcov::cluster::ClusterModel;
//! use ragcov::embed::EmbeddingMatrix;
//!
//! let e_d = EmbeddingMatrix::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
//! let e_q = EmbeddingMatrix::from_rows(vec![vec![1.0, 0.0]]).unwrap();
//! let model = ClusterModel::trivial(&e_d).unwrap();
//! let scores = compute_coverage(&e_q, &e_d, &model, &MultiCoverageConfig::default()).unwrap();
//! // one chunk is hit exactly, the other is orthogonal
//! assert!((scores.basic - 0.5).abs() < 1e-12);
//! ```

pub mod cli;
pub mod cluster;
pub mod config;
pub mod corpus;
pub mod coverage;
pub mod embed;
pub mod gaps;
pub mod geometry;
pub mod http;
pub mod outliers;
pub mod pipeline;
pub mod report;
pub mod synth;
pub mod viz;
