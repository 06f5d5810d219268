//! The guide in `book/src`, compiled so its listings run as doc-tests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/chunking.md")]
pub mod chunking {}
#[doc = include_str!("../../../book/src/embeddings.md")]
pub mod embeddings {}
#[doc = include_str!("../../../book/src/distance.md")]
pub mod distance {}
#[doc = include_str!("../../../book/src/clustering.md")]
pub mod clustering {}
#[doc = include_str!("../../../book/src/outliers.md")]
pub mod outliers {}
#[doc = include_str!("../../../book/src/coverage.md")]
pub mod coverage {}
#[doc = include_str!("../../../book/src/gaps.md")]
pub mod gaps {}
#[doc = include_str!("../../../book/src/visualization.md")]
pub mod visualization {}
#[doc = include_str!("../../../book/src/reports.md")]
pub mod reports {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
