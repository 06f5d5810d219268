//! The run report: one [`AnalysisReport`] rendered as JSON and Markdown.
//!
//! JSON layout (schema version 1), keys in this order:
//!
//! - `schema_version`: integer, currently 1.
//! - `run_metadata`: timestamp, tool version, effective config, provider and
//!   model, seed, document/chunk/question/inlier counts, K, and status.
//! - `coverage`: scores and per-cluster breakdown, or `null` when no
//!   question survived outlier filtering.
//! - `question_assessments`: one entry per question in input order.
//! - `outlier_questions`: index, text and reported score of each outlier.
//! - `gap_threshold`, `gaps`: ranked gap recommendations.
//! - `warnings`: every distinct warning raised during the run, in order.
//! - `artifact_paths`: where the plot, Markdown report and cache went.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::coverage::{CoverageScores, MultiCoverageMode};
use crate::gaps::GapRecommendation;
use crate::outliers::QuestionAssessment;

pub const SCHEMA_VERSION: u32 = 1;
pub const MASKED_TIMESTAMP: &str = "<masked>";

/// Ordered, duplicate-free warning list shared by every pipeline stage.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Warnings(Vec<String>);

impl Warnings {
    /// Adds `msg` unless an identical warning is already recorded.
    pub fn push(&mut self, msg: impl Into<String>) {
        let msg = msg.into();
        if !self.0.contains(&msg) {
            log::warn!("{msg}");
            self.0.push(msg);
        }
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[String] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<String> {
        self.0
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("cannot write report {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot serialize report: {0}")]
    Serialize(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Complete,
    /// Every question was filtered as an outlier; no coverage was computed.
    AllOutliers,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub timestamp: String,
    pub tool_version: String,
    pub config: RunConfig,
    pub embedding_provider: String,
    pub embedding_model: String,
    pub seed: u64,
    pub n_documents: usize,
    pub n_chunks: usize,
    pub n_questions: usize,
    pub n_inlier_questions: usize,
    pub k: usize,
    pub status: RunStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierQuestion {
    pub question_index: usize,
    pub text: String,
    pub reported_score: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ArtifactPaths {
    pub plot: Option<String>,
    pub markdown: Option<String>,
    pub cache_dir: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub schema_version: u32,
    pub run_metadata: RunMetadata,
    pub coverage: Option<CoverageScores>,
    pub question_assessments: Vec<QuestionAssessment>,
    pub outlier_questions: Vec<OutlierQuestion>,
    pub gap_threshold: f64,
    pub gaps: Vec<GapRecommendation>,
    pub warnings: Vec<String>,
    pub artifact_paths: ArtifactPaths,
}

pub fn now_timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

impl AnalysisReport {
    pub fn to_json(&self) -> Result<String, ReportError> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self, ReportError> {
        Ok(serde_json::from_str(text)?)
    }

    /// A copy with the timestamp replaced, for comparing runs.
    pub fn masked(&self) -> Self {
        let mut r = self.clone();
        r.run_metadata.timestamp = MASKED_TIMESTAMP.into();
        r
    }
}

/// Replaces `run_metadata.timestamp` in a serialized report.
pub fn mask_timestamp_json(text: &str) -> Result<String, ReportError> {
    let mut v: serde_json::Value = serde_json::from_str(text)?;
    if let Some(ts) = v.pointer_mut("/run_metadata/timestamp") {
        *ts = serde_json::Value::String(MASKED_TIMESTAMP.into());
    }
    Ok(serde_json::to_string_pretty(&v)?)
}

fn write_file(path: &Path, body: &str) -> Result<(), ReportError> {
    std::fs::write(path, body).map_err(|source| ReportError::Io { path: path.display().to_string(), source })
}

pub fn emit_json(report: &AnalysisReport, path: &Path) -> Result<(), ReportError> {
    write_file(path, &report.to_json()?)
}

pub fn emit_markdown(report: &AnalysisReport, path: &Path) -> Result<(), ReportError> {
    write_file(path, &render_markdown(report))
}

fn pct(v: f64) -> String {
    format!("{:.1}%", v * 100.0)
}

fn cell(s: &str) -> String {
    s.replace('|', "\\|").replace('\n', " ")
}

pub const CAVEAT: &str = "These scores are relative, not absolute: a perfect score would mean the questions \
merely restate the documents, so compare question sets against each other and interpret the numbers \
beyond the raw score.";

/// Summary table for one gap: six labelled rows.
pub fn gap_table(gap: &GapRecommendation) -> String {
    let mut s = String::new();
    s.push_str("| Field | Value |\n|---|---|\n");
    let _ = writeln!(s, "| Cluster ID | {} |", gap.cluster_id);
    let _ = writeln!(s, "| Coverage Score | {:.2} |", gap.coverage_score);
    let noun = if gap.cluster_size == 1 { "document" } else { "documents" };
    let _ = writeln!(s, "| Cluster Size | {} {noun} |", gap.cluster_size);
    let _ = writeln!(s, "| Corpus Share | {} |", pct(gap.corpus_share));
    let _ = writeln!(s, "| Extracted Themes | {} |", cell(&gap.themes.join(", ")));
    let _ = writeln!(s, "| Suggested Question | {} |", cell(&gap.suggested_questions.join(" / ")));
    s
}

pub fn render_markdown(report: &AnalysisReport) -> String {
    let meta = &report.run_metadata;
    let mut s = String::from("# Semantic Coverage Report\n\n");
    let _ = writeln!(
        s,
        "Generated {} with {} embeddings (`{}`), seed {}.\n",
        meta.timestamp, meta.embedding_provider, meta.embedding_model, meta.seed
    );
    let _ = writeln!(
        s,
        "{} documents, {} chunks in {} clusters, {} questions ({} inliers).\n",
        meta.n_documents, meta.n_chunks, meta.k, meta.n_questions, meta.n_inlier_questions
    );

    s.push_str("## Coverage summary\n\n");
    match &report.coverage {
        Some(c) => {
            let multi_label = match c.multi_mode {
                MultiCoverageMode::Threshold(t) => format!("Multi-cluster coverage (threshold {t})"),
                MultiCoverageMode::NClosest(n) => format!("Multi-cluster coverage ({n} closest centroids)"),
            };
            s.push_str("| Metric | Score |\n|---|---|\n");
            let _ = writeln!(s, "| Basic coverage | {} |", pct(c.basic));
            let _ = writeln!(s, "| Weighted coverage | {} |", pct(c.weighted));
            let _ = writeln!(s, "| {multi_label} | {} |\n", pct(c.multi_threshold));
            let _ = writeln!(s, "{CAVEAT}\n");

            s.push_str("## Per-cluster coverage\n\n");
            s.push_str("| Cluster | Size | Share | Coverage | Multi-cluster coverage | Covering questions |\n");
            s.push_str("|---|---|---|---|---|---|\n");
            for k in &c.per_cluster {
                let _ = writeln!(
                    s,
                    "| {} | {} | {} | {:.3} | {:.3} | {} |",
                    k.cluster_id,
                    k.size,
                    pct(k.share),
                    k.cluster_coverage,
                    k.multi_coverage,
                    k.covering_question_count
                );
            }
            s.push('\n');
        }
        None => {
            s.push_str(
                "Coverage was not computed: every test question was flagged as an outlier, \
                 so no question is close enough to the corpus to measure against it.\n\n",
            );
        }
    }

    s.push_str("## Outlier questions\n\n");
    if report.outlier_questions.is_empty() {
        s.push_str("No questions were flagged as outliers.\n\n");
    } else {
        for q in &report.outlier_questions {
            let _ = writeln!(s, "- Q{} (score {:.3}): {}", q.question_index, q.reported_score, cell(&q.text));
        }
        s.push('\n');
    }

    s.push_str("## Coverage gaps\n\n");
    if report.gaps.is_empty() {
        let _ = writeln!(s, "No coverage gaps at threshold {}.\n", report.gap_threshold);
    } else {
        for g in &report.gaps {
            let _ = writeln!(s, "### Gap {}: cluster {}\n", g.rank, g.cluster_id);
            s.push_str(&gap_table(g));
            s.push('\n');
        }
    }

    if !report.warnings.is_empty() {
        s.push_str("## Warnings\n\n");
        for w in &report.warnings {
            let _ = writeln!(s, "- {}", cell(w));
        }
        s.push('\n');
    }
    if let Some(p) = &report.artifact_paths.plot {
        let _ = writeln!(s, "Plot: `{p}`\n");
    }
    s
}
