//! The end-to-end run: chunk, embed, cluster, filter outliers, score,
//! analyse gaps, plot, report.

use std::path::Path;

use crate::cluster::{choose_k, kmeans_with, ClusterError, ClusterModel};
use crate::config::{ConfigError, RunConfig};
use crate::corpus::{
    chunk_document_with, load_documents, load_questions, CorpusError, DocumentChunk, RawDocument, TestQuestion,
};
use crate::coverage::{compute_coverage, CoverageError, CoverageScores};
use crate::embed::{build_provider, embed_texts, EmbedError, EmbeddingCache, EmbeddingMatrix, EmbeddingProvider};
use crate::gaps::{analyze_gaps, build_backend, ConceptBackend, GapError, GapRecommendation};
use crate::outliers::{filter_inliers, lof_assess, LofError, QuestionAssessment};
use crate::report::{
    emit_json, emit_markdown, now_timestamp, AnalysisReport, ArtifactPaths, OutlierQuestion, ReportError, RunMetadata,
    RunStatus, Warnings, SCHEMA_VERSION,
};
use crate::viz::{project_2d, render_scatter, PointLabels, VizError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_PROVIDER: i32 = 3;
pub const EXIT_ALL_OUTLIERS: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Lof(#[from] LofError),
    #[error(transparent)]
    Coverage(#[from] CoverageError),
    #[error(transparent)]
    Gap(#[from] GapError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("embedding matrix: {0}")]
    Matrix(String),
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Corpus(_) => EXIT_CONFIG,
            Self::Embed(EmbedError::MissingApiKey(_) | EmbedError::Config(_)) => EXIT_CONFIG,
            Self::Embed(_) => EXIT_PROVIDER,
            Self::Cluster(ClusterError::TooSmall(_) | ClusterError::TooManyClusters { .. } | ClusterError::ZeroClusters) => {
                EXIT_CONFIG
            }
            Self::Lof(LofError::TooFewReferences { .. } | LofError::ZeroNeighbors | LofError::BadThreshold) => EXIT_CONFIG,
            Self::Gap(GapError::MissingApiKey(_) | GapError::BadThreshold(_)) => EXIT_CONFIG,
            _ => EXIT_OTHER,
        }
    }
}

/// Everything computed for one corpus and question set.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub chunks: Vec<DocumentChunk>,
    pub e_d: EmbeddingMatrix,
    pub e_q: EmbeddingMatrix,
    pub model: ClusterModel,
    pub assessments: Vec<QuestionAssessment>,
    pub inlier_indices: Vec<usize>,
    /// `None` when every question is an outlier.
    pub coverage: Option<CoverageScores>,
    pub gaps: Vec<GapRecommendation>,
    pub embedding_model: String,
}

/// Chunks every document, dropping chunks without a single word (a run of
/// punctuation, say) since they have no meaningful embedding.
pub fn chunk_documents(
    documents: &[RawDocument],
    cfg: &RunConfig,
    warnings: &mut Warnings,
) -> Result<Vec<DocumentChunk>, PipelineError> {
    let chunking = cfg.chunking_config()?;
    let tokenizer = cfg.tokenizer.tokenizer();
    let mut chunks = Vec::new();
    for doc in documents {
        chunks.extend(chunk_document_with(doc, &chunking, tokenizer, chunks.len())?);
    }
    let before = chunks.len();
    chunks.retain(|c| c.text.chars().any(char::is_alphanumeric));
    if chunks.len() < before {
        warnings.push(format!("dropped {} chunk(s) containing no words", before - chunks.len()));
        for (i, c) in chunks.iter_mut().enumerate() {
            c.index = i;
        }
    }
    if chunks.is_empty() {
        return Err(CorpusError::NoDocuments.into());
    }
    Ok(chunks)
}

/// Runs the metric pipeline in memory with caller-supplied collaborators.
pub fn analyze(
    documents: &[RawDocument],
    questions: &[TestQuestion],
    cfg: &RunConfig,
    provider: &dyn EmbeddingProvider,
    cache: Option<&EmbeddingCache>,
    backend: &dyn ConceptBackend,
    warnings: &mut Warnings,
) -> Result<Analysis, PipelineError> {
    if questions.is_empty() {
        return Err(CorpusError::NoQuestions.into());
    }
    let chunks = chunk_documents(documents, cfg, warnings)?;
    let pcfg = cfg.provider_config();
    let chunk_texts: Vec<String> = chunks.iter().map(|c| c.text.clone()).collect();
    let question_texts: Vec<String> = questions.iter().map(|q| q.text.clone()).collect();
    let e_d = embed_texts(&chunk_texts, provider, &pcfg, cache)?;
    let e_q = embed_texts(&question_texts, provider, &pcfg, cache)?;

    let n = chunks.len();
    if let Some(k) = cfg.clusters.requested() {
        if k > n {
            return Err(ClusterError::TooManyClusters { k, n }.into());
        }
    }
    let k = choose_k(n, cfg.clusters.requested())?;
    let model = if k == 1 { ClusterModel::trivial(&e_d)? } else { kmeans_with(&e_d, k, cfg.seed, &cfg.kmeans_config())? };

    let assessments = lof_assess(&e_q, &e_d, &cfg.lof_config())?;
    let partition = filter_inliers(&assessments, questions);
    let inlier_indices = partition.inlier_indices();
    for q in &partition.outliers {
        warnings.push(format!("question {} was filtered as an outlier: {}", q.index, q.text));
    }

    let (coverage, gaps) = if inlier_indices.is_empty() {
        warnings.push("every test question was filtered as an outlier; coverage was not computed");
        (None, Vec::new())
    } else {
        let e_q_in = e_q.select(&inlier_indices).map_err(|e| PipelineError::Matrix(e.to_string()))?;
        let scores = compute_coverage(&e_q_in, &e_d, &model, &cfg.multi_config())?;
        let gaps = analyze_gaps(
            &scores.per_cluster,
            &chunks,
            &e_d,
            &model,
            backend,
            cfg.gap_threshold,
            cfg.max_sample,
            warnings,
        )?;
        (Some(scores), gaps)
    };

    Ok(Analysis {
        chunks,
        e_d,
        e_q,
        model,
        assessments,
        inlier_indices,
        coverage,
        gaps,
        embedding_model: provider.model_id(),
    })
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: AnalysisReport,
    pub exit_code: i32,
}

fn display(p: &Path) -> String {
    p.display().to_string()
}

fn render_plot(analysis: &Analysis, scores: &CoverageScores, cfg: &RunConfig, out: &Path) -> Result<(), VizError> {
    let e_all = analysis
        .e_d
        .vstack(&analysis.e_q)
        .map_err(|e| VizError::Inconsistent(e.to_string()))?;
    let labels = PointLabels::new(&analysis.model, &analysis.assessments);
    let proj = project_2d(&e_all, labels, cfg.plot_method, cfg.seed, cfg.perplexity)?;
    render_scatter(&proj, scores, out)
}

/// Full `analyze` command: validates `cfg`, runs the pipeline, writes the
/// report(s) and plot. The JSON report is also written for the all-outlier
/// case, which returns exit code 4.
pub fn run_analysis(cfg: &RunConfig) -> Result<Outcome, PipelineError> {
    let mut warnings = Warnings::default();
    for w in cfg.validate()? {
        warnings.push(w);
    }
    let docs_path = cfg.docs.clone().expect("validated");
    let questions_path = cfg.questions.clone().expect("validated");

    let loaded = load_documents(&[docs_path])?;
    for f in &loaded.failures {
        warnings.push(format!("skipped document: {f}"));
    }
    let questions = load_questions(&questions_path)?;

    let pcfg = cfg.provider_config();
    let provider = build_provider(&pcfg)?;
    let cache = match &cfg.cache_dir {
        Some(dir) => Some(EmbeddingCache::open(dir).map_err(EmbedError::from)?),
        None => None,
    };
    let backend = build_backend(&cfg.concept_config())?;

    let analysis = analyze(
        &loaded.documents,
        &questions,
        cfg,
        provider.as_ref(),
        cache.as_ref(),
        backend.as_ref(),
        &mut warnings,
    )?;

    let mut artifacts = ArtifactPaths {
        plot: None,
        markdown: cfg.markdown_out.as_deref().map(display),
        cache_dir: cfg.cache_dir.as_deref().map(display),
    };
    if let Some(plot) = &cfg.plot {
        match &analysis.coverage {
            Some(scores) => match render_plot(&analysis, scores, cfg, plot) {
                Ok(()) => artifacts.plot = Some(display(plot)),
                Err(e) => warnings.push(format!("plot not written: {e}")),
            },
            None => warnings.push("plot not written: no coverage scores to annotate"),
        }
    }

    let status = if analysis.coverage.is_some() { RunStatus::Complete } else { RunStatus::AllOutliers };
    let outlier_questions = analysis
        .assessments
        .iter()
        .filter(|a| a.is_outlier)
        .map(|a| OutlierQuestion {
            question_index: a.question_index,
            text: questions[a.question_index].text.clone(),
            reported_score: a.reported_score,
        })
        .collect();
    let report = AnalysisReport {
        schema_version: SCHEMA_VERSION,
        run_metadata: RunMetadata {
            timestamp: now_timestamp(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config: cfg.clone(),
            embedding_provider: provider.name().to_string(),
            embedding_model: analysis.embedding_model.clone(),
            seed: cfg.seed,
            n_documents: loaded.documents.len(),
            n_chunks: analysis.chunks.len(),
            n_questions: questions.len(),
            n_inlier_questions: analysis.inlier_indices.len(),
            k: analysis.model.k,
            status,
        },
        coverage: analysis.coverage.clone(),
        question_assessments: analysis.assessments.clone(),
        outlier_questions,
        gap_threshold: cfg.gap_threshold,
        gaps: analysis.gaps.clone(),
        warnings: warnings.into_vec(),
        artifact_paths: artifacts,
    };
    emit_json(&report, &cfg.out)?;
    if let Some(md) = &cfg.markdown_out {
        emit_markdown(&report, md)?;
    }
    let exit_code = match status {
        RunStatus::Complete => EXIT_OK,
        RunStatus::AllOutliers => EXIT_ALL_OUTLIERS,
    };
    Ok(Outcome { report, exit_code })
}
