//! Gap analysis: low-coverage clusters, their themes, suggested questions,
//! and a priority ranking.

mod llm;
mod tfidf;

use serde::{Deserialize, Serialize};

pub use llm::LlmBackend;
pub use tfidf::{is_stop_word, rank_terms, terms};

use crate::cluster::ClusterModel;
use crate::corpus::DocumentChunk;
use crate::coverage::ClusterCoverage;
use crate::embed::EmbeddingMatrix;
use crate::geometry::{pairwise_distances, Role};
use crate::report::Warnings;

pub const DEFAULT_GAP_THRESHOLD: f64 = 0.7;
pub const MAX_THEMES: usize = 5;
pub const MIN_THEMES: usize = 3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GapError {
    #[error("missing API key: environment variable {0} is not set")]
    MissingApiKey(String),
    #[error("concept backend failed: {0}")]
    Backend(String),
    #[error("gap threshold {0} outside [0, 1]")]
    BadThreshold(f64),
    #[error("cluster {0} has no chunks")]
    EmptyCluster(usize),
    #[error("no themes to build questions from")]
    NoThemes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConceptBackendKind {
    #[serde(alias = "remote-llm")]
    Llm,
    #[serde(alias = "offline-tfidf")]
    Offline,
}

impl std::str::FromStr for ConceptBackendKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "llm" | "remote-llm" => Ok(Self::Llm),
            "offline" | "offline-tfidf" => Ok(Self::Offline),
            other => Err(format!("unknown concept backend `{other}` (expected llm or offline)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptBackendConfig {
    pub backend: ConceptBackendKind,
    pub model_name: String,
    pub api_key_env: String,
    pub max_chunks_per_prompt: usize,
    pub base_url: Option<String>,
    pub timeout_secs: f64,
    pub max_retries: u32,
    pub retry_initial_delay_ms: u64,
}

impl Default for ConceptBackendConfig {
    fn default() -> Self {
        Self {
            backend: ConceptBackendKind::Offline,
            model_name: "gpt-4o-mini".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            max_chunks_per_prompt: 8,
            base_url: None,
            timeout_secs: 60.0,
            max_retries: 3,
            retry_initial_delay_ms: 500,
        }
    }
}

impl ConceptBackendConfig {
    pub fn check_credentials(&self) -> Result<(), GapError> {
        if self.backend == ConceptBackendKind::Llm
            && std::env::var(&self.api_key_env).map_or(true, |v| v.trim().is_empty())
        {
            return Err(GapError::MissingApiKey(self.api_key_env.clone()));
        }
        Ok(())
    }
}

pub trait ConceptBackend: Send + Sync {
    fn name(&self) -> &str;
    /// Up to five themes; `cluster_chunks` are ordered most representative first.
    fn extract_themes(&self, cluster_chunks: &[&DocumentChunk], corpus: &[DocumentChunk]) -> Result<Vec<String>, GapError>;
    fn suggest_questions(&self, themes: &[String], sample: &[&DocumentChunk]) -> Result<Vec<String>, GapError>;
}

/// TF-IDF themes and a template question.
#[derive(Debug, Clone, Copy, Default)]
pub struct OfflineBackend;

/// One question naming every theme, e.g. "What does the documentation say
/// about a, b and c?".
pub fn template_question(themes: &[String]) -> String {
    let list = match themes {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{} and {last}", init.join(", ")),
    };
    format!("What does the documentation say about {list}?")
}

impl ConceptBackend for OfflineBackend {
    fn name(&self) -> &str {
        "offline"
    }

    fn extract_themes(&self, cluster_chunks: &[&DocumentChunk], corpus: &[DocumentChunk]) -> Result<Vec<String>, GapError> {
        Ok(rank_terms(
            cluster_chunks.iter().map(|c| c.text.as_str()),
            corpus.iter().map(|c| c.text.as_str()),
        )
        .into_iter()
        .take(MAX_THEMES)
        .map(|(t, _)| t)
        .collect())
    }

    fn suggest_questions(&self, themes: &[String], _sample: &[&DocumentChunk]) -> Result<Vec<String>, GapError> {
        if themes.is_empty() {
            return Err(GapError::NoThemes);
        }
        Ok(vec![template_question(themes)])
    }
}

pub fn build_backend(cfg: &ConceptBackendConfig) -> Result<Box<dyn ConceptBackend>, GapError> {
    match cfg.backend {
        ConceptBackendKind::Offline => Ok(Box::new(OfflineBackend)),
        ConceptBackendKind::Llm => Ok(Box::new(LlmBackend::new(cfg)?)),
    }
}

/// Clusters with coverage strictly below `gap_threshold`, in input order.
pub fn find_gaps(per_cluster: &[ClusterCoverage], gap_threshold: f64) -> Result<Vec<usize>, GapError> {
    if !(0.0..=1.0).contains(&gap_threshold) {
        return Err(GapError::BadThreshold(gap_threshold));
    }
    Ok(per_cluster
        .iter()
        .filter(|c| c.cluster_coverage < gap_threshold)
        .map(|c| c.cluster_id)
        .collect())
}

/// Themes from `backend`, falling back to the offline extractor (with a
/// warning) when it fails or returns nothing.
pub fn extract_themes(
    backend: &dyn ConceptBackend,
    cluster_id: usize,
    cluster_chunks: &[&DocumentChunk],
    corpus: &[DocumentChunk],
    warnings: &mut Warnings,
) -> Result<Vec<String>, GapError> {
    if cluster_chunks.is_empty() {
        return Err(GapError::EmptyCluster(cluster_id));
    }
    let themes = match backend.extract_themes(cluster_chunks, corpus) {
        Ok(t) if !t.is_empty() => t,
        Ok(_) => {
            warnings.push(format!(
                "cluster {cluster_id}: {} backend returned no themes; used offline TF-IDF themes",
                backend.name()
            ));
            OfflineBackend.extract_themes(cluster_chunks, corpus)?
        }
        Err(e) => {
            warnings.push(format!("cluster {cluster_id}: theme extraction failed ({e}); used offline TF-IDF themes"));
            OfflineBackend.extract_themes(cluster_chunks, corpus)?
        }
    };
    if themes.len() < MIN_THEMES {
        warnings.push(format!(
            "cluster {cluster_id}: only {} theme(s) could be extracted",
            themes.len()
        ));
    }
    Ok(themes)
}

/// Suggested questions from `backend`, falling back to templates.
pub fn suggest_questions(
    backend: &dyn ConceptBackend,
    cluster_id: usize,
    themes: &[String],
    sample: &[&DocumentChunk],
    warnings: &mut Warnings,
) -> Result<Vec<String>, GapError> {
    if themes.is_empty() {
        return Err(GapError::NoThemes);
    }
    match backend.suggest_questions(themes, sample) {
        Ok(qs) if !qs.is_empty() => Ok(qs),
        Ok(_) => {
            warnings.push(format!(
                "cluster {cluster_id}: {} backend suggested no questions; used a template question",
                backend.name()
            ));
            OfflineBackend.suggest_questions(themes, sample)
        }
        Err(e) => {
            warnings.push(format!("cluster {cluster_id}: question suggestion failed ({e}); used a template question"));
            OfflineBackend.suggest_questions(themes, sample)
        }
    }
}

/// A gap before ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapCandidate {
    pub cluster_id: usize,
    pub coverage_score: f64,
    pub cluster_size: usize,
    pub corpus_share: f64,
    pub themes: Vec<String>,
    pub suggested_questions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRecommendation {
    pub cluster_id: usize,
    pub coverage_score: f64,
    pub cluster_size: usize,
    pub corpus_share: f64,
    pub themes: Vec<String>,
    pub suggested_questions: Vec<String>,
    pub rank: usize,
    /// `corpus_share * (gap_threshold - coverage_score)`.
    pub priority: f64,
}

pub fn priority(share: f64, coverage: f64, gap_threshold: f64) -> f64 {
    share * (gap_threshold - coverage)
}

/// Orders gaps by descending priority, then larger size, then lower id.
pub fn rank_gaps(candidates: Vec<GapCandidate>, gap_threshold: f64) -> Vec<GapRecommendation> {
    let mut with_priority: Vec<(f64, GapCandidate)> = candidates
        .into_iter()
        .map(|c| (priority(c.corpus_share, c.coverage_score, gap_threshold), c))
        .collect();
    with_priority.sort_by(|(pa, a), (pb, b)| {
        pb.total_cmp(pa)
            .then(b.cluster_size.cmp(&a.cluster_size))
            .then(a.cluster_id.cmp(&b.cluster_id))
    });
    with_priority
        .into_iter()
        .enumerate()
        .map(|(i, (priority, c))| GapRecommendation {
            cluster_id: c.cluster_id,
            coverage_score: c.coverage_score,
            cluster_size: c.cluster_size,
            corpus_share: c.corpus_share,
            themes: c.themes,
            suggested_questions: c.suggested_questions,
            rank: i + 1,
            priority,
        })
        .collect()
}

/// Member chunk indices of `cluster` ordered by distance to its centroid.
pub fn representative_members(e_d: &EmbeddingMatrix, model: &ClusterModel, cluster: usize) -> Vec<usize> {
    let members = &model.members[cluster];
    let Ok(sub) = e_d.select(members) else {
        return members.clone();
    };
    let Ok(centroid) = EmbeddingMatrix::from_rows(vec![model.centroids[cluster].clone()]) else {
        return members.clone();
    };
    let Ok(d) = pairwise_distances(&sub, Role::Chunk, &centroid, Role::Centroid) else {
        return members.clone();
    };
    let mut order: Vec<usize> = (0..members.len()).collect();
    order.sort_by(|&a, &b| d.get(a, 0).total_cmp(&d.get(b, 0)).then(a.cmp(&b)));
    order.into_iter().map(|i| members[i]).collect()
}

/// Full gap analysis for one run: find, characterise and rank.
#[allow(clippy::too_many_arguments)]
pub fn analyze_gaps(
    per_cluster: &[ClusterCoverage],
    chunks: &[DocumentChunk],
    e_d: &EmbeddingMatrix,
    model: &ClusterModel,
    backend: &dyn ConceptBackend,
    gap_threshold: f64,
    max_sample: usize,
    warnings: &mut Warnings,
) -> Result<Vec<GapRecommendation>, GapError> {
    let gap_ids = find_gaps(per_cluster, gap_threshold)?;
    let mut candidates = Vec::with_capacity(gap_ids.len());
    for id in gap_ids {
        let cc = &per_cluster[id];
        let ordered = representative_members(e_d, model, id);
        let cluster_chunks: Vec<&DocumentChunk> = ordered.iter().map(|&i| &chunks[i]).collect();
        let themes = extract_themes(backend, id, &cluster_chunks, chunks, warnings)?;
        let sample = &cluster_chunks[..cluster_chunks.len().min(max_sample.max(1))];
        let suggested_questions = suggest_questions(backend, id, &themes, sample, warnings)?;
        candidates.push(GapCandidate {
            cluster_id: id,
            coverage_score: cc.cluster_coverage,
            cluster_size: cc.size,
            corpus_share: cc.share,
            themes,
            suggested_questions,
        });
    }
    Ok(rank_gaps(candidates, gap_threshold))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cc(id: usize, coverage: f64) -> ClusterCoverage {
        ClusterCoverage {
            cluster_id: id,
            size: 10,
            share: 0.1,
            cluster_coverage: coverage,
            multi_coverage: 0.0,
            covering_question_count: 0,
        }
    }

    fn chunk(index: usize, text: &str) -> DocumentChunk {
        DocumentChunk {
            index,
            doc_id: "d".into(),
            text: text.into(),
            token_count: text.split_whitespace().count(),
            start: 0,
            end: text.len(),
        }
    }

    fn candidate(id: usize, share: f64, score: f64, size: usize) -> GapCandidate {
        GapCandidate {
            cluster_id: id,
            coverage_score: score,
            cluster_size: size,
            corpus_share: share,
            themes: vec![],
            suggested_questions: vec![],
        }
    }

    struct Failing;

    impl ConceptBackend for Failing {
        fn name(&self) -> &str {
            "failing"
        }
        fn extract_themes(&self, _: &[&DocumentChunk], _: &[DocumentChunk]) -> Result<Vec<String>, GapError> {
            Ok(vec![])
        }
        fn suggest_questions(&self, _: &[String], _: &[&DocumentChunk]) -> Result<Vec<String>, GapError> {
            Err(GapError::Backend("boom".into()))
        }
    }

    #[test]
    fn gap_detection() {
        let per = vec![cc(0, 0.86), cc(1, 0.87), cc(2, 0.43)];
        assert_eq!(find_gaps(&per, 0.7).unwrap(), vec![2]);
        let high = vec![cc(0, 0.9), cc(1, 0.7)];
        assert!(find_gaps(&high, 0.7).unwrap().is_empty());
        assert_eq!(find_gaps(&per, 1.0).unwrap(), vec![0, 1, 2]);
        assert!(find_gaps(&per, 1.5).is_err());
    }

    #[test]
    fn ranking_by_priority() {
        let ranked = rank_gaps(vec![candidate(7, 0.05, 0.30, 4), candidate(2, 0.125, 0.42, 15)], 0.7);
        assert_eq!(ranked[0].cluster_id, 2);
        assert!((ranked[0].priority - 0.035).abs() < 1e-12);
        assert!((ranked[1].priority - 0.020).abs() < 1e-12);
        assert_eq!(ranked.iter().map(|g| g.rank).collect::<Vec<_>>(), vec![1, 2]);

        let single = rank_gaps(vec![candidate(4, 0.1, 0.2, 3)], 0.7);
        assert_eq!(single[0].rank, 1);

        let tied = rank_gaps(vec![candidate(5, 0.1, 0.2, 3), candidate(1, 0.1, 0.2, 3)], 0.7);
        assert_eq!(tied[0].cluster_id, 1);
        let by_size = rank_gaps(vec![candidate(1, 0.1, 0.2, 3), candidate(5, 0.1, 0.2, 9)], 0.7);
        assert_eq!(by_size[0].cluster_id, 5);
    }

    #[test]
    fn offline_themes_and_templates() {
        let corpus = vec![chunk(0, "alpha alpha beta"), chunk(1, "gamma delta gamma"), chunk(2, "delta epsilon")];
        let cluster = vec![&corpus[0]];
        let mut w = Warnings::default();
        let themes = extract_themes(&OfflineBackend, 0, &cluster, &corpus, &mut w).unwrap();
        assert_eq!(themes, vec!["alpha", "beta"]);
        assert_eq!(w.len(), 1, "fewer than three themes is recorded");

        let qs = OfflineBackend.suggest_questions(&["Data Privacy".into()], &[]).unwrap();
        assert_eq!(qs, vec!["What does the documentation say about Data Privacy?"]);
        let three: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let qs = OfflineBackend.suggest_questions(&three, &[]).unwrap();
        assert_eq!(qs, vec!["What does the documentation say about a, b and c?"]);
    }

    #[test]
    fn failing_backend_falls_back_with_warnings() {
        let corpus = vec![chunk(0, "heron heron egret plumage"), chunk(1, "fund shares")];
        let cluster = vec![&corpus[0]];
        let mut w = Warnings::default();
        let themes = extract_themes(&Failing, 3, &cluster, &corpus, &mut w).unwrap();
        assert_eq!(themes[0], "heron");
        let qs = suggest_questions(&Failing, 3, &themes, &cluster, &mut w).unwrap();
        assert_eq!(qs.len(), 1);
        assert!(qs[0].contains("heron"));
        let all = w.as_slice().join("\n");
        assert!(all.contains("returned no themes"));
        assert!(all.contains("boom"));
    }
}
