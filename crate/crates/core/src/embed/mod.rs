//! Embedding providers, the on-disk cache, and [`embed_texts`].

mod cache;
mod matrix;
mod offline;
mod remote;

use std::collections::HashMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use cache::{cache_key, CacheError, EmbeddingCache};
pub use matrix::{EmbeddingMatrix, MatrixError};
pub use offline::{offline_embed, word_set, word_vector, OfflineProvider, MIN_DIMENSION};
pub use remote::{RemoteProvider, OPENAI_BASE_URL, VOYAGE_BASE_URL};

#[derive(Debug, thiserror::Error)]
pub enum EmbedError {
    #[error("missing API key: environment variable {0} is not set")]
    MissingApiKey(String),
    #[error("invalid embedding config: {0}")]
    Config(String),
    #[error("no texts to embed")]
    EmptyInput,
    #[error("text {index} is blank")]
    BlankText { index: usize },
    #[error("{provider} ({model}) failed while {context}: {message}")]
    Provider {
        provider: String,
        model: String,
        context: String,
        message: String,
    },
    #[error("embedding integrity error: {0}")]
    Integrity(String),
    #[error(transparent)]
    Cache(#[from] CacheError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    #[serde(alias = "remote-a")]
    OpenAi,
    #[serde(alias = "remote-b")]
    Voyage,
    #[serde(alias = "offline-deterministic")]
    Offline,
}

impl ProviderKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProviderKind::OpenAi => "openai",
            ProviderKind::Voyage => "voyage",
            ProviderKind::Offline => "offline",
        }
    }

    pub fn is_remote(self) -> bool {
        !matches!(self, ProviderKind::Offline)
    }

    pub fn default_model(self) -> &'static str {
        match self {
            ProviderKind::OpenAi => "text-embedding-3-small",
            ProviderKind::Voyage => "voyage-3",
            ProviderKind::Offline => "bow-hash",
        }
    }

    pub fn default_api_key_env(self) -> &'static str {
        match self {
            ProviderKind::OpenAi => "OPENAI_API_KEY",
            ProviderKind::Voyage => "VOYAGE_API_KEY",
            ProviderKind::Offline => "",
        }
    }
}

impl std::str::FromStr for ProviderKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "openai" | "remote-a" => Ok(ProviderKind::OpenAi),
            "voyage" | "remote-b" => Ok(ProviderKind::Voyage),
            "offline" | "offline-deterministic" => Ok(ProviderKind::Offline),
            other => Err(format!("unknown provider `{other}` (expected openai, voyage or offline)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub provider: ProviderKind,
    pub model_name: String,
    pub api_key_env: String,
    pub batch_size: usize,
    pub max_retries: u32,
    pub timeout_secs: f64,
    /// Overrides the provider's public endpoint (proxies, tests).
    pub base_url: Option<String>,
    /// Vector length for the offline provider; ignored by remote ones.
    pub dimension: usize,
    pub max_in_flight: usize,
    pub retry_initial_delay_ms: u64,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self::for_kind(ProviderKind::Offline)
    }
}

impl ProviderConfig {
    pub fn for_kind(provider: ProviderKind) -> Self {
        Self {
            provider,
            model_name: provider.default_model().to_string(),
            api_key_env: provider.default_api_key_env().to_string(),
            batch_size: 64,
            max_retries: 3,
            timeout_secs: 60.0,
            base_url: None,
            dimension: 384,
            max_in_flight: 4,
            retry_initial_delay_ms: 500,
        }
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_secs)
    }

    pub fn retry_initial_delay(&self) -> Duration {
        Duration::from_millis(self.retry_initial_delay_ms)
    }

    pub fn validate(&self) -> Result<(), EmbedError> {
        if self.batch_size == 0 {
            return Err(EmbedError::Config("batch_size must be at least 1".into()));
        }
        if self.max_in_flight == 0 {
            return Err(EmbedError::Config("max_in_flight must be at least 1".into()));
        }
        if !(self.timeout_secs.is_finite() && self.timeout_secs > 0.0) {
            return Err(EmbedError::Config("timeout must be positive".into()));
        }
        if self.model_name.trim().is_empty() {
            return Err(EmbedError::Config("model name is empty".into()));
        }
        Ok(())
    }

    /// Checks that the credential variable is present for remote providers.
    pub fn check_credentials(&self) -> Result<(), EmbedError> {
        if self.provider.is_remote()
            && std::env::var(&self.api_key_env).map_or(true, |v| v.trim().is_empty())
        {
            return Err(EmbedError::MissingApiKey(self.api_key_env.clone()));
        }
        Ok(())
    }
}

pub trait EmbeddingProvider: Send + Sync {
    fn name(&self) -> &str;
    /// Model identity used in cache keys.
    fn model_id(&self) -> String;
    /// One vector per input text, in input order.
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, EmbedError>;
}

pub fn build_provider(cfg: &ProviderConfig) -> Result<Box<dyn EmbeddingProvider>, EmbedError> {
    cfg.validate()?;
    match cfg.provider {
        ProviderKind::Offline => Ok(Box::new(OfflineProvider::new(&cfg.model_name, cfg.dimension)?)),
        ProviderKind::OpenAi | ProviderKind::Voyage => Ok(Box::new(RemoteProvider::new(cfg)?)),
    }
}

/// Embeds `texts` in order, serving repeats from `cache` and fetching misses
/// in batches of `batch_size`, at most `max_in_flight` batches at a time.
pub fn embed_texts(
    texts: &[String],
    provider: &dyn EmbeddingProvider,
    cfg: &ProviderConfig,
    cache: Option<&EmbeddingCache>,
) -> Result<EmbeddingMatrix, EmbedError> {
    cfg.validate()?;
    if texts.is_empty() {
        return Err(EmbedError::EmptyInput);
    }
    if let Some(index) = texts.iter().position(|t| t.trim().is_empty()) {
        return Err(EmbedError::BlankText { index });
    }
    let model = provider.model_id();
    let keys: Vec<String> = texts.iter().map(|t| cache_key(provider.name(), &model, t)).collect();

    let mut rows: Vec<Option<Vec<f64>>> = vec![None; texts.len()];
    if let Some(cache) = cache {
        for (slot, key) in rows.iter_mut().zip(&keys) {
            *slot = cache.get(key)?;
        }
    }

    // Duplicate texts are fetched once.
    let mut pending: Vec<usize> = Vec::new();
    let mut first_of: HashMap<&str, usize> = HashMap::new();
    for (i, row) in rows.iter().enumerate() {
        if row.is_none() && !first_of.contains_key(texts[i].as_str()) {
            first_of.insert(texts[i].as_str(), i);
            pending.push(i);
        }
    }

    let batches: Vec<&[usize]> = pending.chunks(cfg.batch_size).collect();
    for wave in batches.chunks(cfg.max_in_flight) {
        let results: Vec<Result<Vec<Vec<f64>>, EmbedError>> = std::thread::scope(|s| {
            let handles: Vec<_> = wave
                .iter()
                .map(|batch| {
                    let batch_texts: Vec<String> = batch.iter().map(|&i| texts[i].clone()).collect();
                    s.spawn(move || provider.embed_batch(&batch_texts))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("embedding worker panicked"))
                .collect()
        });
        for (batch, result) in wave.iter().zip(results) {
            let vectors = result?;
            if vectors.len() != batch.len() {
                return Err(EmbedError::Integrity(format!(
                    "provider returned {} vectors for {} texts",
                    vectors.len(),
                    batch.len()
                )));
            }
            for (&i, v) in batch.iter().zip(vectors) {
                if let Some(cache) = cache {
                    cache.put(&keys[i], &v)?;
                }
                rows[i] = Some(v);
            }
        }
    }

    let mut out: Vec<Vec<f64>> = Vec::with_capacity(texts.len());
    for (i, row) in rows.into_iter().enumerate() {
        let v = match row {
            Some(v) => v,
            None => {
                let j = first_of[texts[i].as_str()];
                out[j].clone()
            }
        };
        out.push(v);
    }
    let dim = out[0].len();
    if let Some((i, v)) = out.iter().enumerate().find(|(_, v)| v.len() != dim) {
        return Err(EmbedError::Integrity(format!(
            "dimension mismatch: text {i} has dimension {}, expected {dim}",
            v.len()
        )));
    }
    EmbeddingMatrix::from_rows(out).map_err(|e| EmbedError::Integrity(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    struct Counting {
        inner: OfflineProvider,
        calls: AtomicUsize,
        texts: AtomicUsize,
    }

    impl Counting {
        fn new() -> Self {
            Self {
                inner: OfflineProvider::new("bow-hash", 16).unwrap(),
                calls: AtomicUsize::new(0),
                texts: AtomicUsize::new(0),
            }
        }
    }

    impl EmbeddingProvider for Counting {
        fn name(&self) -> &str {
            "counting"
        }
        fn model_id(&self) -> String {
            "m".into()
        }
        fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, EmbedError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            self.texts.fetch_add(texts.len(), Ordering::SeqCst);
            self.inner.embed_batch(texts)
        }
    }

    struct Ragged;

    impl EmbeddingProvider for Ragged {
        fn name(&self) -> &str {
            "ragged"
        }
        fn model_id(&self) -> String {
            "r".into()
        }
        fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, EmbedError> {
            Ok(texts.iter().map(|t| vec![1.0; t.len()]).collect())
        }
    }

    fn cfg(batch: usize) -> ProviderConfig {
        ProviderConfig {
            batch_size: batch,
            dimension: 16,
            ..ProviderConfig::default()
        }
    }

    fn texts(words: &[&str]) -> Vec<String> {
        words.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn cache_hits_skip_provider() {
        let dir = tempfile::tempdir().unwrap();
        let cache = EmbeddingCache::open(dir.path()).unwrap();
        let p = Counting::new();
        let t = texts(&["one fish", "two fish", "red fish"]);
        let first = embed_texts(&t, &p, &cfg(2), Some(&cache)).unwrap();
        assert_eq!(p.calls.load(Ordering::SeqCst), 2);
        let second = embed_texts(&t, &p, &cfg(2), Some(&cache)).unwrap();
        assert_eq!(p.calls.load(Ordering::SeqCst), 2, "second run must be served from cache");
        assert_eq!(first, second);
    }

    #[test]
    fn order_preserved_and_duplicates_fetched_once() {
        let p = Counting::new();
        let t = texts(&["b a", "c", "b a", "d e f"]);
        let m = embed_texts(&t, &p, &cfg(1), None).unwrap();
        assert_eq!(p.texts.load(Ordering::SeqCst), 3);
        for (i, text) in t.iter().enumerate() {
            assert_eq!(m.row(i), offline_embed(text, 16).unwrap().as_slice());
        }
    }

    #[test]
    fn dimension_mismatch_is_fatal() {
        let t = texts(&["ab", "abc"]);
        let err = embed_texts(&t, &Ragged, &cfg(1), None).unwrap_err();
        assert!(matches!(err, EmbedError::Integrity(_)), "{err}");
    }

    #[test]
    fn blank_and_empty_inputs_rejected() {
        let p = Counting::new();
        assert!(matches!(embed_texts(&[], &p, &cfg(1), None), Err(EmbedError::EmptyInput)));
        let t = texts(&["ok", " "]);
        assert!(matches!(
            embed_texts(&t, &p, &cfg(1), None),
            Err(EmbedError::BlankText { index: 1 })
        ));
    }

    #[test]
    fn remote_without_key_fails_before_network() {
        let cfg = ProviderConfig {
            api_key_env: "RAGCOV_TEST_SURELY_UNSET_KEY".into(),
            ..ProviderConfig::for_kind(ProviderKind::OpenAi)
        };
        assert!(matches!(cfg.check_credentials(), Err(EmbedError::MissingApiKey(_))));
        assert!(matches!(build_provider(&cfg), Err(EmbedError::MissingApiKey(_))));
    }

    #[test]
    fn provider_names_parse() {
        assert_eq!("remote-b".parse::<ProviderKind>().unwrap(), ProviderKind::Voyage);
        assert_eq!("Offline".parse::<ProviderKind>().unwrap(), ProviderKind::Offline);
        assert!("bogus".parse::<ProviderKind>().is_err());
    }
}
