//! Run configuration: defaults, an optional TOML file, and command-line
//! flags, layered in that order (later wins).
//!
//! File keys are the long flag names without the leading dashes, e.g.
//!
//! ```toml
//! docs = "corpus/"
//! questions = "questions.txt"
//! chunk-size = 200
//! clusters = "auto"
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{Map, Value};

use crate::cluster::KMeansConfig;
use crate::corpus::{collect_document_paths, ChunkingConfig, CharTokenizer, Tokenizer, WhitespaceTokenizer};
use crate::coverage::{MultiCoverageConfig, MultiCoverageMode, DEFAULT_MULTI_THRESHOLD};
use crate::embed::{ProviderConfig, ProviderKind};
use crate::gaps::{ConceptBackendConfig, ConceptBackendKind, DEFAULT_GAP_THRESHOLD};
use crate::outliers::{LofConfig, LofMode, DEFAULT_THRESHOLD};
use crate::viz::ProjectionMethod;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {message}")]
    File { path: PathBuf, message: String },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("missing credentials: environment variable {0} is not set")]
    MissingCredentials(String),
}

/// `--clusters`: a fixed K or `auto`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClusterSetting {
    #[default]
    Auto,
    Fixed(usize),
}

impl ClusterSetting {
    pub fn requested(self) -> Option<usize> {
        match self {
            Self::Auto => None,
            Self::Fixed(k) => Some(k),
        }
    }
}

impl fmt::Display for ClusterSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Auto => f.write_str("auto"),
            Self::Fixed(k) => write!(f, "{k}"),
        }
    }
}

impl std::str::FromStr for ClusterSetting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Self::Auto);
        }
        s.parse::<usize>()
            .map(Self::Fixed)
            .map_err(|_| format!("expected a cluster count or `auto`, got `{s}`"))
    }
}

impl Serialize for ClusterSetting {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Self::Auto => s.serialize_str("auto"),
            Self::Fixed(k) => s.serialize_u64(*k as u64),
        }
    }
}

impl<'de> Deserialize<'de> for ClusterSetting {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            N(usize),
            S(String),
        }
        match Raw::deserialize(d)? {
            Raw::N(k) => Ok(Self::Fixed(k)),
            Raw::S(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenizerKind {
    #[default]
    Whitespace,
    Char,
}

impl TokenizerKind {
    pub fn tokenizer(self) -> &'static dyn Tokenizer {
        match self {
            Self::Whitespace => &WhitespaceTokenizer,
            Self::Char => &CharTokenizer,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct RunConfig {
    pub docs: Option<PathBuf>,
    pub questions: Option<PathBuf>,
    pub provider: ProviderKind,
    /// Embedding model; the provider's default when unset.
    pub model: Option<String>,
    pub api_key_env: Option<String>,
    pub base_url: Option<String>,
    pub dimension: usize,
    pub batch_size: usize,
    pub max_retries: u32,
    pub timeout_secs: f64,
    pub max_in_flight: usize,
    pub chunk_size: usize,
    pub chunk_overlap: usize,
    pub tokenizer: TokenizerKind,
    pub clusters: ClusterSetting,
    pub seed: u64,
    pub lof_neighbors: Option<usize>,
    pub lof_threshold: f64,
    pub lof_mode: LofMode,
    pub multi_threshold: f64,
    /// Switches multi-cluster coverage to "N closest centroids" mode.
    pub multi_closest: Option<usize>,
    pub gap_threshold: f64,
    pub concept_backend: ConceptBackendKind,
    pub concept_model: Option<String>,
    pub concept_api_key_env: Option<String>,
    pub concept_base_url: Option<String>,
    pub max_sample: usize,
    pub out: PathBuf,
    pub markdown_out: Option<PathBuf>,
    pub plot: Option<PathBuf>,
    pub plot_method: Option<ProjectionMethod>,
    pub perplexity: Option<f64>,
    pub cache_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let concept = ConceptBackendConfig::default();
        Self {
            docs: None,
            questions: None,
            provider: ProviderKind::Offline,
            model: None,
            api_key_env: None,
            base_url: None,
            dimension: 384,
            batch_size: 64,
            max_retries: 3,
            timeout_secs: 60.0,
            max_in_flight: 4,
            chunk_size: 500,
            chunk_overlap: 50,
            tokenizer: TokenizerKind::Whitespace,
            clusters: ClusterSetting::Auto,
            seed: 42,
            lof_neighbors: None,
            lof_threshold: DEFAULT_THRESHOLD,
            lof_mode: LofMode::Novelty,
            multi_threshold: DEFAULT_MULTI_THRESHOLD,
            multi_closest: None,
            gap_threshold: DEFAULT_GAP_THRESHOLD,
            concept_backend: ConceptBackendKind::Offline,
            concept_model: None,
            concept_api_key_env: None,
            concept_base_url: None,
            max_sample: concept.max_chunks_per_prompt,
            out: PathBuf::from("ragcov-report.json"),
            markdown_out: None,
            plot: None,
            plot_method: None,
            perplexity: None,
            cache_dir: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Source {
    Default,
    File,
    Flag,
}

impl Source {
    fn as_str(self) -> &'static str {
        match self {
            Source::Default => "default",
            Source::File => "file",
            Source::Flag => "flag",
        }
    }
}

/// A merged configuration plus where each non-default key came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Layered {
    pub config: RunConfig,
    pub sources: BTreeMap<String, Source>,
}

fn to_json(v: toml::Value) -> Value {
    match v {
        toml::Value::String(s) => Value::String(s),
        toml::Value::Integer(i) => Value::from(i),
        toml::Value::Float(f) => Value::from(f),
        toml::Value::Boolean(b) => Value::Bool(b),
        toml::Value::Datetime(d) => Value::String(d.to_string()),
        toml::Value::Array(a) => Value::Array(a.into_iter().map(to_json).collect()),
        toml::Value::Table(t) => Value::Object(t.into_iter().map(|(k, v)| (k, to_json(v))).collect()),
    }
}

pub fn parse_config_file(path: &Path) -> Result<Map<String, Value>, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::File {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::File {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok(table.into_iter().map(|(k, v)| (k, to_json(v))).collect())
}

/// Merges defaults, `file` keys and `flags` keys (flags win).
pub fn layer(file: Option<Map<String, Value>>, flags: Map<String, Value>) -> Result<Layered, ConfigError> {
    let Value::Object(mut merged) = serde_json::to_value(RunConfig::default()).expect("config serializes") else {
        unreachable!("RunConfig is a struct");
    };
    let mut sources: BTreeMap<String, Source> = merged.keys().map(|k| (k.clone(), Source::Default)).collect();
    for (layer, source) in [(file.unwrap_or_default(), Source::File), (flags, Source::Flag)] {
        for (key, value) in layer {
            let key = key.replace('_', "-");
            if !merged.contains_key(&key) {
                return Err(ConfigError::UnknownKey(key));
            }
            sources.insert(key.clone(), source);
            merged.insert(key, value);
        }
    }
    let config: RunConfig =
        serde_json::from_value(Value::Object(merged)).map_err(|e| ConfigError::Invalid(e.to_string()))?;
    Ok(Layered { config, sources })
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

fn check_parent(label: &str, path: &Path) -> Result<(), ConfigError> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() && !p.is_dir() => {
            Err(invalid(format!("{label}: directory {} does not exist", p.display())))
        }
        _ => Ok(()),
    }
}

impl RunConfig {
    pub fn provider_config(&self) -> ProviderConfig {
        let mut p = ProviderConfig::for_kind(self.provider);
        if let Some(m) = &self.model {
            p.model_name = m.clone();
        }
        if let Some(env) = &self.api_key_env {
            p.api_key_env = env.clone();
        }
        p.base_url = self.base_url.clone();
        p.dimension = self.dimension;
        p.batch_size = self.batch_size;
        p.max_retries = self.max_retries;
        p.timeout_secs = self.timeout_secs;
        p.max_in_flight = self.max_in_flight;
        p
    }

    pub fn chunking_config(&self) -> Result<ChunkingConfig, ConfigError> {
        ChunkingConfig::new(self.chunk_size, self.chunk_overlap).map_err(|e| invalid(e.to_string()))
    }

    pub fn lof_config(&self) -> LofConfig {
        LofConfig {
            n_neighbors: self.lof_neighbors,
            outlier_threshold: self.lof_threshold,
            mode: self.lof_mode,
        }
    }

    pub fn multi_config(&self) -> MultiCoverageConfig {
        match self.multi_closest {
            Some(n) => MultiCoverageConfig { mode: MultiCoverageMode::NClosest(n) },
            None => MultiCoverageConfig::threshold(self.multi_threshold),
        }
    }

    pub fn kmeans_config(&self) -> KMeansConfig {
        KMeansConfig::default()
    }

    pub fn concept_config(&self) -> ConceptBackendConfig {
        let mut c = ConceptBackendConfig {
            backend: self.concept_backend,
            max_chunks_per_prompt: self.max_sample,
            base_url: self.concept_base_url.clone(),
            timeout_secs: self.timeout_secs,
            max_retries: self.max_retries,
            ..ConceptBackendConfig::default()
        };
        if let Some(m) = &self.concept_model {
            c.model_name = m.clone();
        }
        if let Some(env) = &self.concept_api_key_env {
            c.api_key_env = env.clone();
        }
        c
    }

    /// Checks paths, numeric ranges and credential presence without touching
    /// the network. Returns advisory warnings.
    pub fn validate(&self) -> Result<Vec<String>, ConfigError> {
        let mut warnings = Vec::new();
        let docs = self.docs.as_ref().ok_or_else(|| invalid("docs: no document path given"))?;
        if !docs.exists() {
            return Err(invalid(format!("docs: {} does not exist", docs.display())));
        }
        let questions = self.questions.as_ref().ok_or_else(|| invalid("questions: no question file given"))?;
        if !questions.is_file() {
            return Err(invalid(format!("questions: {} is not a file", questions.display())));
        }
        let chunking = self.chunking_config()?;
        self.provider_config().validate().map_err(|e| invalid(e.to_string()))?;
        if self.provider == ProviderKind::Offline && self.dimension < crate::embed::MIN_DIMENSION {
            return Err(invalid(format!(
                "dimension must be at least {} for the offline provider",
                crate::embed::MIN_DIMENSION
            )));
        }
        if self.clusters == ClusterSetting::Fixed(0) {
            return Err(invalid("clusters must be at least 1 or `auto`"));
        }
        self.lof_config().validate().map_err(|e| invalid(e.to_string()))?;
        self.multi_config().validate().map_err(|e| invalid(e.to_string()))?;
        if !(0.0..=1.0).contains(&self.gap_threshold) {
            return Err(invalid(format!("gap-threshold {} outside [0, 1]", self.gap_threshold)));
        }
        if self.max_sample == 0 {
            return Err(invalid("max-sample must be at least 1"));
        }
        if let Some(p) = self.perplexity {
            if !(p.is_finite() && p > 0.0) {
                return Err(invalid("perplexity must be positive"));
            }
        }
        check_parent("out", &self.out)?;
        if let Some(p) = &self.markdown_out {
            check_parent("markdown-out", p)?;
        }
        if let Some(p) = &self.plot {
            check_parent("plot", p)?;
        }
        let provider = self.provider_config();
        provider
            .check_credentials()
            .map_err(|_| ConfigError::MissingCredentials(provider.api_key_env.clone()))?;
        let concept = self.concept_config();
        concept
            .check_credentials()
            .map_err(|_| ConfigError::MissingCredentials(concept.api_key_env.clone()))?;

        if let ClusterSetting::Fixed(k) = self.clusters {
            if let Some(est) = estimate_chunk_count(docs, &chunking, self.tokenizer) {
                if k > est {
                    warnings.push(format!(
                        "clusters = {k} exceeds the estimated chunk count (about {est}); the run will fail if fewer chunks are produced"
                    ));
                }
            }
        }
        Ok(warnings)
    }

    /// The merged configuration as TOML, each key annotated with its source.
    pub fn effective_dump(&self, sources: &BTreeMap<String, Source>) -> String {
        let body = toml::to_string(self).expect("config serializes to TOML");
        let mut out = String::new();
        for line in body.lines() {
            let key = line.split(" = ").next().unwrap_or("");
            match sources.get(key) {
                Some(src) => out.push_str(&format!("{line}  # {}\n", src.as_str())),
                None => {
                    out.push_str(line);
                    out.push('\n');
                }
            }
        }
        for (key, src) in sources {
            if !body.lines().any(|l| l.starts_with(&format!("{key} = "))) {
                out.push_str(&format!("# {key} unset  ({})\n", src.as_str()));
            }
        }
        out
    }
}

/// Rough chunk count: per document, tokens divided by the chunk stride.
fn estimate_chunk_count(docs: &Path, chunking: &ChunkingConfig, tokenizer: TokenizerKind) -> Option<usize> {
    let paths = collect_document_paths(&[docs.to_path_buf()]).ok()?;
    let stride = chunking.chunk_size - chunking.chunk_overlap;
    let mut total = 0usize;
    for p in paths {
        let text = std::fs::read_to_string(p).ok()?;
        let tokens = tokenizer.tokenizer().count(&text);
        if tokens > 0 {
            total += 1 + tokens.saturating_sub(chunking.chunk_size).div_ceil(stride);
        }
    }
    Some(total)
}
