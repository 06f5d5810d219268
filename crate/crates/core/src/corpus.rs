//! Document and question loading, and recursive character splitting.
//!
//! Chunks are byte spans of the source text. Consecutive chunks either touch
//! or overlap, so dropping the overlapping prefix of each chunk and
//! concatenating reproduces the document exactly (see [`reconstruct`]).

use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("failed to read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("empty document: {0}")]
    EmptyDocument(PathBuf),
    #[error("unsupported document format: {0} (expected .txt or .md)")]
    UnsupportedFormat(PathBuf),
    #[error("duplicate document id {0}")]
    DuplicateId(String),
    #[error("no readable documents")]
    NoDocuments,
    #[error("no test questions")]
    NoQuestions,
    #[error("malformed question file {path}: {message}")]
    MalformedQuestions { path: PathBuf, message: String },
    #[error("invalid chunking config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawDocument {
    pub id: String,
    pub text: String,
    pub source_path: String,
}

impl RawDocument {
    /// Builds a document from in-memory text, normalizing line endings.
    pub fn new(id: impl Into<String>, text: &str) -> Result<Self, CorpusError> {
        let id = id.into();
        let text = normalize_newlines(text);
        if text.trim().is_empty() {
            return Err(CorpusError::EmptyDocument(PathBuf::from(&id)));
        }
        Ok(Self {
            source_path: id.clone(),
            id,
            text,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentChunk {
    /// Global, 0-based position across the whole corpus.
    pub index: usize,
    pub doc_id: String,
    pub text: String,
    pub token_count: usize,
    /// Byte offset of the chunk in its source document.
    pub start: usize,
    /// Exclusive end byte offset.
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestQuestion {
    pub index: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkingConfig {
    pub chunk_size: usize,
    pub chunk_overlap: usize,
    pub separators: Vec<String>,
}

impl Default for ChunkingConfig {
    fn default() -> Self {
        Self {
            chunk_size: 500,
            chunk_overlap: 50,
            separators: default_separators(),
        }
    }
}

pub fn default_separators() -> Vec<String> {
    ["\n\n", "\n", " ", ""].iter().map(|s| s.to_string()).collect()
}

impl ChunkingConfig {
    pub fn new(chunk_size: usize, chunk_overlap: usize) -> Result<Self, CorpusError> {
        let cfg = Self {
            chunk_size,
            chunk_overlap,
            separators: default_separators(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.chunk_size == 0 {
            return Err(CorpusError::InvalidConfig("chunk_size must be at least 1".into()));
        }
        if self.chunk_overlap >= self.chunk_size {
            return Err(CorpusError::InvalidConfig(format!(
                "chunk_overlap ({}) must be smaller than chunk_size ({})",
                self.chunk_overlap, self.chunk_size
            )));
        }
        match self.separators.last() {
            Some(last) if last.is_empty() => Ok(()),
            _ => Err(CorpusError::InvalidConfig(
                "separators must end with the empty-string separator".into(),
            )),
        }
    }
}

/// Counts approximate tokens in a span of text.
///
/// Implementations should be subadditive over concatenation
/// (`count(a + b) <= count(a) + count(b)`); the splitter relies on summed
/// piece counts being an upper bound for the merged chunk.
pub trait Tokenizer: Send + Sync {
    fn count(&self, text: &str) -> usize;
}

/// Whitespace-delimited words.
#[derive(Debug, Clone, Copy, Default)]
pub struct WhitespaceTokenizer;

impl Tokenizer for WhitespaceTokenizer {
    fn count(&self, text: &str) -> usize {
        text.split_whitespace().count()
    }
}

/// One token per Unicode scalar value.
#[derive(Debug, Clone, Copy, Default)]
pub struct CharTokenizer;

impl Tokenizer for CharTokenizer {
    fn count(&self, text: &str) -> usize {
        text.chars().count()
    }
}

pub(crate) fn normalize_newlines(text: &str) -> String {
    text.replace("\r\n", "\n").replace('\r', "\n")
}

fn is_document_file(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()),
        Some(ref e) if e == "txt" || e == "md" || e == "markdown"
    )
}

/// Expands directories (non-recursively) into their `.txt`/`.md` files.
pub fn collect_document_paths(paths: &[PathBuf]) -> Result<Vec<PathBuf>, CorpusError> {
    let mut out = Vec::new();
    for path in paths {
        if path.is_dir() {
            let entries = fs::read_dir(path).map_err(|source| CorpusError::Read {
                path: path.clone(),
                source,
            })?;
            for entry in entries {
                let entry = entry.map_err(|source| CorpusError::Read {
                    path: path.clone(),
                    source,
                })?;
                let p = entry.path();
                if p.is_file() && is_document_file(&p) {
                    out.push(p);
                }
            }
        } else {
            out.push(path.clone());
        }
    }
    out.sort();
    out.dedup();
    Ok(out)
}

fn read_document(path: &Path) -> Result<RawDocument, CorpusError> {
    if !is_document_file(path) {
        return Err(CorpusError::UnsupportedFormat(path.to_path_buf()));
    }
    let raw = fs::read_to_string(path).map_err(|source| CorpusError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let text = normalize_newlines(&raw);
    if text.trim().is_empty() {
        return Err(CorpusError::EmptyDocument(path.to_path_buf()));
    }
    let display = path.to_string_lossy().into_owned();
    Ok(RawDocument {
        id: display.clone(),
        text,
        source_path: display,
    })
}

/// Outcome of [`load_documents`]: the readable documents plus per-file errors.
#[derive(Debug)]
pub struct LoadedDocuments {
    pub documents: Vec<RawDocument>,
    pub failures: Vec<CorpusError>,
}

/// Loads every file (directories are expanded) in lexicographic path order.
///
/// Unreadable or empty files are reported in `failures`; the call only fails
/// outright when nothing readable remains.
pub fn load_documents(paths: &[PathBuf]) -> Result<LoadedDocuments, CorpusError> {
    let files = collect_document_paths(paths)?;
    let mut documents: Vec<RawDocument> = Vec::new();
    let mut failures = Vec::new();
    for path in files {
        match read_document(&path) {
            Ok(doc) => {
                if documents.iter().any(|d| d.id == doc.id) {
                    failures.push(CorpusError::DuplicateId(doc.id));
                } else {
                    documents.push(doc);
                }
            }
            Err(e) => failures.push(e),
        }
    }
    if documents.is_empty() {
        if failures.len() == 1 {
            return Err(failures.pop().unwrap());
        }
        return Err(CorpusError::NoDocuments);
    }
    Ok(LoadedDocuments {
        documents,
        failures,
    })
}

/// Reads questions from a `.json` array of strings or a line-per-question
/// text file. Blank entries are dropped.
pub fn load_questions(path: &Path) -> Result<Vec<TestQuestion>, CorpusError> {
    let raw = fs::read_to_string(path).map_err(|source| CorpusError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let is_json = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let texts: Vec<String> = if is_json {
        serde_json::from_str::<Vec<String>>(&raw).map_err(|e| CorpusError::MalformedQuestions {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?
    } else {
        normalize_newlines(&raw).lines().map(str::to_string).collect()
    };
    questions_from_texts(texts)
}

pub fn questions_from_texts<I, S>(texts: I) -> Result<Vec<TestQuestion>, CorpusError>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let questions: Vec<TestQuestion> = texts
        .into_iter()
        .map(|t| t.as_ref().trim().to_string())
        .filter(|t| !t.is_empty())
        .enumerate()
        .map(|(index, text)| TestQuestion { index, text })
        .collect();
    if questions.is_empty() {
        return Err(CorpusError::NoQuestions);
    }
    Ok(questions)
}

/// Splits `text` into pieces at `sep`, keeping the separator attached to the
/// end of the preceding piece so the pieces tile the range.
fn split_keeping(text: &str, range: Range<usize>, sep: &str) -> Vec<Range<usize>> {
    let slice = &text[range.clone()];
    let mut pieces = Vec::new();
    if sep.is_empty() {
        for (offset, ch) in slice.char_indices() {
            let s = range.start + offset;
            pieces.push(s..s + ch.len_utf8());
        }
        return pieces;
    }
    let mut start = range.start;
    for (offset, m) in slice.match_indices(sep) {
        let end = range.start + offset + m.len();
        pieces.push(start..end);
        start = end;
    }
    if start < range.end {
        pieces.push(start..range.end);
    }
    pieces
}

struct Splitter<'a> {
    text: &'a str,
    cfg: &'a ChunkingConfig,
    tokenizer: &'a dyn Tokenizer,
}

impl Splitter<'_> {
    fn count(&self, r: &Range<usize>) -> usize {
        self.tokenizer.count(&self.text[r.clone()])
    }

    fn split(&self, range: Range<usize>, separators: &[String]) -> Vec<Range<usize>> {
        let slice = &self.text[range.clone()];
        // First separator present in this span; the rest are kept for re-splitting.
        let pos = separators
            .iter()
            .position(|s| s.is_empty() || slice.contains(s.as_str()))
            .unwrap_or(separators.len().saturating_sub(1));
        let sep = separators.get(pos).map(String::as_str).unwrap_or("");
        let rest = &separators[(pos + 1).min(separators.len())..];

        let mut chunks = Vec::new();
        let mut good: Vec<(Range<usize>, usize)> = Vec::new();
        for piece in split_keeping(self.text, range, sep) {
            let n = self.count(&piece);
            if n <= self.cfg.chunk_size {
                good.push((piece, n));
            } else {
                if !good.is_empty() {
                    chunks.extend(self.merge(std::mem::take(&mut good)));
                }
                if rest.is_empty() {
                    // Nothing finer to split on; the piece stands alone.
                    chunks.push(piece);
                } else {
                    chunks.extend(self.split(piece, rest));
                }
            }
        }
        if !good.is_empty() {
            chunks.extend(self.merge(good));
        }
        chunks
    }

    /// Greedy merge of adjacent pieces into chunks of at most `chunk_size`
    /// tokens, carrying up to `chunk_overlap` tokens of trailing pieces over.
    fn merge(&self, pieces: Vec<(Range<usize>, usize)>) -> Vec<Range<usize>> {
        let size = self.cfg.chunk_size;
        let overlap = self.cfg.chunk_overlap;
        let mut out = Vec::new();
        let mut window: std::collections::VecDeque<(Range<usize>, usize)> = Default::default();
        let mut total = 0usize;
        for (piece, n) in pieces {
            if total + n > size && !window.is_empty() {
                if total > 0 {
                    out.push(window.front().unwrap().0.start..window.back().unwrap().0.end);
                }
                while total > overlap || (total + n > size && total > 0) {
                    let (_, dropped) = window.pop_front().unwrap();
                    total -= dropped;
                }
            }
            total += n;
            window.push_back((piece, n));
        }
        if let (Some(first), Some(last)) = (window.front(), window.back()) {
            out.push(first.0.start..last.0.end);
        }
        out
    }
}

/// Chunks one document with the whitespace tokenizer. Chunk indices start at 0.
pub fn chunk_document(doc: &RawDocument, cfg: &ChunkingConfig) -> Result<Vec<DocumentChunk>, CorpusError> {
    chunk_document_with(doc, cfg, &WhitespaceTokenizer, 0)
}

/// Chunks one document with a caller-supplied tokenizer, numbering chunks
/// from `first_index`.
pub fn chunk_document_with(
    doc: &RawDocument,
    cfg: &ChunkingConfig,
    tokenizer: &dyn Tokenizer,
    first_index: usize,
) -> Result<Vec<DocumentChunk>, CorpusError> {
    cfg.validate()?;
    let splitter = Splitter {
        text: &doc.text,
        cfg,
        tokenizer,
    };
    let spans = splitter.split(0..doc.text.len(), &cfg.separators);
    let mut chunks: Vec<DocumentChunk> = Vec::with_capacity(spans.len());
    for span in spans {
        let text = &doc.text[span.clone()];
        let token_count = tokenizer.count(text);
        if token_count == 0 {
            // Whitespace-only span: fold it into its neighbour to keep the tiling.
            if let Some(prev) = chunks.last_mut() {
                if span.end > prev.end {
                    prev.end = span.end;
                    prev.text = doc.text[prev.start..prev.end].to_string();
                }
                continue;
            }
        }
        chunks.push(DocumentChunk {
            index: first_index + chunks.len(),
            doc_id: doc.id.clone(),
            text: text.to_string(),
            token_count,
            start: span.start,
            end: span.end,
        });
    }
    // A leading whitespace-only chunk is absorbed into its successor.
    if chunks.len() > 1 && chunks[0].token_count == 0 {
        let head = chunks.remove(0);
        let next = &mut chunks[0];
        next.start = head.start.min(next.start);
        next.text = doc.text[next.start..next.end].to_string();
        next.token_count = tokenizer.count(&next.text);
        for (i, c) in chunks.iter_mut().enumerate() {
            c.index = first_index + i;
        }
    }
    Ok(chunks)
}

/// Chunks every document, assigning contiguous global indices.
pub fn chunk_corpus(docs: &[RawDocument], cfg: &ChunkingConfig) -> Result<Vec<DocumentChunk>, CorpusError> {
    let mut all = Vec::new();
    for doc in docs {
        let chunks = chunk_document_with(doc, cfg, &WhitespaceTokenizer, all.len())?;
        all.extend(chunks);
    }
    Ok(all)
}

/// Rebuilds a document from its chunks by dropping each chunk's overlap with
/// the previous one.
pub fn reconstruct(chunks: &[DocumentChunk]) -> String {
    let mut out = String::new();
    let mut covered = 0usize;
    for (i, chunk) in chunks.iter().enumerate() {
        if i == 0 {
            covered = chunk.start;
        }
        let skip = covered.saturating_sub(chunk.start).min(chunk.text.len());
        out.push_str(&chunk.text[skip..]);
        covered = covered.max(chunk.end);
    }
    out
}

/// Byte overlap between each chunk and its predecessor (0 for the first).
pub fn declared_overlaps(chunks: &[DocumentChunk]) -> Vec<usize> {
    let mut out = Vec::with_capacity(chunks.len());
    let mut prev_end = None;
    for c in chunks {
        out.push(prev_end.map_or(0, |e: usize| e.saturating_sub(c.start)));
        prev_end = Some(c.end);
    }
    out
}
