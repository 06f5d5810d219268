//! Chat-completion backend for theme extraction and question suggestion.

use serde_json::{json, Value};

use super::{ConceptBackend, ConceptBackendConfig, GapError};
use crate::corpus::DocumentChunk;
use crate::http::{JsonClient, RetryPolicy};

pub const DEFAULT_BASE_URL: &str = "https://api.openai.com/v1";

const SYSTEM_PROMPT: &str = "You help maintain test suites for retrieval-augmented question answering systems. \
Answer with a JSON array of strings and nothing else.";

#[derive(Debug)]
pub struct LlmBackend {
    model: String,
    url: String,
    api_key: String,
    client: JsonClient,
    max_chunks: usize,
}

impl LlmBackend {
    pub fn new(cfg: &ConceptBackendConfig) -> Result<Self, GapError> {
        let api_key = std::env::var(&cfg.api_key_env)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or_else(|| GapError::MissingApiKey(cfg.api_key_env.clone()))?;
        let base = cfg.base_url.as_deref().unwrap_or(DEFAULT_BASE_URL);
        let retry = RetryPolicy {
            max_retries: cfg.max_retries,
            initial_delay: std::time::Duration::from_millis(cfg.retry_initial_delay_ms),
            ..RetryPolicy::default()
        };
        let client = JsonClient::new(std::time::Duration::from_secs_f64(cfg.timeout_secs), retry)
            .map_err(|e| GapError::Backend(e.to_string()))?;
        Ok(Self {
            model: cfg.model_name.clone(),
            url: format!("{}/chat/completions", base.trim_end_matches('/')),
            api_key,
            client,
            max_chunks: cfg.max_chunks_per_prompt.max(1),
        })
    }

    fn complete(&self, prompt: &str) -> Result<Vec<String>, GapError> {
        let body = json!({
            "model": self.model,
            "temperature": 0,
            "messages": [
                {"role": "system", "content": SYSTEM_PROMPT},
                {"role": "user", "content": prompt},
            ],
        });
        let resp = self
            .client
            .post_json(&self.url, &self.api_key, &body)
            .map_err(|e| GapError::Backend(e.to_string()))?;
        let content = resp
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .ok_or_else(|| GapError::Backend("completion has no message content".into()))?;
        parse_string_list(content)
    }
}

fn excerpts(chunks: &[&DocumentChunk], limit: usize) -> String {
    chunks
        .iter()
        .take(limit)
        .enumerate()
        .map(|(i, c)| format!("Excerpt {}:\n{}\n", i + 1, c.text.trim()))
        .collect::<Vec<_>>()
        .join("\n")
}

pub(crate) fn themes_prompt(chunks: &[&DocumentChunk], limit: usize) -> String {
    format!(
        "The excerpts below come from one topical cluster of a documentation corpus. \
         Identify the 3 to 5 key concepts the cluster covers, each as a short noun phrase in title case. \
         Respond with a JSON array of strings.\n\n{}",
        excerpts(chunks, limit)
    )
}

pub(crate) fn questions_prompt(themes: &[String], chunks: &[&DocumentChunk], limit: usize) -> String {
    format!(
        "A test suite has few questions about these themes: {}. \
         Write 1 to 3 natural-language questions a user of the documentation might ask about them, \
         answerable from the excerpts below. Respond with a JSON array of strings.\n\n{}",
        themes.join("; "),
        excerpts(chunks, limit)
    )
}

/// Extracts the first JSON array of strings from a completion, tolerating
/// surrounding prose or code fences.
pub(crate) fn parse_string_list(content: &str) -> Result<Vec<String>, GapError> {
    let start = content.find('[');
    let end = content.rfind(']');
    let (Some(start), Some(end)) = (start, end) else {
        return Err(GapError::Backend("completion contains no JSON array".into()));
    };
    if end < start {
        return Err(GapError::Backend("completion contains no JSON array".into()));
    }
    let items: Vec<String> =
        serde_json::from_str(&content[start..=end]).map_err(|e| GapError::Backend(format!("unparseable completion: {e}")))?;
    let items: Vec<String> = items
        .into_iter()
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect();
    if items.is_empty() {
        return Err(GapError::Backend("completion returned an empty list".into()));
    }
    Ok(items)
}

impl ConceptBackend for LlmBackend {
    fn name(&self) -> &str {
        "llm"
    }

    fn extract_themes(&self, cluster_chunks: &[&DocumentChunk], _corpus: &[DocumentChunk]) -> Result<Vec<String>, GapError> {
        let mut themes = self.complete(&themes_prompt(cluster_chunks, self.max_chunks))?;
        themes.truncate(5);
        Ok(themes)
    }

    fn suggest_questions(&self, themes: &[String], sample: &[&DocumentChunk]) -> Result<Vec<String>, GapError> {
        let mut qs = self.complete(&questions_prompt(themes, sample, self.max_chunks))?;
        qs.truncate(3);
        Ok(qs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fenced_arrays() {
        let got = parse_string_list("```json\n[\"Data Privacy\", \"User Consent\", \" \"]\n```").unwrap();
        assert_eq!(got, vec!["Data Privacy", "User Consent"]);
    }

    #[test]
    fn empty_or_missing_arrays_fail() {
        assert!(parse_string_list("[]").is_err());
        assert!(parse_string_list("no list here").is_err());
        assert!(parse_string_list("] [").is_err());
        assert!(parse_string_list("[1, 2]").is_err());
    }

    #[test]
    fn prompts_respect_chunk_limit() {
        let chunks: Vec<DocumentChunk> = (0..4)
            .map(|i| DocumentChunk {
                index: i,
                doc_id: "d".into(),
                text: format!("chunk body {i}"),
                token_count: 3,
                start: 0,
                end: 0,
            })
            .collect();
        let refs: Vec<&DocumentChunk> = chunks.iter().collect();
        let p = themes_prompt(&refs, 2);
        assert!(p.contains("Excerpt 2:") && !p.contains("Excerpt 3:"));
        assert!(p.contains("JSON array"));
        let q = questions_prompt(&["A".into(), "B".into()], &refs, 1);
        assert!(q.contains("A; B"));
    }
}
