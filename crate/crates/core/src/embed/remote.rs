//! HTTPS embedding providers. Both speak `POST {base}/embeddings` with
//! `{"model", "input": [...]}` and answer `{"data": [{"index", "embedding"}]}`.

use serde_json::{json, Value};

use super::{EmbedError, EmbeddingProvider, ProviderConfig, ProviderKind};
use crate::http::{JsonClient, RetryPolicy};

pub const OPENAI_BASE_URL: &str = "https://api.openai.com/v1";
pub const VOYAGE_BASE_URL: &str = "https://api.voyageai.com/v1";

#[derive(Debug)]
pub struct RemoteProvider {
    kind: ProviderKind,
    model: String,
    url: String,
    api_key: String,
    client: JsonClient,
}

impl RemoteProvider {
    pub fn new(cfg: &ProviderConfig) -> Result<Self, EmbedError> {
        let api_key = std::env::var(&cfg.api_key_env)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or_else(|| EmbedError::MissingApiKey(cfg.api_key_env.clone()))?;
        let base = cfg.base_url.clone().unwrap_or_else(|| {
            match cfg.provider {
                ProviderKind::Voyage => VOYAGE_BASE_URL,
                _ => OPENAI_BASE_URL,
            }
            .to_string()
        });
        let retry = RetryPolicy {
            max_retries: cfg.max_retries,
            initial_delay: cfg.retry_initial_delay(),
            ..RetryPolicy::default()
        };
        let client = JsonClient::new(cfg.timeout(), retry).map_err(|e| EmbedError::Provider {
            provider: cfg.provider.as_str().to_string(),
            model: cfg.model_name.clone(),
            context: "building HTTP client".into(),
            message: e.to_string(),
        })?;
        Ok(Self {
            kind: cfg.provider,
            model: cfg.model_name.clone(),
            url: format!("{}/embeddings", base.trim_end_matches('/')),
            api_key,
            client,
        })
    }
}

pub(crate) fn parse_embedding_response(body: &Value, expected: usize) -> Result<Vec<Vec<f64>>, String> {
    let data = body
        .get("data")
        .and_then(Value::as_array)
        .ok_or("response has no `data` array")?;
    let mut rows: Vec<Option<Vec<f64>>> = vec![None; expected];
    for (pos, item) in data.iter().enumerate() {
        let index = item
            .get("index")
            .and_then(Value::as_u64)
            .map(|i| i as usize)
            .unwrap_or(pos);
        let values = item
            .get("embedding")
            .and_then(Value::as_array)
            .ok_or_else(|| format!("item {pos} has no `embedding` array"))?
            .iter()
            .map(|v| v.as_f64().ok_or_else(|| format!("item {pos} has a non-numeric value")))
            .collect::<Result<Vec<f64>, String>>()?;
        let slot = rows
            .get_mut(index)
            .ok_or_else(|| format!("index {index} out of range for {expected} inputs"))?;
        *slot = Some(values);
    }
    rows.into_iter()
        .enumerate()
        .map(|(i, r)| r.ok_or_else(|| format!("missing embedding for input {i}")))
        .collect()
}

impl EmbeddingProvider for RemoteProvider {
    fn name(&self) -> &str {
        self.kind.as_str()
    }

    fn model_id(&self) -> String {
        self.model.clone()
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, EmbedError> {
        let body = json!({ "model": self.model, "input": texts });
        let err = |context: String, message: String| EmbedError::Provider {
            provider: self.kind.as_str().to_string(),
            model: self.model.clone(),
            context,
            message,
        };
        let resp = self
            .client
            .post_json(&self.url, &self.api_key, &body)
            .map_err(|e| err(format!("POST {} ({} texts)", self.url, texts.len()), e.to_string()))?;
        parse_embedding_response(&resp, texts.len()).map_err(|m| err(format!("parsing response from {}", self.url), m))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_out_of_order_items() {
        let body = json!({"data": [
            {"index": 1, "embedding": [0.0, 1.0]},
            {"index": 0, "embedding": [1.0, 0.0]}
        ]});
        let rows = parse_embedding_response(&body, 2).unwrap();
        assert_eq!(rows, vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
    }

    #[test]
    fn rejects_short_responses() {
        let body = json!({"data": [{"index": 0, "embedding": [1.0]}]});
        assert!(parse_embedding_response(&body, 2).unwrap_err().contains("missing"));
        assert!(parse_embedding_response(&json!({}), 1).is_err());
    }
}
