//! Embeddings over an OpenAI-compatible `/embeddings` HTTP endpoint.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{Embedder, EmbeddingVector, RetrievalError, TextRole};
use crate::http::{is_retryable_status, with_retries, Failure, RetryPolicy};

pub const MAX_BATCH: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemoteEmbedderConfig {
    /// Full URL of the embeddings endpoint.
    pub endpoint: String,
    pub model: String,
    /// Environment variable holding the API key. Unset variable = no auth header.
    pub api_key_env: String,
    pub query_prefix: String,
    pub document_prefix: String,
    pub batch_size: usize,
    pub retry: RetryPolicy,
    pub timeout_secs: u64,
}

impl Default for RemoteEmbedderConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://api.openai.com/v1/embeddings".into(),
            model: "snowflake-arctic-embed-m-v1.5".into(),
            api_key_env: "EMBEDDING_API_KEY".into(),
            query_prefix: String::new(),
            document_prefix: String::new(),
            batch_size: MAX_BATCH,
            retry: RetryPolicy::default(),
            timeout_secs: 60,
        }
    }
}

pub struct RemoteEmbedder {
    config: RemoteEmbedderConfig,
    client: reqwest::blocking::Client,
    api_key: Option<String>,
    id: String,
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    #[serde(default)]
    index: Option<usize>,
    embedding: Vec<f32>,
}

impl RemoteEmbedder {
    pub fn new(config: RemoteEmbedderConfig) -> Result<Self, RetrievalError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| RetrievalError::ProviderUnavailable(e.to_string()))?;
        let api_key = std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty());
        let id = format!("remote:{}", config.model);
        Ok(Self {
            config,
            client,
            api_key,
            id,
        })
    }

    fn request(&self, inputs: &[String]) -> Result<Vec<EmbeddingVector>, RetrievalError> {
        let body = json!({ "model": self.config.model, "input": inputs });
        let (vectors, retries) = with_retries(self.config.retry, || {
            let mut req = self.client.post(&self.config.endpoint).json(&body);
            if let Some(key) = &self.api_key {
                req = req.bearer_auth(key);
            }
            let resp = req
                .send()
                .map_err(|e| Failure::Retryable(RetrievalError::ProviderUnavailable(e.to_string())))?;
            let status = resp.status().as_u16();
            if !resp.status().is_success() {
                let err = RetrievalError::ProviderUnavailable(format!("HTTP {status}"));
                return Err(if is_retryable_status(status) {
                    Failure::Retryable(err)
                } else {
                    Failure::Permanent(err)
                });
            }
            let parsed: EmbeddingResponse = resp
                .json()
                .map_err(|e| Failure::Permanent(RetrievalError::ProviderUnavailable(format!("bad response: {e}"))))?;
            Ok(parsed)
        })?;
        if retries > 0 {
            log::info!("embedding batch succeeded after {retries} retries");
        }
        let mut data = vectors.data;
        if data.len() != inputs.len() {
            return Err(RetrievalError::ProviderUnavailable(format!(
                "expected {} embeddings, got {}",
                inputs.len(),
                data.len()
            )));
        }
        if data.iter().all(|d| d.index.is_some()) {
            data.sort_by_key(|d| d.index);
        }
        data.into_iter()
            .map(|d| EmbeddingVector::normalized(d.embedding))
            .collect()
    }
}

impl Embedder for RemoteEmbedder {
    fn id(&self) -> &str {
        &self.id
    }

    fn embed(&self, texts: &[&str], role: TextRole) -> Result<Vec<EmbeddingVector>, RetrievalError> {
        let prefix = match role {
            TextRole::Query => &self.config.query_prefix,
            TextRole::Document => &self.config.document_prefix,
        };
        let batch = self.config.batch_size.clamp(1, MAX_BATCH);
        let mut out = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(batch) {
            let inputs: Vec<String> = chunk.iter().map(|t| format!("{prefix}{t}")).collect();
            out.extend(self.request(&inputs)?);
        }
        Ok(out)
    }
}
