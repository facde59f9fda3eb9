//! Reader and summarizer model access: prompt rendering, cached greedy
//! completions, answer parsing and the providers behind them.

mod cache;
mod client;
mod heuristic;
mod limit;
mod parse;
pub mod prompts;
mod remote;
mod scripted;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::{TokenCounter, WordPieceApproxCounter};

pub use cache::{cache_key, CacheRecord, ProviderMeta, ResponseCache, CACHE_FILE};
pub use client::{Gateway, GatewayConfig, ModelHandle, TelemetrySnapshot};
pub use heuristic::ExtractiveMock;
pub use limit::{Semaphore, TokenBucket};
pub use parse::{parse_integers, parse_mc_answer};
pub use prompts::{render_gen_prompt, render_mc_prompt};
pub use remote::{ChatProvider, ChatProviderConfig};
pub use scripted::{ScriptRule, ScriptedProvider};

pub const QA_MAX_OUTPUT_TOKENS: usize = 512;
pub const AUX_MAX_OUTPUT_TOKENS: usize = 300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmRequest {
    pub model_id: String,
    pub prompt: String,
    pub max_output_tokens: usize,
    pub temperature: f32,
}

impl LmRequest {
    /// A greedy-decoding request (temperature 0).
    pub fn greedy(model_id: impl Into<String>, prompt: impl Into<String>, max_output_tokens: usize) -> Self {
        Self {
            model_id: model_id.into(),
            prompt: prompt.into(),
            max_output_tokens,
            temperature: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LmResponse {
    pub text: String,
    pub prompt_tokens: usize,
    pub completion_tokens: usize,
    pub cached: bool,
}

/// What a provider returns for one call.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProviderReply {
    pub text: String,
    pub prompt_tokens: usize,
    pub completion_tokens: usize,
}

impl ProviderReply {
    /// Reply whose token accounting comes from the default local counter.
    pub fn counted(prompt: &str, text: String) -> Self {
        let counter = WordPieceApproxCounter::default();
        Self {
            prompt_tokens: counter.count(prompt),
            completion_tokens: counter.count(&text),
            text,
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ProviderError {
    #[error("rate limited: {0}")]
    RateLimited(String),
    #[error("transient failure: {0}")]
    Transient(String),
    #[error("prompt exceeds the model context: {0}")]
    ContextOverflow(String),
    #[error("provider failure: {0}")]
    Fatal(String),
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("context overflow: {0}")]
    ContextOverflow(String),
    #[error("invalid request: {0}")]
    Validation(String),
    #[error("cache i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl From<ProviderError> for GatewayError {
    fn from(e: ProviderError) -> Self {
        match e {
            ProviderError::ContextOverflow(m) => Self::ContextOverflow(m),
            other => Self::ProviderUnavailable(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("at most 4 options are supported, got {0}")]
    TooManyOptions(usize),
    #[error("multiple-choice questions need at least 2 options, got {0}")]
    TooFewOptions(usize),
    #[error("question is empty")]
    EmptyQuestion,
}

#[derive(Debug, Clone, Copy, Error, PartialEq, Eq)]
pub enum AnswerError {
    #[error("no [[k]] answer marker found")]
    ParseFailure,
    #[error("answer {answer} outside 1..={n_options}")]
    OutOfRange { answer: usize, n_options: usize },
}

/// A completion backend. Implementations make exactly one attempt per
/// call; the gateway owns retries and caching.
pub trait LmProvider: Send + Sync {
    fn id(&self) -> &str;

    /// Whether identical requests always yield identical text.
    fn deterministic(&self) -> bool;

    fn call(&self, req: &LmRequest) -> Result<ProviderReply, ProviderError>;
}

/// Text generation as seen by the context-construction strategies.
pub trait LanguageModel: Send + Sync {
    fn generate(&self, prompt: &str, max_output_tokens: usize) -> Result<String, GatewayError>;
}

/// Provider backed by a closure.
pub struct FnProvider<F> {
    id: String,
    deterministic: bool,
    f: F,
}

impl<F> FnProvider<F>
where
    F: Fn(&LmRequest) -> Result<ProviderReply, ProviderError> + Send + Sync,
{
    pub fn new(id: impl Into<String>, deterministic: bool, f: F) -> Self {
        Self {
            id: id.into(),
            deterministic,
            f,
        }
    }
}

impl<F> LmProvider for FnProvider<F>
where
    F: Fn(&LmRequest) -> Result<ProviderReply, ProviderError> + Send + Sync,
{
    fn id(&self) -> &str {
        &self.id
    }

    fn deterministic(&self) -> bool {
        self.deterministic
    }

    fn call(&self, req: &LmRequest) -> Result<ProviderReply, ProviderError> {
        (self.f)(req)
    }
}

/// Language model backed by a closure over the prompt.
pub struct FnModel<F>(pub F);

impl<F> LanguageModel for FnModel<F>
where
    F: Fn(&str) -> Result<String, GatewayError> + Send + Sync,
{
    fn generate(&self, prompt: &str, _max_output_tokens: usize) -> Result<String, GatewayError> {
        (self.0)(prompt)
    }
}
