//! Documents, token counting, sentence segmentation and passage chunking.

mod chunk;
mod sentences;
mod tokens;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use chunk::{chunk_passages, Passage, DEFAULT_MAX_PASSAGE_TOKENS};
pub use sentences::{split_sentences, Sentence};
pub use tokens::{
    count_tokens, normalize_whitespace, truncate_to_tokens, CounterRegistry, TokenCounter, WhitespaceCounter,
    WordPieceApproxCounter, DEFAULT_COUNTER, WHITESPACE_COUNTER,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TextError {
    #[error("document `{0}` is empty")]
    EmptyDocument(String),
    #[error("unknown token counter `{0}`")]
    UnknownCounter(String),
    #[error("passage cap must be at least 1 token")]
    InvalidCap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceBenchmark {
    #[serde(alias = "infinitebench_enmc")]
    InfiniteBench,
    Quality,
    #[serde(alias = "narrative_qa")]
    NarrativeQa,
    Synthetic,
}

impl SourceBenchmark {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::InfiniteBench => "infinitebench",
            Self::Quality => "quality",
            Self::NarrativeQa => "narrativeqa",
            Self::Synthetic => "synthetic",
        }
    }
}

impl std::fmt::Display for SourceBenchmark {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SourceBenchmark {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "infinitebench" | "infinitebench_enmc" | "en.mc" => Ok(Self::InfiniteBench),
            "quality" => Ok(Self::Quality),
            "narrativeqa" | "narrative_qa" => Ok(Self::NarrativeQa),
            "synthetic" => Ok(Self::Synthetic),
            other => Err(format!("unknown benchmark `{other}`")),
        }
    }
}

/// Source text of one long document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub text: String,
    pub source_benchmark: SourceBenchmark,
}

impl Document {
    pub fn new(
        doc_id: impl Into<String>,
        text: impl Into<String>,
        source_benchmark: SourceBenchmark,
    ) -> Result<Self, TextError> {
        let doc_id = doc_id.into();
        let text = text.into();
        if text.trim().is_empty() {
            return Err(TextError::EmptyDocument(doc_id));
        }
        Ok(Self {
            doc_id,
            text,
            source_benchmark,
        })
    }

    pub fn synthetic(doc_id: impl Into<String>, text: impl Into<String>) -> Result<Self, TextError> {
        Self::new(doc_id, text, SourceBenchmark::Synthetic)
    }
}

/// Sentences plus passages for one document, computed with one counter.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentedDocument {
    pub doc: Document,
    pub sentences: Vec<Sentence>,
    pub passages: Vec<Passage>,
}

impl SegmentedDocument {
    pub fn build(doc: Document, counter: &dyn TokenCounter, max_passage_tokens: usize) -> Result<Self, TextError> {
        let sentences = split_sentences(&doc, counter)?;
        let passages = chunk_passages(&doc, &sentences, max_passage_tokens, counter)?;
        Ok(Self {
            doc,
            sentences,
            passages,
        })
    }
}
