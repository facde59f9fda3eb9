//! Embedding providers, the passage index, similarity ranking and
//! budget-constrained selection.

mod cache;
mod index;
mod mock;
mod remote;
mod select;
mod vector;

use thiserror::Error;

pub(crate) use cache::sha256;
pub use cache::{decode_record, encode_record, CachedEmbedder, EmbeddingCache};
pub use index::{rank_passages, IndexEntry, PassageIndex, RankedPassage};
pub use mock::{HashedBagEmbedder, MOCK_DIMS};
pub use remote::{RemoteEmbedder, RemoteEmbedderConfig, MAX_BATCH};
pub use select::{select_with_mode, select_within_budget, SelectionMode, TokenWeighted};
pub use vector::{cosine_similarity, EmbeddingVector};

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("embedding dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("index is empty")]
    EmptyIndex,
    #[error("empty embedding batch")]
    EmptyBatch,
    #[error("embedding provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("index built with `{index}` cannot be queried with `{query}`")]
    MixedEmbedders { index: String, query: String },
    #[error("embedding has non-finite entries")]
    NonFinite,
    #[error("embedding has zero length")]
    ZeroVector,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TextRole {
    Query,
    Document,
}

pub trait Embedder: Send + Sync {
    /// Stable identity; recorded in indexes and cache keys.
    fn id(&self) -> &str;

    fn embed(&self, texts: &[&str], role: TextRole) -> Result<Vec<EmbeddingVector>, RetrievalError>;
}

impl<E: Embedder + ?Sized> Embedder for std::sync::Arc<E> {
    fn id(&self) -> &str {
        (**self).id()
    }

    fn embed(&self, texts: &[&str], role: TextRole) -> Result<Vec<EmbeddingVector>, RetrievalError> {
        (**self).embed(texts, role)
    }
}

/// Embeds a non-empty batch, one unit vector per input in input order.
pub fn embed_batch(
    texts: &[&str],
    provider: &dyn Embedder,
    role: TextRole,
) -> Result<Vec<EmbeddingVector>, RetrievalError> {
    if texts.is_empty() {
        return Err(RetrievalError::EmptyBatch);
    }
    let out = provider.embed(texts, role)?;
    if out.len() != texts.len() {
        return Err(RetrievalError::ProviderUnavailable(format!(
            "provider returned {} vectors for {} texts",
            out.len(),
            texts.len()
        )));
    }
    Ok(out)
}
