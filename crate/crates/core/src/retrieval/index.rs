use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::remote::MAX_BATCH;
use super::select::TokenWeighted;
use super::{cosine_similarity, Embedder, EmbeddingVector, RetrievalError, TextRole};
use crate::text::Passage;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub passage: Passage,
    pub embedding: EmbeddingVector,
}

/// Embedded passages of one document, in position order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassageIndex {
    pub doc_id: String,
    pub embedder_id: String,
    entries: Vec<IndexEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedPassage {
    pub passage: Passage,
    pub score: f64,
    pub rank: usize,
}

impl TokenWeighted for RankedPassage {
    fn token_count(&self) -> usize {
        self.passage.token_count
    }
}

impl PassageIndex {
    /// Embeds `passages` (batches run in parallel) and builds the index.
    pub fn build(
        doc_id: impl Into<String>,
        passages: &[Passage],
        embedder: &dyn Embedder,
    ) -> Result<Self, RetrievalError> {
        let doc_id = doc_id.into();
        if passages.is_empty() {
            return Err(RetrievalError::EmptyIndex);
        }
        let texts: Vec<&str> = passages.iter().map(|p| p.text.as_str()).collect();
        let batches: Vec<Vec<EmbeddingVector>> = texts
            .par_chunks(MAX_BATCH)
            .map(|chunk| super::embed_batch(chunk, embedder, TextRole::Document))
            .collect::<Result<_, _>>()?;
        let entries = passages
            .iter()
            .cloned()
            .zip(batches.into_iter().flatten())
            .map(|(passage, embedding)| IndexEntry { passage, embedding })
            .collect();
        Self::from_entries(doc_id, embedder.id(), entries)
    }

    /// Assembles an index from precomputed entries, checking its invariants.
    pub fn from_entries(
        doc_id: impl Into<String>,
        embedder_id: impl Into<String>,
        mut entries: Vec<IndexEntry>,
    ) -> Result<Self, RetrievalError> {
        let Some(first) = entries.first() else {
            return Err(RetrievalError::EmptyIndex);
        };
        let dims = first.embedding.dims();
        if let Some(bad) = entries.iter().find(|e| e.embedding.dims() != dims) {
            return Err(RetrievalError::DimensionMismatch {
                left: dims,
                right: bad.embedding.dims(),
            });
        }
        entries.sort_by_key(|e| e.passage.position);
        Ok(Self {
            doc_id: doc_id.into(),
            embedder_id: embedder_id.into(),
            entries,
        })
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dims(&self) -> usize {
        self.entries.first().map_or(0, |e| e.embedding.dims())
    }

    /// Embeds `query` with `embedder`, refusing embedders other than the
    /// one the index was built with.
    pub fn embed_query(&self, query: &str, embedder: &dyn Embedder) -> Result<EmbeddingVector, RetrievalError> {
        if embedder.id() != self.embedder_id {
            return Err(RetrievalError::MixedEmbedders {
                index: self.embedder_id.clone(),
                query: embedder.id().to_string(),
            });
        }
        let mut out = super::embed_batch(&[query], embedder, TextRole::Query)?;
        Ok(out.remove(0))
    }
}

/// Scores every passage against the query. Scores are non-increasing in
/// rank; equal scores keep ascending passage position.
pub fn rank_passages(query: &EmbeddingVector, index: &PassageIndex) -> Result<Vec<RankedPassage>, RetrievalError> {
    if index.is_empty() {
        return Err(RetrievalError::EmptyIndex);
    }
    let mut scored = index
        .entries
        .iter()
        .map(|e| Ok((e, cosine_similarity(query, &e.embedding)?)))
        .collect::<Result<Vec<_>, RetrievalError>>()?;
    scored.sort_by(|(a, sa), (b, sb)| sb.total_cmp(sa).then(a.passage.position.cmp(&b.passage.position)));
    Ok(scored
        .into_iter()
        .enumerate()
        .map(|(rank, (e, score))| RankedPassage {
            passage: e.passage.clone(),
            score,
            rank,
        })
        .collect())
}
