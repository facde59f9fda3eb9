//! Offline embedder: hashed bag of tokens.

use super::{Embedder, EmbeddingVector, RetrievalError, TextRole};
use crate::text::{TokenCounter, WordPieceApproxCounter};

pub const MOCK_DIMS: usize = 256;

/// 64-bit FNV-1a. Stable across platforms and toolchains, unlike `DefaultHasher`.
pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Hashes every lowercased token of the default counter into one of `dims`
/// buckets, counts occurrences and L2-normalizes. Text without tokens maps
/// to the first basis vector.
#[derive(Debug, Clone)]
pub struct HashedBagEmbedder {
    dims: usize,
    counter: WordPieceApproxCounter,
    id: String,
}

impl HashedBagEmbedder {
    pub fn new(dims: usize) -> Self {
        assert!(dims > 0);
        Self {
            dims,
            counter: WordPieceApproxCounter::default(),
            id: format!("mock-hashed-bag-{dims}"),
        }
    }

    pub fn embed_one(&self, text: &str) -> EmbeddingVector {
        let mut counts = vec![0f32; self.dims];
        for span in self.counter.token_spans(text) {
            let token = text[span].to_lowercase();
            let bucket = (fnv1a(token.as_bytes()) % self.dims as u64) as usize;
            counts[bucket] += 1.0;
        }
        if counts.iter().all(|&c| c == 0.0) {
            counts[0] = 1.0;
        }
        EmbeddingVector::normalized(counts).expect("non-zero finite counts")
    }
}

impl Default for HashedBagEmbedder {
    fn default() -> Self {
        Self::new(MOCK_DIMS)
    }
}

impl Embedder for HashedBagEmbedder {
    fn id(&self) -> &str {
        &self.id
    }

    fn embed(&self, texts: &[&str], _role: TextRole) -> Result<Vec<EmbeddingVector>, RetrievalError> {
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }
}
