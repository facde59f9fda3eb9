//! Content-addressed on-disk embedding cache.
//!
//! Layout: `<root>/<sha256(embedder_id)[..16]>/<sha256(text)>.bin`, one
//! record per file:
//!
//! ```text
//! b"RBEC" | version: u8 = 1 | id_len: u16 LE | embedder_id bytes
//!        | sha256(text): 32 bytes | dims: u32 LE | dims × f32 LE
//! ```
//!
//! Writes go to a temp file in the same directory and are renamed into
//! place, so readers never observe partial records. Concurrent writers of
//! the same key race harmlessly: the values are identical.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::{Embedder, EmbeddingVector, RetrievalError, TextRole};

const MAGIC: &[u8; 4] = b"RBEC";
const VERSION: u8 = 1;

#[derive(Debug, Clone)]
pub struct EmbeddingCache {
    root: PathBuf,
}

pub(crate) fn sha256(bytes: &[u8]) -> [u8; 32] {
    Sha256::digest(bytes).into()
}

pub fn encode_record(embedder_id: &str, text_hash: &[u8; 32], vector: &EmbeddingVector) -> Vec<u8> {
    let id = embedder_id.as_bytes();
    let mut out = Vec::with_capacity(4 + 1 + 2 + id.len() + 32 + 4 + 4 * vector.dims());
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&(id.len() as u16).to_le_bytes());
    out.extend_from_slice(id);
    out.extend_from_slice(text_hash);
    out.extend_from_slice(&(vector.dims() as u32).to_le_bytes());
    for v in vector.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Parses a record, returning (embedder_id, text hash, vector).
pub fn decode_record(bytes: &[u8]) -> Option<(String, [u8; 32], EmbeddingVector)> {
    let rest = bytes.strip_prefix(MAGIC)?;
    let (&version, rest) = rest.split_first()?;
    if version != VERSION || rest.len() < 2 {
        return None;
    }
    let id_len = u16::from_le_bytes([rest[0], rest[1]]) as usize;
    let rest = &rest[2..];
    if rest.len() < id_len + 32 + 4 {
        return None;
    }
    let id = String::from_utf8(rest[..id_len].to_vec()).ok()?;
    let hash: [u8; 32] = rest[id_len..id_len + 32].try_into().ok()?;
    let rest = &rest[id_len + 32..];
    let dims = u32::from_le_bytes(rest[..4].try_into().ok()?) as usize;
    let floats = &rest[4..];
    if floats.len() != dims * 4 {
        return None;
    }
    let values = floats
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Some((id, hash, EmbeddingVector::normalized(values).ok()?))
}

impl EmbeddingCache {
    pub fn open(root: impl Into<PathBuf>) -> io::Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn path_for(&self, embedder_id: &str, text_hash: &[u8; 32]) -> PathBuf {
        let id_dir = &hex::encode(sha256(embedder_id.as_bytes()))[..16];
        self.root.join(id_dir).join(format!("{}.bin", hex::encode(text_hash)))
    }

    pub fn get(&self, embedder_id: &str, text: &str) -> Option<EmbeddingVector> {
        let hash = sha256(text.as_bytes());
        let bytes = fs::read(self.path_for(embedder_id, &hash)).ok()?;
        match decode_record(&bytes) {
            Some((id, h, v)) if id == embedder_id && h == hash => Some(v),
            _ => None,
        }
    }

    pub fn put(&self, embedder_id: &str, text: &str, vector: &EmbeddingVector) -> io::Result<()> {
        let hash = sha256(text.as_bytes());
        let path = self.path_for(embedder_id, &hash);
        let dir = path.parent().expect("record path has a parent");
        fs::create_dir_all(dir)?;
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        tmp.write_all(&encode_record(embedder_id, &hash, vector))?;
        tmp.persist(&path).map_err(|e| e.error)?;
        Ok(())
    }
}

/// Wraps an embedder with the disk cache. Queries and documents are cached
/// under distinct keys because providers may prefix them differently.
pub struct CachedEmbedder<E> {
    inner: E,
    cache: EmbeddingCache,
}

impl<E: Embedder> CachedEmbedder<E> {
    pub fn new(inner: E, cache: EmbeddingCache) -> Self {
        Self { inner, cache }
    }

    fn key(&self, role: TextRole) -> String {
        match role {
            TextRole::Document => self.inner.id().to_string(),
            TextRole::Query => format!("{}#query", self.inner.id()),
        }
    }
}

impl<E: Embedder> Embedder for CachedEmbedder<E> {
    fn id(&self) -> &str {
        self.inner.id()
    }

    fn embed(&self, texts: &[&str], role: TextRole) -> Result<Vec<EmbeddingVector>, RetrievalError> {
        let key = self.key(role);
        let mut out: Vec<Option<EmbeddingVector>> = texts.iter().map(|t| self.cache.get(&key, t)).collect();
        let missing: Vec<usize> = (0..texts.len()).filter(|&i| out[i].is_none()).collect();
        if !missing.is_empty() {
            let batch: Vec<&str> = missing.iter().map(|&i| texts[i]).collect();
            let fresh = self.inner.embed(&batch, role)?;
            for (&i, vector) in missing.iter().zip(fresh) {
                if let Err(e) = self.cache.put(&key, texts[i], &vector) {
                    log::warn!("embedding cache write failed: {e}");
                }
                out[i] = Some(vector);
            }
        }
        Ok(out.into_iter().map(|v| v.expect("filled")).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::retrieval::HashedBagEmbedder;
    use std::sync::atomic::{AtomicUsize, Ordering};

    struct Counting {
        inner: HashedBagEmbedder,
        calls: AtomicUsize,
    }

    impl Embedder for Counting {
        fn id(&self) -> &str {
            self.inner.id()
        }

        fn embed(&self, texts: &[&str], role: TextRole) -> Result<Vec<EmbeddingVector>, RetrievalError> {
            self.calls.fetch_add(texts.len(), Ordering::SeqCst);
            self.inner.embed(texts, role)
        }
    }

    #[test]
    fn record_layout() {
        let v = EmbeddingVector::normalized(vec![1.0, 0.0]).unwrap();
        let hash = sha256(b"hello");
        let bytes = encode_record("e", &hash, &v);
        assert_eq!(&bytes[..4], b"RBEC");
        assert_eq!(bytes[4], 1);
        assert_eq!(&bytes[5..7], &[1, 0]);
        assert_eq!(bytes[7], b'e');
        assert_eq!(&bytes[8..40], &hash);
        assert_eq!(&bytes[40..44], &[2, 0, 0, 0]);
        assert_eq!(&bytes[44..48], &1.0f32.to_le_bytes());
        assert_eq!(bytes.len(), 52);
        let (id, h, back) = decode_record(&bytes).unwrap();
        assert_eq!((id.as_str(), h, back), ("e", hash, v));
        assert!(decode_record(&bytes[..50]).is_none());
    }

    #[test]
    fn second_pass_hits_the_cache() {
        let dir = tempfile::tempdir().unwrap();
        let cached = CachedEmbedder::new(
            Counting {
                inner: HashedBagEmbedder::default(),
                calls: AtomicUsize::new(0),
            },
            EmbeddingCache::open(dir.path()).unwrap(),
        );
        let first = cached.embed(&["x y", "z"], TextRole::Document).unwrap();
        let second = cached.embed(&["z", "x y", "new"], TextRole::Document).unwrap();
        assert_eq!(first[0], second[1]);
        assert_eq!(first[1], second[0]);
        assert_eq!(cached.inner.calls.load(Ordering::SeqCst), 3);
        cached.embed(&["z"], TextRole::Query).unwrap();
        assert_eq!(cached.inner.calls.load(Ordering::SeqCst), 4);
    }

    #[test]
    fn foreign_embedder_records_are_ignored() {
        let dir = tempfile::tempdir().unwrap();
        let cache = EmbeddingCache::open(dir.path()).unwrap();
        let v = EmbeddingVector::normalized(vec![1.0]).unwrap();
        cache.put("a", "text", &v).unwrap();
        assert_eq!(cache.get("a", "text"), Some(v));
        assert_eq!(cache.get("b", "text"), None);
    }
}
