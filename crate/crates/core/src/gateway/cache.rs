//! Append-only response cache.
//!
//! A cache directory holds one file, `responses.jsonl`. Each line is a
//! record `{key, request, response, provider}` where `key` is the hex
//! sha256 of the request's cache identity (see [`cache_key`]). Lines are
//! only ever appended; on load, later records override earlier ones and
//! malformed lines (for example a torn final write) are skipped.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use serde::{Deserialize, Serialize};

use super::{LmRequest, LmResponse};
use crate::retrieval::sha256;

pub const CACHE_FILE: &str = "responses.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderMeta {
    pub provider_id: String,
    pub retries: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheRecord {
    pub key: String,
    pub request: LmRequest,
    pub response: LmResponse,
    pub provider: ProviderMeta,
}

/// Cache identity of a request. The gateway salts with the provider id,
/// plus the run index for nondeterministic providers.
pub fn cache_key(req: &LmRequest, salt: &str) -> String {
    let mut material = Vec::with_capacity(req.prompt.len() + 64);
    for part in [
        req.model_id.as_bytes(),
        req.max_output_tokens.to_string().as_bytes(),
        salt.as_bytes(),
    ] {
        material.extend_from_slice(part);
        material.push(0);
    }
    material.extend_from_slice(req.prompt.as_bytes());
    hex::encode(sha256(&material))
}

pub struct ResponseCache {
    path: PathBuf,
    entries: RwLock<HashMap<String, LmResponse>>,
    writer: Mutex<File>,
}

impl ResponseCache {
    pub fn open(dir: impl AsRef<Path>) -> io::Result<Self> {
        fs::create_dir_all(dir.as_ref())?;
        let path = dir.as_ref().join(CACHE_FILE);
        let mut entries = HashMap::new();
        if path.exists() {
            for line in BufReader::new(File::open(&path)?).lines() {
                let line = line?;
                match serde_json::from_str::<CacheRecord>(&line) {
                    Ok(record) => {
                        entries.insert(record.key, record.response);
                    }
                    Err(e) if !line.trim().is_empty() => {
                        log::warn!("skipping malformed cache line in {}: {e}", path.display());
                    }
                    Err(_) => {}
                }
            }
        }
        let mut writer = OpenOptions::new().create(true).append(true).open(&path)?;
        let len = writer.metadata()?.len();
        if len > 0 && !fs::read(&path)?.ends_with(b"\n") {
            writer.write_all(b"\n")?;
        }
        Ok(Self {
            path,
            entries: RwLock::new(entries),
            writer: Mutex::new(writer),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn get(&self, key: &str) -> Option<LmResponse> {
        self.entries.read().unwrap().get(key).cloned()
    }

    pub fn len(&self) -> usize {
        self.entries.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn insert(&self, record: CacheRecord) -> io::Result<()> {
        let mut line = serde_json::to_string(&record)?;
        line.push('\n');
        {
            let mut writer = self.writer.lock().unwrap();
            writer.write_all(line.as_bytes())?;
            writer.flush()?;
        }
        self.entries.write().unwrap().insert(record.key, record.response);
        Ok(())
    }
}
