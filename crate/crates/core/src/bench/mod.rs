//! Benchmark ingestion: QA task records, upstream loaders, a normalized
//! line-record corpus format and a seeded synthetic generator.

mod loaders;
pub mod synthetic;

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::text::{Document, SourceBenchmark, TextError};

pub use loaders::{load_infinitebench_enmc, load_narrativeqa, load_quality, INFINITEBENCH_FILE};
pub use synthetic::{generate_synthetic_corpus, PlantedFact, SyntheticConfig, SyntheticCorpus, SyntheticReader};

pub const CORPUS_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("missing input files: {}", .0.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", "))]
    MissingFiles(Vec<PathBuf>),
    #[error("schema mismatch at {record}: {reason}")]
    SchemaMismatch { record: String, reason: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Text(#[from] TextError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub(crate) fn mismatch(record: impl Into<String>, reason: impl Into<String>) -> BenchError {
    BenchError::SchemaMismatch {
        record: record.into(),
        reason: reason.into(),
    }
}

/// One question about one document. Multiple-choice tasks carry options and
/// a 0-based `gold_option`; free-form tasks carry reference answers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QATask {
    pub task_id: String,
    pub doc_id: String,
    pub question: String,
    #[serde(default)]
    pub options: Vec<String>,
    #[serde(default)]
    pub gold_option: Option<usize>,
    #[serde(default)]
    pub gold_answers: Vec<String>,
    pub benchmark: SourceBenchmark,
}

impl QATask {
    pub fn is_multiple_choice(&self) -> bool {
        !self.options.is_empty()
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.question.trim().is_empty() {
            return Err(mismatch(&self.task_id, "empty question"));
        }
        if self.is_multiple_choice() {
            if !(2..=4).contains(&self.options.len()) {
                return Err(mismatch(&self.task_id, format!("{} options", self.options.len())));
            }
            match self.gold_option {
                Some(g) if g < self.options.len() => {}
                other => return Err(mismatch(&self.task_id, format!("gold option {other:?} out of range"))),
            }
            if !self.gold_answers.is_empty() {
                return Err(mismatch(&self.task_id, "multiple-choice task with free-form answers"));
            }
        } else if self.gold_answers.is_empty() || self.gold_option.is_some() {
            return Err(mismatch(
                &self.task_id,
                "free-form task needs answers and no gold option",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceChecksum {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub benchmark: SourceBenchmark,
    pub documents: usize,
    pub tasks: usize,
    pub sources: Vec<SourceChecksum>,
    /// Documents dropped during loading (e.g. empty story files).
    #[serde(default)]
    pub excluded: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub manifest: CorpusManifest,
    pub documents: Vec<Document>,
    pub tasks: Vec<QATask>,
}

impl Corpus {
    pub fn new(
        benchmark: SourceBenchmark,
        documents: Vec<Document>,
        tasks: Vec<QATask>,
        sources: Vec<SourceChecksum>,
        excluded: Vec<String>,
    ) -> Result<Self, BenchError> {
        let corpus = Self {
            manifest: CorpusManifest {
                benchmark,
                documents: documents.len(),
                tasks: tasks.len(),
                sources,
                excluded,
            },
            documents,
            tasks,
        };
        corpus.validate()?;
        Ok(corpus)
    }

    /// Checks counts, id uniqueness, task shape and document references.
    pub fn validate(&self) -> Result<(), BenchError> {
        if self.manifest.documents != self.documents.len() || self.manifest.tasks != self.tasks.len() {
            return Err(mismatch("manifest", "counts disagree with loaded records"));
        }
        let mut doc_ids = HashSet::new();
        for d in &self.documents {
            if !doc_ids.insert(d.doc_id.as_str()) {
                return Err(mismatch(&d.doc_id, "duplicate document id"));
            }
        }
        let mut task_ids = HashSet::new();
        for t in &self.tasks {
            if !task_ids.insert(t.task_id.as_str()) {
                return Err(mismatch(&t.task_id, "duplicate task id"));
            }
            if !doc_ids.contains(t.doc_id.as_str()) {
                return Err(mismatch(&t.task_id, format!("unknown document {}", t.doc_id)));
            }
            t.validate()?;
        }
        Ok(())
    }

    pub fn document_map(&self) -> HashMap<&str, &Document> {
        self.documents.iter().map(|d| (d.doc_id.as_str(), d)).collect()
    }

    /// Keeps only `tasks` and the documents they reference.
    pub fn restrict(&self, tasks: Vec<QATask>) -> Result<Self, BenchError> {
        let wanted: HashSet<&str> = tasks.iter().map(|t| t.doc_id.as_str()).collect();
        let documents = self
            .documents
            .iter()
            .filter(|d| wanted.contains(d.doc_id.as_str()))
            .cloned()
            .collect();
        Self::new(
            self.manifest.benchmark,
            documents,
            tasks,
            self.manifest.sources.clone(),
            self.manifest.excluded.clone(),
        )
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum CorpusLine {
    Header {
        schema_version: u32,
        #[serde(flatten)]
        manifest: CorpusManifest,
    },
    Document(Document),
    Task(QATask),
}

/// Writes the corpus as JSON lines: one header, then documents, then tasks.
pub fn write_corpus(corpus: &Corpus, path: &Path) -> Result<(), BenchError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let tmp = tempfile::NamedTempFile::new_in(path.parent().unwrap_or(Path::new(".")))?;
    {
        let mut out = BufWriter::new(tmp.as_file());
        let header = CorpusLine::Header {
            schema_version: CORPUS_SCHEMA_VERSION,
            manifest: corpus.manifest.clone(),
        };
        serde_json::to_writer(&mut out, &header)?;
        out.write_all(b"\n")?;
        for d in &corpus.documents {
            serde_json::to_writer(&mut out, &CorpusLine::Document(d.clone()))?;
            out.write_all(b"\n")?;
        }
        for t in &corpus.tasks {
            serde_json::to_writer(&mut out, &CorpusLine::Task(t.clone()))?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
    }
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn read_corpus(path: &Path) -> Result<Corpus, BenchError> {
    if !path.exists() {
        return Err(BenchError::MissingFiles(vec![path.to_path_buf()]));
    }
    let reader = BufReader::new(fs::File::open(path)?);
    let mut manifest = None;
    let mut documents = Vec::new();
    let mut tasks = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: CorpusLine = serde_json::from_str(&line)
            .map_err(|e| mismatch(format!("{} line {}", path.display(), i + 1), e.to_string()))?;
        match record {
            CorpusLine::Header {
                schema_version,
                manifest: m,
            } => {
                if schema_version != CORPUS_SCHEMA_VERSION {
                    return Err(mismatch(
                        path.display().to_string(),
                        format!("schema version {schema_version}"),
                    ));
                }
                manifest = Some(m);
            }
            CorpusLine::Document(d) => documents.push(d),
            CorpusLine::Task(t) => tasks.push(t),
        }
    }
    let manifest = manifest.ok_or_else(|| mismatch(path.display().to_string(), "no header record"))?;
    let corpus = Corpus {
        manifest,
        documents,
        tasks,
    };
    corpus.validate()?;
    Ok(corpus)
}

pub fn sha256_file(path: &Path) -> Result<String, BenchError> {
    let mut hasher = Sha256::new();
    let mut file = fs::File::open(path)?;
    std::io::copy(&mut file, &mut hasher)?;
    Ok(hex::encode(hasher.finalize()))
}

/// `n` tasks chosen by a seeded hash of their ids, returned in their
/// original order. Asking for more tasks than exist returns them all.
pub fn sample_subset(tasks: &[QATask], n: usize, seed: u64) -> Vec<QATask> {
    let mut keyed: Vec<(String, usize)> = tasks
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let mut h = Sha256::new();
            h.update(seed.to_le_bytes());
            h.update(t.task_id.as_bytes());
            (hex::encode(h.finalize()), i)
        })
        .collect();
    keyed.sort();
    let mut picked: Vec<usize> = keyed.into_iter().take(n).map(|(_, i)| i).collect();
    picked.sort_unstable();
    picked.into_iter().map(|i| tasks[i].clone()).collect()
}
