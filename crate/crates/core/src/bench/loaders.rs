//! Readers for the upstream benchmark distributions.
//!
//! | benchmark | files | document | question | answer |
//! |---|---|---|---|---|
//! | InfiniteBench En.MC | `longbook_choice_eng.jsonl` | `context` (grouped by content) | `input` | `answer[0]` matched against `options` |
//! | QuALITY | `QuALITY.v1.0.1.htmlstripped.dev` (jsonl) | `article` keyed by `article_id` | `questions[].question` | `questions[].gold_label` (1-based) |
//! | NarrativeQA | `documents.csv`, `qaps.csv`, `<stories>/<id>.content` | story file | `qaps.question` | `answer1`, `answer2` |

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::Deserialize;
use sha2::{Digest, Sha256};

use super::{mismatch, sha256_file, BenchError, Corpus, QATask, SourceChecksum};
use crate::text::{Document, SourceBenchmark};

pub const INFINITEBENCH_FILE: &str = "longbook_choice_eng.jsonl";
const QUALITY_DEV_FILE: &str = "QuALITY.v1.0.1.htmlstripped.dev";

fn checksum(root: &Path, file: &Path) -> Result<SourceChecksum, BenchError> {
    let rel = file.strip_prefix(root).unwrap_or(file);
    Ok(SourceChecksum {
        path: rel.display().to_string(),
        sha256: sha256_file(file)?,
    })
}

fn resolve_file(path: &Path, default_name: &str) -> Result<(PathBuf, PathBuf), BenchError> {
    if path.is_file() {
        let root = path.parent().unwrap_or(Path::new("")).to_path_buf();
        return Ok((root, path.to_path_buf()));
    }
    let file = path.join(default_name);
    if file.is_file() {
        Ok((path.to_path_buf(), file))
    } else {
        Err(BenchError::MissingFiles(vec![file]))
    }
}

fn json_lines(file: &Path) -> Result<Vec<(usize, String)>, BenchError> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(fs::File::open(file)?).lines().enumerate() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push((i + 1, line));
        }
    }
    Ok(out)
}

#[derive(Deserialize)]
struct InfBenchRecord {
    id: serde_json::Value,
    context: String,
    input: String,
    answer: Vec<String>,
    options: Vec<String>,
}

fn option_index(answer: &str, options: &[String]) -> Option<usize> {
    if let Some(i) = options.iter().position(|o| o.trim() == answer.trim()) {
        return Some(i);
    }
    let letter = answer.trim();
    if letter.len() == 1 {
        let i = (letter.as_bytes()[0] as char).to_ascii_uppercase() as usize;
        let i = i.checked_sub('A' as usize)?;
        return (i < options.len()).then_some(i);
    }
    None
}

/// InfiniteBench long-book multiple choice. Documents are the distinct
/// `context` values in order of first appearance.
pub fn load_infinitebench_enmc(path: &Path) -> Result<Corpus, BenchError> {
    let (root, file) = resolve_file(path, INFINITEBENCH_FILE)?;
    let mut documents = Vec::new();
    let mut by_hash: HashMap<String, String> = HashMap::new();
    let mut tasks = Vec::new();
    for (line_no, line) in json_lines(&file)? {
        let where_ = format!("{} line {line_no}", file.display());
        let rec: InfBenchRecord = serde_json::from_str(&line).map_err(|e| mismatch(&where_, e.to_string()))?;
        let id = match &rec.id {
            serde_json::Value::String(s) => s.clone(),
            other => other.to_string(),
        };
        let hash = hex::encode(Sha256::digest(rec.context.as_bytes()));
        let doc_id = match by_hash.get(&hash) {
            Some(d) => d.clone(),
            None => {
                let doc_id = format!("infbench-{}", &hash[..12]);
                documents.push(Document::new(&doc_id, rec.context, SourceBenchmark::InfiniteBench)?);
                by_hash.insert(hash, doc_id.clone());
                doc_id
            }
        };
        let answer = rec.answer.first().ok_or_else(|| mismatch(&where_, "no answer"))?;
        let gold = option_index(answer, &rec.options)
            .ok_or_else(|| mismatch(&where_, format!("answer {answer:?} is not among the options")))?;
        let task = QATask {
            task_id: format!("infbench-{id}"),
            doc_id,
            question: rec.input,
            options: rec.options,
            gold_option: Some(gold),
            gold_answers: vec![],
            benchmark: SourceBenchmark::InfiniteBench,
        };
        task.validate().map_err(|e| mismatch(&where_, e.to_string()))?;
        tasks.push(task);
    }
    let sources = vec![checksum(&root, &file)?];
    Corpus::new(SourceBenchmark::InfiniteBench, documents, tasks, sources, vec![])
}

#[derive(Deserialize)]
struct QualityArticle {
    article_id: serde_json::Value,
    #[serde(default)]
    set_unique_id: Option<String>,
    article: String,
    questions: Vec<QualityQuestion>,
}

#[derive(Deserialize)]
struct QualityQuestion {
    question: String,
    options: Vec<String>,
    gold_label: usize,
    #[serde(default)]
    question_unique_id: Option<String>,
}

fn find_quality_dev(path: &Path) -> Result<(PathBuf, PathBuf), BenchError> {
    if path.is_file() {
        return resolve_file(path, QUALITY_DEV_FILE);
    }
    let exact = path.join(QUALITY_DEV_FILE);
    if exact.is_file() {
        return Ok((path.to_path_buf(), exact));
    }
    let mut candidates: Vec<PathBuf> = fs::read_dir(path)
        .map_err(|_| BenchError::MissingFiles(vec![exact.clone()]))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
            p.is_file() && name.contains("htmlstripped") && name.contains(".dev")
        })
        .collect();
    candidates.sort();
    match candidates.into_iter().next() {
        Some(file) => Ok((path.to_path_buf(), file)),
        None => Err(BenchError::MissingFiles(vec![exact])),
    }
}

/// QuALITY development split. Articles appearing in several question sets
/// become one document.
pub fn load_quality(path: &Path) -> Result<Corpus, BenchError> {
    let (root, file) = find_quality_dev(path)?;
    let mut documents = Vec::new();
    let mut seen_docs = HashSet::new();
    let mut seen_tasks = HashSet::new();
    let mut tasks = Vec::new();
    for (line_no, line) in json_lines(&file)? {
        let where_ = format!("{} line {line_no}", file.display());
        let rec: QualityArticle = serde_json::from_str(&line).map_err(|e| mismatch(&where_, e.to_string()))?;
        let article_id = match &rec.article_id {
            serde_json::Value::String(s) => s.clone(),
            other => other.to_string(),
        };
        let doc_id = format!("quality-{article_id}");
        if seen_docs.insert(doc_id.clone()) {
            documents.push(Document::new(&doc_id, rec.article, SourceBenchmark::Quality)?);
        }
        for (qi, q) in rec.questions.into_iter().enumerate() {
            let qid = q
                .question_unique_id
                .clone()
                .unwrap_or_else(|| format!("{}-{qi}", rec.set_unique_id.as_deref().unwrap_or(&article_id)));
            let task_id = format!("quality-{qid}");
            if !seen_tasks.insert(task_id.clone()) {
                return Err(mismatch(&where_, format!("duplicate question id {qid}")));
            }
            if q.gold_label == 0 || q.gold_label > q.options.len() {
                return Err(mismatch(&where_, format!("gold label {} for {qid}", q.gold_label)));
            }
            let task = QATask {
                task_id,
                doc_id: doc_id.clone(),
                question: q.question,
                options: q.options,
                gold_option: Some(q.gold_label - 1),
                gold_answers: vec![],
                benchmark: SourceBenchmark::Quality,
            };
            task.validate().map_err(|e| mismatch(&where_, e.to_string()))?;
            tasks.push(task);
        }
    }
    let sources = vec![checksum(&root, &file)?];
    Corpus::new(SourceBenchmark::Quality, documents, tasks, sources, vec![])
}

#[derive(Deserialize)]
struct NqaDocument {
    document_id: String,
    set: String,
}

#[derive(Deserialize)]
struct NqaQuestion {
    document_id: String,
    set: String,
    question: String,
    answer1: String,
    answer2: String,
}

fn story_path(root: &Path, doc_id: &str) -> Option<PathBuf> {
    ["tmp", "stories", "."]
        .iter()
        .map(|d| root.join(d).join(format!("{doc_id}.content")))
        .find(|p| p.is_file())
}

/// NarrativeQA test split. Stories whose files are empty are excluded
/// together with their questions and listed in the manifest.
pub fn load_narrativeqa(path: &Path) -> Result<Corpus, BenchError> {
    let docs_csv = path.join("documents.csv");
    let qaps_csv = path.join("qaps.csv");
    let missing: Vec<PathBuf> = [&docs_csv, &qaps_csv]
        .into_iter()
        .filter(|p| !p.is_file())
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(BenchError::MissingFiles(missing));
    }

    let mut test_ids = Vec::new();
    for row in csv::Reader::from_path(&docs_csv)?.deserialize() {
        let row: NqaDocument = row?;
        if row.set == "test" {
            test_ids.push(row.document_id);
        }
    }

    let mut documents = Vec::new();
    let mut excluded = Vec::new();
    let mut story_files = Vec::new();
    let mut missing = Vec::new();
    for id in &test_ids {
        let Some(file) = story_path(path, id) else {
            missing.push(path.join("tmp").join(format!("{id}.content")));
            continue;
        };
        let bytes = fs::read(&file)?;
        let text = String::from_utf8_lossy(&bytes).into_owned();
        if text.trim().is_empty() {
            log::warn!("excluding NarrativeQA document {id}: story file is empty");
            excluded.push(id.clone());
            continue;
        }
        documents.push(Document::new(format!("nqa-{id}"), text, SourceBenchmark::NarrativeQa)?);
        story_files.push(file);
    }
    if !missing.is_empty() {
        return Err(BenchError::MissingFiles(missing));
    }

    let kept: HashSet<String> = documents.iter().map(|d| d.doc_id.clone()).collect();
    let mut per_doc: HashMap<String, usize> = HashMap::new();
    let mut tasks = Vec::new();
    for (i, row) in csv::Reader::from_path(&qaps_csv)?.deserialize().enumerate() {
        let row: NqaQuestion = row.map_err(|e| mismatch(format!("qaps.csv row {}", i + 1), e.to_string()))?;
        let doc_id = format!("nqa-{}", row.document_id);
        if row.set != "test" || !kept.contains(&doc_id) {
            continue;
        }
        let k = per_doc.entry(doc_id.clone()).or_insert(0);
        let task_id = format!("{doc_id}-{k}");
        *k += 1;
        let gold_answers: Vec<String> = [row.answer1, row.answer2]
            .into_iter()
            .filter(|a| !a.trim().is_empty())
            .collect();
        let task = QATask {
            task_id,
            doc_id,
            question: row.question,
            options: vec![],
            gold_option: None,
            gold_answers,
            benchmark: SourceBenchmark::NarrativeQa,
        };
        task.validate()?;
        tasks.push(task);
    }

    let mut sources = vec![checksum(path, &docs_csv)?, checksum(path, &qaps_csv)?];
    for f in &story_files {
        sources.push(checksum(path, f)?);
    }
    Corpus::new(SourceBenchmark::NarrativeQa, documents, tasks, sources, excluded)
}
