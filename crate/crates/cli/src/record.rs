use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use ragbench_core::eval::{MetricScores, RunAggregate};
use ragbench_core::pipelines::Strategy;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::CliError;

pub const RESULT_SCHEMA: &str = "ragbench.result";
pub const RESULT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionScore {
    pub task_id: String,
    pub scores: MetricScores,
    pub prompt_tokens: usize,
    pub context_tokens: usize,
    /// 0-based option the reader picked, when one could be parsed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predicted_option: Option<usize>,
    pub answer: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub run: usize,
    pub questions: Vec<QuestionScore>,
    /// Metric name to its mean over the scored questions.
    pub metrics: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetRow {
    /// `None` for strategies without a retrieval budget.
    pub budget: Option<usize>,
    pub n_scored: usize,
    pub avg_prompt_tokens: f64,
    pub avg_context_tokens: f64,
    pub aggregate: RunAggregate,
    pub runs: Vec<RunResult>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipKind {
    ContextOverflow,
    ProviderFailure,
    InvalidPrompt,
    Pipeline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedQuestion {
    pub task_id: String,
    pub budget: Option<usize>,
    pub kind: SkipKind,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub schema: String,
    pub schema_version: u32,
    pub fingerprint: String,
    pub strategy: Strategy,
    pub config: ExperimentConfig,
    pub task_ids: Vec<String>,
    pub rows: Vec<BudgetRow>,
    pub skipped: Vec<SkippedQuestion>,
}

impl ResultRecord {
    pub fn has_provider_failures(&self) -> bool {
        self.skipped.iter().any(|s| s.kind == SkipKind::ProviderFailure)
    }

    /// Every task is scored in every run of a row or skipped for that row,
    /// never both.
    pub fn check_accounting(&self) -> Result<(), String> {
        for row in &self.rows {
            let skipped: Vec<&str> = self
                .skipped
                .iter()
                .filter(|s| s.budget == row.budget)
                .map(|s| s.task_id.as_str())
                .collect();
            for run in &row.runs {
                let scored: Vec<&str> = run.questions.iter().map(|q| q.task_id.as_str()).collect();
                for id in &self.task_ids {
                    let n = scored.iter().filter(|s| *s == id).count() + skipped.iter().filter(|s| *s == id).count();
                    if n != 1 {
                        return Err(format!("task {id} accounted {n} times at budget {:?}", row.budget));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        let dir = path
            .parent()
            .filter(|d| !d.as_os_str().is_empty())
            .unwrap_or(Path::new("."));
        fs::create_dir_all(dir)?;
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        serde_json::to_writer(&mut tmp, self)?;
        tmp.write_all(b"\n")?;
        tmp.persist(path).map_err(|e| e.error)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let record: Self = serde_json::from_slice(&fs::read(path)?)?;
        if record.schema != RESULT_SCHEMA || record.schema_version != RESULT_SCHEMA_VERSION {
            return Err(CliError::Config(format!("{}: not a result record", path.display())));
        }
        Ok(record)
    }
}
