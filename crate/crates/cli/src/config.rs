//! Experiment configuration: TOML with `${VAR}` environment interpolation.

use std::path::{Path, PathBuf};

use once_cell::sync::Lazy;
use ragbench_core::bench::SyntheticConfig;
use ragbench_core::pipelines::{PaginationConfig, RaptorConfig, Strategy};
use ragbench_core::retrieval::SelectionMode;
use ragbench_core::text::{SourceBenchmark, DEFAULT_COUNTER, DEFAULT_MAX_PASSAGE_TOKENS};
use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const QUALITY_BUDGETS: [usize; 6] = [500, 1000, 1500, 2000, 4000, 8000];
pub const LONG_BUDGETS: [usize; 6] = [1500, 5000, 10_000, 20_000, 30_000, 40_000];
pub const SYNTHETIC_BUDGETS: [usize; 4] = [500, 1000, 2000, 4000];

pub fn default_budgets(benchmark: SourceBenchmark) -> Vec<usize> {
    match benchmark {
        SourceBenchmark::Quality => QUALITY_BUDGETS.to_vec(),
        SourceBenchmark::InfiniteBench | SourceBenchmark::NarrativeQa => LONG_BUDGETS.to_vec(),
        SourceBenchmark::Synthetic => SYNTHETIC_BUDGETS.to_vec(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReaderKind {
    /// OpenAI-compatible chat completions endpoint.
    Openai,
    /// Rule file of canned responses.
    Scripted,
    ExtractiveMock,
    SyntheticOracle,
    SyntheticOracleOrdered,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReaderConfig {
    pub provider: ReaderKind,
    #[serde(default = "default_model")]
    pub model: String,
    #[serde(default)]
    pub base_url: Option<String>,
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default)]
    pub script: Option<PathBuf>,
    /// Overrides the provider's own determinism declaration.
    #[serde(default)]
    pub deterministic: Option<bool>,
    #[serde(default)]
    pub requests_per_second: Option<f64>,
    #[serde(default)]
    pub max_in_flight: Option<usize>,
    #[serde(default)]
    pub timeout_secs: Option<u64>,
}

fn default_model() -> String {
    "gpt-4o-mini".into()
}

impl Default for ReaderConfig {
    fn default() -> Self {
        Self {
            provider: ReaderKind::ExtractiveMock,
            model: default_model(),
            base_url: None,
            api_key_env: None,
            script: None,
            deterministic: None,
            requests_per_second: None,
            max_in_flight: None,
            timeout_secs: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbedderKind {
    Mock,
    Openai,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbedderConfig {
    pub provider: EmbedderKind,
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default)]
    pub query_prefix: String,
    #[serde(default)]
    pub document_prefix: String,
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        Self {
            provider: EmbedderKind::Mock,
            model: None,
            endpoint: None,
            api_key_env: None,
            query_prefix: String::new(),
            document_prefix: String::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsetSpec {
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct SyntheticSection {
    #[serde(default)]
    pub seed: u64,
    #[serde(flatten)]
    pub corpus: SyntheticConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReadAgentSection {
    #[serde(flatten)]
    pub pagination: PaginationConfig,
    pub min_pages: usize,
    pub max_pages: usize,
}

impl Default for ReadAgentSection {
    fn default() -> Self {
        Self {
            pagination: PaginationConfig::default(),
            min_pages: 1,
            max_pages: 6,
        }
    }
}

fn default_runs() -> usize {
    5
}

fn default_concurrency() -> usize {
    8
}

fn default_passage_tokens() -> usize {
    DEFAULT_MAX_PASSAGE_TOKENS
}

fn default_counter() -> String {
    DEFAULT_COUNTER.into()
}

fn default_work_dir() -> PathBuf {
    PathBuf::from(".ragbench")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    pub benchmark: SourceBenchmark,
    /// Normalized corpus file written by `prepare`. Unused for synthetic runs.
    #[serde(default)]
    pub corpus: Option<PathBuf>,
    /// Upstream benchmark files read by `prepare`.
    #[serde(default)]
    pub data_dir: Option<PathBuf>,
    pub strategy: Strategy,
    /// Empty means the benchmark's default grid.
    #[serde(default)]
    pub budgets: Vec<usize>,
    #[serde(default = "default_runs")]
    pub n_runs: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
    #[serde(default)]
    pub subset: Option<SubsetSpec>,
    #[serde(default)]
    pub selection: SelectionMode,
    #[serde(default = "default_passage_tokens")]
    pub max_passage_tokens: usize,
    #[serde(default = "default_counter")]
    pub token_counter: String,
    /// Reader context limit in prompt tokens; longer prompts are skipped.
    #[serde(default)]
    pub context_limit: Option<usize>,
    /// Append the answer options to the retrieval query.
    #[serde(default)]
    pub query_with_options: bool,
    #[serde(default)]
    pub reader: ReaderConfig,
    #[serde(default)]
    pub embedder: EmbedderConfig,
    #[serde(default)]
    pub synthetic: SyntheticSection,
    #[serde(default)]
    pub raptor: RaptorConfig,
    #[serde(default)]
    pub readagent: ReadAgentSection,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Caches and preprocessing artifacts.
    #[serde(default = "default_work_dir")]
    pub work_dir: PathBuf,
}

static ENV_REF: Lazy<Regex> = Lazy::new(|| Regex::new(r"\$\{([A-Za-z_][A-Za-z0-9_]*)\}").unwrap());

/// Replaces `${NAME}` with the value of environment variable `NAME`.
pub fn interpolate_env(raw: &str, lookup: impl Fn(&str) -> Option<String>) -> Result<String, CliError> {
    let mut missing = Vec::new();
    let out = ENV_REF.replace_all(raw, |caps: &regex::Captures| match lookup(&caps[1]) {
        Some(v) => v,
        None => {
            missing.push(caps[1].to_string());
            String::new()
        }
    });
    if !missing.is_empty() {
        return Err(CliError::Config(format!(
            "unset environment variables: {}",
            missing.join(", ")
        )));
    }
    Ok(out.into_owned())
}

impl ExperimentConfig {
    /// A synthetic experiment with mock providers, mostly for tests.
    pub fn synthetic(strategy: Strategy, work_dir: impl Into<PathBuf>) -> Self {
        Self {
            name: String::new(),
            benchmark: SourceBenchmark::Synthetic,
            corpus: None,
            data_dir: None,
            strategy,
            budgets: vec![],
            n_runs: default_runs(),
            seed: 0,
            concurrency: default_concurrency(),
            subset: None,
            selection: SelectionMode::default(),
            max_passage_tokens: default_passage_tokens(),
            token_counter: default_counter(),
            context_limit: None,
            query_with_options: false,
            reader: ReaderConfig {
                provider: ReaderKind::SyntheticOracle,
                ..ReaderConfig::default()
            },
            embedder: EmbedderConfig::default(),
            synthetic: SyntheticSection::default(),
            raptor: RaptorConfig::default(),
            readagent: ReadAgentSection::default(),
            output: None,
            work_dir: work_dir.into(),
        }
    }

    pub fn from_toml_str(raw: &str) -> Result<Self, CliError> {
        let text = interpolate_env(raw, |k| std::env::var(k).ok())?;
        let mut config: Self = toml::from_str(&text).map_err(|e| CliError::Config(e.to_string()))?;
        if config.budgets.is_empty() {
            config.budgets = default_budgets(config.benchmark);
        }
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let raw = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&raw)
    }

    pub fn budgets_or_default(&self) -> Vec<usize> {
        if self.budgets.is_empty() {
            default_budgets(self.benchmark)
        } else {
            self.budgets.clone()
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Config(m.to_string()));
        if self.n_runs == 0 {
            return bad("n_runs must be at least 1");
        }
        if self.concurrency == 0 {
            return bad("concurrency must be at least 1");
        }
        if self.budgets.contains(&0) {
            return bad("budgets must be positive");
        }
        if self.max_passage_tokens == 0 {
            return bad("max_passage_tokens must be positive");
        }
        if self.readagent.min_pages == 0 || self.readagent.max_pages < self.readagent.min_pages {
            return bad("readagent page range must satisfy 1 <= min_pages <= max_pages");
        }
        if self.subset.is_some_and(|s| s.n == 0) {
            return bad("subset size must be positive");
        }
        let synthetic = self.benchmark == SourceBenchmark::Synthetic;
        if matches!(
            self.reader.provider,
            ReaderKind::SyntheticOracle | ReaderKind::SyntheticOracleOrdered
        ) && !synthetic
        {
            return bad("the synthetic oracle reader only works on the synthetic benchmark");
        }
        if self.reader.provider == ReaderKind::Scripted && self.reader.script.is_none() {
            return bad("scripted reader needs `script`");
        }
        if !synthetic && self.corpus.is_none() {
            return bad("`corpus` is required for non-synthetic benchmarks");
        }
        Ok(())
    }

    /// Hash of the fields that can change results. Output locations, cache
    /// directories, parallelism, rate limits and credentials are excluded.
    pub fn fingerprint(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        let obj = v.as_object_mut().expect("object");
        for key in ["name", "output", "work_dir", "concurrency", "data_dir"] {
            obj.remove(key);
        }
        obj.insert("budgets".into(), serde_json::json!(self.budgets_or_default()));
        if let Some(reader) = obj.get_mut("reader").and_then(|r| r.as_object_mut()) {
            for key in ["api_key_env", "requests_per_second", "max_in_flight", "timeout_secs"] {
                reader.remove(key);
            }
        }
        if let Some(e) = obj.get_mut("embedder").and_then(|r| r.as_object_mut()) {
            e.remove("api_key_env");
        }
        if let Some(r) = obj.get_mut("raptor").and_then(|r| r.as_object_mut()) {
            r.remove("max_in_flight");
        }
        let canonical = serde_json::to_vec(&v).expect("value serializes");
        hex::encode(&Sha256::digest(&canonical)[..8])
    }

    pub fn lm_cache_dir(&self) -> PathBuf {
        self.work_dir.join("lm")
    }

    pub fn embedding_cache_dir(&self) -> PathBuf {
        self.work_dir.join("embeddings")
    }

    pub fn artifact_dir(&self) -> PathBuf {
        self.work_dir.join("artifacts")
    }
}

/// A grid of strategies and budgets over one base experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub output_dir: PathBuf,
    pub strategies: Vec<Strategy>,
    #[serde(default)]
    pub budgets: Vec<usize>,
    pub base: ExperimentConfig,
}

impl SweepConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let raw = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let text = interpolate_env(&raw, |k| std::env::var(k).ok())?;
        toml::from_str(&text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// One experiment per (strategy, budget), each writing its own file.
    pub fn expand(&self) -> Vec<ExperimentConfig> {
        let budgets = if self.budgets.is_empty() {
            self.base.budgets_or_default()
        } else {
            self.budgets.clone()
        };
        let mut out = Vec::new();
        for &strategy in &self.strategies {
            for &budget in &budgets {
                let mut c = self.base.clone();
                c.strategy = strategy;
                c.budgets = vec![budget];
                c.output = Some(self.output_dir.join(format!("{}-{budget}.json", strategy.as_str())));
                out.push(c);
            }
        }
        out
    }
}
