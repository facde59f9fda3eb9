//! Runs one experiment: preprocessing artifacts, context construction,
//! reader calls and scoring for every budget and run.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::PathBuf;
use std::sync::Arc;

use ragbench_core::bench::{generate_synthetic_corpus, read_corpus, sample_subset, Corpus, QATask, SyntheticCorpus};
use ragbench_core::eval::{aggregate_runs, MetricScores, METRIC_NAMES};
use ragbench_core::gateway::prompts::{render_gen_prompt, render_mc_prompt, TEMPLATE_VERSION};
use ragbench_core::gateway::{parse_mc_answer, GatewayError, ModelHandle, QA_MAX_OUTPUT_TOKENS};
use ragbench_core::pipelines::{
    dos_from_ranked, embed_tree_query, full_document_context, rank_for_query, rank_tree_nodes, raptor_build_tree,
    raptor_from_ranked, readagent_answer_context, readagent_gist, readagent_paginate, vanilla_from_ranked,
    ContextBundle, LookupConfig, PageSet, PipelineError, RankedNode, Strategy, SummaryTree,
};
use ragbench_core::retrieval::{Embedder, PassageIndex, RankedPassage};
use ragbench_core::text::{CounterRegistry, SegmentedDocument, SourceBenchmark, TokenCounter};
use rayon::prelude::*;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::providers::{build_embedder, build_gateway, build_reader};
use crate::record::{
    BudgetRow, QuestionScore, ResultRecord, RunResult, SkipKind, SkippedQuestion, RESULT_SCHEMA, RESULT_SCHEMA_VERSION,
};
use crate::CliError;

/// The corpus an experiment runs on, after subsetting.
pub struct Inputs {
    pub corpus: Corpus,
    pub synthetic: Option<SyntheticCorpus>,
}

pub fn load_inputs(config: &ExperimentConfig) -> Result<Inputs, CliError> {
    let (corpus, synthetic) = if config.benchmark == SourceBenchmark::Synthetic {
        let s = generate_synthetic_corpus(config.synthetic.seed, &config.synthetic.corpus)?;
        (s.corpus.clone(), Some(s))
    } else {
        let path = config
            .corpus
            .as_ref()
            .ok_or_else(|| CliError::Config("`corpus` is required".into()))?;
        (read_corpus(path)?, None)
    };
    let corpus = match config.subset {
        Some(spec) => corpus.restrict(sample_subset(&corpus.tasks, spec.n, spec.seed))?,
        None => corpus,
    };
    Ok(Inputs { corpus, synthetic })
}

/// Reader handle, embedder and token counter shared by one experiment.
#[derive(Clone)]
pub struct Providers {
    pub reader: ModelHandle,
    pub embedder: Arc<dyn Embedder>,
    pub counter: Arc<dyn TokenCounter>,
}

pub fn build_providers(config: &ExperimentConfig, inputs: &Inputs) -> Result<Providers, CliError> {
    let reader = build_gateway(config, build_reader(config, inputs.synthetic.as_ref())?)?;
    let counter = CounterRegistry::default()
        .get(&config.token_counter)
        .map_err(|e| CliError::Config(e.to_string()))?;
    Ok(Providers {
        reader,
        embedder: build_embedder(config)?,
        counter,
    })
}

/// Per-document preprocessing output.
pub struct DocArtifacts {
    pub seg: SegmentedDocument,
    pub index: PassageIndex,
    pub tree: Option<SummaryTree>,
    pub pages: Option<PageSet>,
}

fn artifact_key(parts: serde_json::Value) -> String {
    hex::encode(&Sha256::digest(parts.to_string().as_bytes())[..8])
}

fn artifact_path(config: &ExperimentConfig, kind: &str, doc_id: &str, key: &str) -> PathBuf {
    let safe: String = doc_id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect();
    config.artifact_dir().join(kind).join(format!("{safe}-{key}.json"))
}

fn build_doc(
    config: &ExperimentConfig,
    providers: &Providers,
    doc: &ragbench_core::text::Document,
    strategies: &[Strategy],
) -> Result<DocArtifacts, PipelineError> {
    let counter = providers.counter.as_ref();
    let seg = SegmentedDocument::build(doc.clone(), counter, config.max_passage_tokens)?;
    let index = PassageIndex::build(&doc.doc_id, &seg.passages, providers.embedder.as_ref())?;
    let doc_hash = hex::encode(Sha256::digest(doc.text.as_bytes()));
    let common = json!({
        "doc": doc_hash,
        "embedder": providers.embedder.id(),
        "reader": providers.reader.gateway().provider_id(),
        "model": providers.reader.model_id(),
        "counter": counter.name(),
        "max_passage_tokens": config.max_passage_tokens,
        "templates": TEMPLATE_VERSION,
    });

    let tree = if strategies.contains(&Strategy::Raptor) {
        let mut raptor = serde_json::to_value(&config.raptor)?;
        raptor.as_object_mut().map(|o| o.remove("max_in_flight"));
        let key = artifact_key(json!({ "common": common, "raptor": raptor }));
        let path = artifact_path(config, "raptor", &doc.doc_id, &key);
        let cached = SummaryTree::load(&path).ok().filter(|t| t.validate(&index).is_ok());
        Some(match cached {
            Some(t) => t,
            None => {
                let t = raptor_build_tree(
                    &index,
                    providers.embedder.as_ref(),
                    &providers.reader,
                    counter,
                    &config.raptor,
                )?;
                std::fs::create_dir_all(path.parent().expect("artifact dir"))?;
                t.save(&path)?;
                t
            }
        })
    } else {
        None
    };

    let pages = if strategies.contains(&Strategy::ReadAgent) {
        let key = artifact_key(json!({ "common": common, "pagination": config.readagent.pagination }));
        let path = artifact_path(config, "readagent", &doc.doc_id, &key);
        let cached = PageSet::load(&path)
            .ok()
            .filter(|p| p.validate(&seg.sentences).is_ok() && p.gists.len() == p.pages.len());
        Some(match cached {
            Some(p) => p,
            None => {
                let paged = readagent_paginate(
                    &seg.doc,
                    &seg.sentences,
                    &providers.reader,
                    counter,
                    &config.readagent.pagination,
                )?;
                let p = readagent_gist(paged, &providers.reader, counter)?;
                std::fs::create_dir_all(path.parent().expect("artifact dir"))?;
                p.save(&path)?;
                p
            }
        })
    } else {
        None
    };

    Ok(DocArtifacts {
        seg,
        index,
        tree,
        pages,
    })
}

/// Builds (or loads) artifacts for every document referenced by a task.
pub fn build_artifacts(
    config: &ExperimentConfig,
    providers: &Providers,
    corpus: &Corpus,
    strategies: &[Strategy],
) -> HashMap<String, Result<DocArtifacts, PipelineError>> {
    let wanted: HashSet<&str> = corpus.tasks.iter().map(|t| t.doc_id.as_str()).collect();
    corpus
        .documents
        .par_iter()
        .filter(|d| wanted.contains(d.doc_id.as_str()))
        .map(|d| (d.doc_id.clone(), build_doc(config, providers, d, strategies)))
        .collect()
}

fn skip_kind(e: &PipelineError) -> SkipKind {
    match e {
        PipelineError::ContextOverflow { .. } | PipelineError::Gateway(GatewayError::ContextOverflow(_)) => {
            SkipKind::ContextOverflow
        }
        PipelineError::Gateway(_) | PipelineError::LmFailure(_) | PipelineError::SummarizerFailure(_) => {
            SkipKind::ProviderFailure
        }
        PipelineError::Retrieval(ragbench_core::retrieval::RetrievalError::ProviderUnavailable(_)) => {
            SkipKind::ProviderFailure
        }
        _ => SkipKind::Pipeline,
    }
}

enum Ranked {
    Passages(Vec<RankedPassage>),
    Nodes(Vec<RankedNode>),
    Unranked,
}

struct Skip(SkipKind, String);

impl From<PipelineError> for Skip {
    fn from(e: PipelineError) -> Self {
        Skip(skip_kind(&e), e.to_string())
    }
}

fn retrieval_query(task: &QATask, with_options: bool) -> String {
    if with_options && task.is_multiple_choice() {
        format!("{}\n{}", task.question, task.options.join("\n"))
    } else {
        task.question.clone()
    }
}

fn rank(
    config: &ExperimentConfig,
    providers: &Providers,
    art: &DocArtifacts,
    query: &str,
) -> Result<Ranked, PipelineError> {
    let embedder = providers.embedder.as_ref();
    Ok(match config.strategy {
        Strategy::Vanilla | Strategy::Dos => Ranked::Passages(rank_for_query(query, &art.index, embedder)?),
        Strategy::Raptor => {
            let tree = art.tree.as_ref().expect("tree built for raptor");
            Ranked::Nodes(rank_tree_nodes(&embed_tree_query(query, tree, embedder)?, tree)?)
        }
        Strategy::FullDoc | Strategy::ReadAgent => Ranked::Unranked,
    })
}

fn context(
    config: &ExperimentConfig,
    providers: &Providers,
    art: &DocArtifacts,
    ranked: &Ranked,
    query: &str,
    budget: Option<usize>,
    run: usize,
) -> Result<ContextBundle, PipelineError> {
    let b = budget.unwrap_or(0);
    Ok(match (config.strategy, ranked) {
        (Strategy::Vanilla, Ranked::Passages(r)) => vanilla_from_ranked(r, b, config.selection),
        (Strategy::Dos, Ranked::Passages(r)) => dos_from_ranked(r, b, config.selection),
        (Strategy::Raptor, Ranked::Nodes(r)) => raptor_from_ranked(r, b, config.selection),
        (Strategy::FullDoc, _) => full_document_context(&art.seg.doc, providers.counter.as_ref())?,
        (Strategy::ReadAgent, _) => {
            let lookup = LookupConfig {
                min_pages: config.readagent.min_pages,
                max_pages: config.readagent.max_pages,
                context_limit: None,
            };
            let pages = art.pages.as_ref().expect("pages built for readagent");
            readagent_answer_context(
                query,
                pages,
                &providers.reader.for_run(run),
                providers.embedder.as_ref(),
                &lookup,
            )?
        }
        _ => unreachable!("ranking matches strategy"),
    })
}

fn answer(
    config: &ExperimentConfig,
    providers: &Providers,
    task: &QATask,
    bundle: &ContextBundle,
    run: usize,
) -> Result<QuestionScore, Skip> {
    let prompt = if task.is_multiple_choice() {
        render_mc_prompt(bundle, &task.question, &task.options)
    } else {
        render_gen_prompt(bundle, &task.question)
    }
    .map_err(|e| Skip(SkipKind::InvalidPrompt, e.to_string()))?;
    let prompt_tokens = providers.counter.count(&prompt);
    if let Some(limit) = config.context_limit {
        if prompt_tokens > limit {
            return Err(Skip(
                SkipKind::ContextOverflow,
                format!("prompt of {prompt_tokens} tokens exceeds the reader limit of {limit}"),
            ));
        }
    }
    let response = providers
        .reader
        .for_run(run)
        .complete(&prompt, QA_MAX_OUTPUT_TOKENS)
        .map_err(|e| match e {
            GatewayError::ContextOverflow(m) => Skip(SkipKind::ContextOverflow, m),
            other => Skip(SkipKind::ProviderFailure, other.to_string()),
        })?;
    let (scores, predicted_option) = if task.is_multiple_choice() {
        let predicted = parse_mc_answer(&response.text, task.options.len()).ok().map(|k| k - 1);
        (
            MetricScores::multiple_choice(predicted.is_some() && predicted == task.gold_option),
            predicted,
        )
    } else {
        let scores = MetricScores::generation(&response.text, &task.gold_answers)
            .map_err(|e| Skip(SkipKind::Pipeline, e.to_string()))?;
        (scores, None)
    };
    Ok(QuestionScore {
        task_id: task.task_id.clone(),
        scores,
        prompt_tokens,
        context_tokens: bundle.total_tokens,
        predicted_option,
        answer: response.text,
    })
}

/// One task's outcome at every row: all runs scored, or a skip.
fn evaluate_task(
    config: &ExperimentConfig,
    providers: &Providers,
    art: Result<&DocArtifacts, &PipelineError>,
    task: &QATask,
    rows: &[Option<usize>],
) -> Vec<Result<Vec<QuestionScore>, Skip>> {
    let art = match art {
        Ok(a) => a,
        Err(e) => {
            let kind = skip_kind(e);
            return rows
                .iter()
                .map(|_| Err(Skip(kind, format!("preprocessing failed: {e}"))))
                .collect();
        }
    };
    let query = retrieval_query(task, config.query_with_options);
    let ranked = match rank(config, providers, art, &query) {
        Ok(r) => r,
        Err(e) => {
            let kind = skip_kind(&e);
            let msg = e.to_string();
            return rows.iter().map(|_| Err(Skip(kind, msg.clone()))).collect();
        }
    };
    rows.iter()
        .map(|&budget| {
            (0..config.n_runs)
                .map(|run| {
                    let bundle = context(config, providers, art, &ranked, &query, budget, run)?;
                    answer(config, providers, task, &bundle, run)
                })
                .collect()
        })
        .collect()
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn run_metrics(questions: &[QuestionScore]) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    for name in METRIC_NAMES {
        let values: Vec<f64> = questions.iter().filter_map(|q| q.scores.get(name)).collect();
        if !values.is_empty() {
            out.insert(name.to_string(), mean(values.into_iter()));
        }
    }
    out
}

/// Runs the experiment with already-built inputs and providers.
pub fn run_with(config: &ExperimentConfig, inputs: &Inputs, providers: &Providers) -> Result<ResultRecord, CliError> {
    config.validate()?;
    let rows: Vec<Option<usize>> = if config.strategy.is_budgeted() {
        config.budgets_or_default().into_iter().map(Some).collect()
    } else {
        vec![None]
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.concurrency)
        .build()
        .map_err(|e| CliError::Config(e.to_string()))?;
    let corpus = &inputs.corpus;

    let outcomes: Vec<Vec<Result<Vec<QuestionScore>, Skip>>> = pool.install(|| {
        let artifacts = build_artifacts(config, providers, corpus, &[config.strategy]);
        corpus
            .tasks
            .par_iter()
            .map(|task| {
                let art = artifacts
                    .get(&task.doc_id)
                    .expect("artifacts for every task document")
                    .as_ref();
                evaluate_task(config, providers, art, task, &rows)
            })
            .collect()
    });

    let mut skipped = Vec::new();
    let mut budget_rows = Vec::new();
    for (r, &budget) in rows.iter().enumerate() {
        let mut per_run: Vec<Vec<QuestionScore>> = vec![Vec::new(); config.n_runs];
        for (task, outcome) in corpus.tasks.iter().zip(&outcomes) {
            match &outcome[r] {
                Ok(scores) => {
                    for (run, q) in scores.iter().enumerate() {
                        per_run[run].push(q.clone());
                    }
                }
                Err(Skip(kind, reason)) => skipped.push(SkippedQuestion {
                    task_id: task.task_id.clone(),
                    budget,
                    kind: *kind,
                    reason: reason.clone(),
                }),
            }
        }
        let runs: Vec<RunResult> = per_run
            .into_iter()
            .enumerate()
            .map(|(run, questions)| RunResult {
                run,
                metrics: run_metrics(&questions),
                questions,
            })
            .collect();
        let mut aggregate = BTreeMap::new();
        for name in METRIC_NAMES {
            let values: Vec<f64> = runs.iter().filter_map(|r| r.metrics.get(name).copied()).collect();
            if let Ok(stats) = aggregate_runs(&values) {
                aggregate.insert(name.to_string(), stats);
            }
        }
        let all = || runs.iter().flat_map(|r| r.questions.iter());
        budget_rows.push(BudgetRow {
            budget,
            n_scored: runs.first().map_or(0, |r| r.questions.len()),
            avg_prompt_tokens: mean(all().map(|q| q.prompt_tokens as f64)),
            avg_context_tokens: mean(all().map(|q| q.context_tokens as f64)),
            aggregate,
            runs,
        });
    }
    let t = providers.reader.gateway().telemetry();
    log::info!(
        "{}: {} provider calls, {} cache hits, {} retries",
        config.strategy.as_str(),
        t.provider_calls,
        t.cache_hits,
        t.retries
    );

    let mut resolved = config.clone();
    resolved.budgets = config.budgets_or_default();
    Ok(ResultRecord {
        schema: RESULT_SCHEMA.into(),
        schema_version: RESULT_SCHEMA_VERSION,
        fingerprint: config.fingerprint(),
        strategy: config.strategy,
        config: resolved,
        task_ids: corpus.tasks.iter().map(|t| t.task_id.clone()).collect(),
        rows: budget_rows,
        skipped,
    })
}

/// Builds preprocessing artifacts without calling the reader for answers.
/// Returns the number of documents built and the failures.
pub fn build_experiment_artifacts(config: &ExperimentConfig) -> Result<(usize, Vec<(String, String)>), CliError> {
    config.validate()?;
    let inputs = load_inputs(config)?;
    let providers = build_providers(config, &inputs)?;
    let built = build_artifacts(config, &providers, &inputs.corpus, &[config.strategy]);
    let mut failures: Vec<(String, String)> = built
        .iter()
        .filter_map(|(id, r)| r.as_ref().err().map(|e| (id.clone(), e.to_string())))
        .collect();
    failures.sort();
    Ok((built.len() - failures.len(), failures))
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ResultRecord, CliError> {
    config.validate()?;
    let inputs = load_inputs(config)?;
    let providers = build_providers(config, &inputs)?;
    let record = run_with(config, &inputs, &providers)?;
    if let Some(out) = &config.output {
        record.save(out)?;
    }
    Ok(record)
}
