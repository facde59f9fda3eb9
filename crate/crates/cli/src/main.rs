use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ragbench::config::{ExperimentConfig, SubsetSpec, SweepConfig};
use ragbench::record::ResultRecord;
use ragbench::report::{emit_report, ReportFormat};
use ragbench::runner::build_experiment_artifacts;
use ragbench::{record_exit_code, run_experiment, sweep, CliError, EXIT_OK, EXIT_PARTIAL, EXIT_PROVIDER};
use ragbench_core::bench::{
    generate_synthetic_corpus, load_infinitebench_enmc, load_narrativeqa, load_quality, write_corpus,
};
use ragbench_core::pipelines::Strategy;
use ragbench_core::retrieval::SelectionMode;
use ragbench_core::text::SourceBenchmark;

#[derive(Parser)]
#[command(
    name = "ragbench",
    version,
    about = "Long-context QA context-construction benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a raw benchmark release into a corpus file.
    Prepare {
        #[arg(long, value_parser = parse_enum::<SourceBenchmark>)]
        benchmark: SourceBenchmark,
        /// Raw data file or directory (ignored for synthetic).
        #[arg(long)]
        data_dir: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Synthetic generation seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Build preprocessing artifacts (passages, trees, pages) for a config.
    Build(RunArgs),
    /// Run one experiment.
    Run(RunArgs),
    /// Run a strategy-by-budget grid.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Reuse records whose fingerprint matches.
        #[arg(long)]
        resume: bool,
    },
    /// Render tables, CSV or plot series from result records.
    Report {
        /// Result files or directories of them.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, default_value = "table")]
        format: ReportFormat,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, value_parser = parse_enum::<Strategy>)]
    strategy: Option<Strategy>,
    #[arg(long, value_delimiter = ',')]
    budgets: Vec<usize>,
    #[arg(long)]
    n_runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    concurrency: Option<usize>,
    #[arg(long)]
    subset: Option<usize>,
    #[arg(long, value_parser = parse_enum::<SelectionMode>)]
    selection: Option<SelectionMode>,
    #[arg(long)]
    token_counter: Option<String>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    work_dir: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn parse_enum<T: serde::de::DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

impl RunArgs {
    fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        let mut c = ExperimentConfig::load(&self.config)?;
        if let Some(s) = self.strategy {
            c.strategy = s;
        }
        if !self.budgets.is_empty() {
            c.budgets = self.budgets.clone();
        }
        if let Some(n) = self.n_runs {
            c.n_runs = n;
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(n) = self.concurrency {
            c.concurrency = n;
        }
        if let Some(n) = self.subset {
            c.subset = Some(SubsetSpec { n, seed: c.seed });
        }
        if let Some(m) = self.selection {
            c.selection = m;
        }
        if let Some(t) = &self.token_counter {
            c.token_counter = t.clone();
        }
        if let Some(p) = &self.corpus {
            c.corpus = Some(p.clone());
        }
        if let Some(p) = &self.work_dir {
            c.work_dir = p.clone();
        }
        if let Some(p) = &self.output {
            c.output = Some(p.clone());
        }
        c.validate()?;
        Ok(c)
    }
}

fn report_inputs(paths: &[PathBuf]) -> Result<Vec<ResultRecord>, CliError> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "json"))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(p.clone());
        }
    }
    files.iter().map(|f| ResultRecord::load(f)).collect()
}

fn prepare(benchmark: SourceBenchmark, data_dir: Option<&Path>, out: &Path, seed: u64) -> Result<(), CliError> {
    let corpus = if benchmark == SourceBenchmark::Synthetic {
        generate_synthetic_corpus(seed, &Default::default())?.corpus
    } else {
        let dir = data_dir.ok_or_else(|| CliError::Config("--data-dir is required".into()))?;
        match benchmark {
            SourceBenchmark::InfiniteBench => load_infinitebench_enmc(dir)?,
            SourceBenchmark::Quality => load_quality(dir)?,
            SourceBenchmark::NarrativeQa => load_narrativeqa(dir)?,
            SourceBenchmark::Synthetic => unreachable!(),
        }
    };
    write_corpus(&corpus, out)?;
    println!(
        "{}: {} documents, {} tasks, {} excluded -> {}",
        benchmark,
        corpus.documents.len(),
        corpus.tasks.len(),
        corpus.manifest.excluded.len(),
        out.display()
    );
    Ok(())
}

fn summarize(record: &ResultRecord) {
    for row in &record.rows {
        let budget = row.budget.map_or_else(|| "none".into(), |b| b.to_string());
        let metrics: Vec<String> = row
            .aggregate
            .iter()
            .map(|(k, s)| format!("{k}={:.3}±{:.3}", s.mean, s.std_dev))
            .collect();
        println!(
            "{} budget={budget} scored={} avg_tokens={:.0} {}",
            record.strategy.as_str(),
            row.n_scored,
            row.avg_prompt_tokens,
            metrics.join(" ")
        );
    }
    if !record.skipped.is_empty() {
        println!("skipped: {}", record.skipped.len());
    }
}

fn execute(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Prepare {
            benchmark,
            data_dir,
            out,
            seed,
        } => {
            prepare(benchmark, data_dir.as_deref(), &out, seed)?;
            Ok(EXIT_OK)
        }
        Command::Build(args) => {
            let config = args.resolve()?;
            let (built, failures) = build_experiment_artifacts(&config)?;
            println!("built artifacts for {built} documents");
            for (doc, err) in &failures {
                eprintln!("{doc}: {err}");
            }
            Ok(if failures.is_empty() { EXIT_OK } else { EXIT_PARTIAL })
        }
        Command::Run(args) => {
            let config = args.resolve()?;
            let record = run_experiment(&config)?;
            summarize(&record);
            Ok(record_exit_code(&record))
        }
        Command::Sweep { config, resume } => {
            let configs = SweepConfig::load(&config)?.expand();
            let outcomes = sweep(&configs, resume)?;
            let mut code = EXIT_OK;
            for o in &outcomes {
                match &o.result {
                    Ok(r) => {
                        let tag = if o.reused { " (reused)" } else { "" };
                        println!("{}{tag}", o.output.display());
                        code = code.max(record_exit_code(r));
                    }
                    Err(e) => {
                        eprintln!("{}: {e}", o.output.display());
                        code = EXIT_PROVIDER;
                    }
                }
            }
            Ok(code)
        }
        Command::Report {
            inputs,
            format,
            out_dir,
        } => {
            let records = report_inputs(&inputs)?;
            let path = emit_report(&records, format, &out_dir)?;
            println!("{}", path.display());
            Ok(EXIT_OK)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
