use std::path::Path;

use proptest::prelude::*;
use ragbench::config::{ExperimentConfig, ReaderKind};
use ragbench::record::{ResultRecord, SkipKind};
use ragbench::{record_exit_code, run_experiment, sweep, CliError, EXIT_OK, EXIT_PARTIAL};
use ragbench_core::bench::SyntheticConfig;
use ragbench_core::pipelines::Strategy;

fn small(strategy: Strategy, work: &Path) -> ExperimentConfig {
    let mut c = ExperimentConfig::synthetic(strategy, work);
    c.budgets = vec![300, 1200];
    c.n_runs = 3;
    c.concurrency = 2;
    c.synthetic.seed = 11;
    c.synthetic.corpus = SyntheticConfig {
        n_docs: 3,
        doc_tokens: 1500,
        facts_per_doc: 2,
        ..Default::default()
    };
    c
}

#[test]
fn budgeted_run_has_one_row_per_budget_and_run() {
    let dir = tempfile::tempdir().unwrap();
    let record = run_experiment(&small(Strategy::Dos, dir.path())).unwrap();
    assert_eq!(record.rows.len(), 2);
    assert_eq!(record.task_ids.len(), 6);
    for row in &record.rows {
        assert_eq!(row.runs.len(), 3);
        assert_eq!(row.n_scored, 6);
        let acc = row.aggregate["accuracy"];
        assert_eq!(acc.n_runs, 3);
        assert!((0.0..=1.0).contains(&acc.mean));
        // a deterministic reader gives identical runs
        assert_eq!(acc.std_dev, 0.0);
    }
    record.check_accounting().unwrap();
    assert_eq!(record_exit_code(&record), EXIT_OK);
    assert_eq!(record.config.budgets, vec![300, 1200]);
}

#[test]
fn context_tokens_respect_each_budget() {
    let dir = tempfile::tempdir().unwrap();
    for strategy in [Strategy::Vanilla, Strategy::Dos, Strategy::Raptor] {
        let record = run_experiment(&small(strategy, dir.path())).unwrap();
        for row in &record.rows {
            let budget = row.budget.unwrap();
            for q in row.runs.iter().flat_map(|r| &r.questions) {
                assert!(
                    q.context_tokens <= budget,
                    "{strategy:?} {} > {budget}",
                    q.context_tokens
                );
                assert!(q.prompt_tokens > q.context_tokens);
            }
        }
    }
}

#[test]
fn unbudgeted_strategies_get_a_single_row() {
    let dir = tempfile::tempdir().unwrap();
    for strategy in [Strategy::FullDoc, Strategy::ReadAgent] {
        let record = run_experiment(&small(strategy, dir.path())).unwrap();
        assert_eq!(record.rows.len(), 1);
        assert_eq!(record.rows[0].budget, None);
        record.check_accounting().unwrap();
    }
}

#[test]
fn full_document_over_the_reader_limit_is_skipped() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small(Strategy::FullDoc, dir.path());
    c.context_limit = Some(1000);
    let record = run_experiment(&c).unwrap();
    assert_eq!(record.rows[0].n_scored, 0);
    assert_eq!(record.skipped.len(), 6);
    assert!(record.skipped.iter().all(|s| s.kind == SkipKind::ContextOverflow));
    record.check_accounting().unwrap();
    assert_eq!(record_exit_code(&record), EXIT_PARTIAL);
}

#[test]
fn rerun_is_identical_and_served_from_cache() {
    let dir = tempfile::tempdir().unwrap();
    let c = small(Strategy::Raptor, dir.path());
    let a = run_experiment(&c).unwrap();
    let b = run_experiment(&c).unwrap();
    assert_eq!(serde_json::to_value(&a).unwrap(), serde_json::to_value(&b).unwrap());
    assert!(dir.path().join("lm").exists());
    assert!(dir.path().join("artifacts/raptor").read_dir().unwrap().count() >= 3);
}

#[test]
fn output_file_is_written() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small(Strategy::Vanilla, dir.path());
    c.output = Some(dir.path().join("out/v.json"));
    let record = run_experiment(&c).unwrap();
    let back = ResultRecord::load(c.output.as_ref().unwrap()).unwrap();
    assert_eq!(back.fingerprint, record.fingerprint);
}

#[test]
fn oracle_reader_rejected_off_synthetic() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small(Strategy::Dos, dir.path());
    c.benchmark = ragbench_core::text::SourceBenchmark::Quality;
    c.corpus = Some(dir.path().join("c.jsonl"));
    c.reader.provider = ReaderKind::SyntheticOracle;
    assert!(matches!(run_experiment(&c), Err(CliError::Config(_))));
}

fn grid(work: &Path) -> Vec<ExperimentConfig> {
    let mut out = Vec::new();
    for strategy in [Strategy::Vanilla, Strategy::Dos] {
        for budget in [300, 1200] {
            let mut c = small(strategy, work);
            c.budgets = vec![budget];
            c.n_runs = 1;
            c.output = Some(work.join(format!("out/{}-{budget}.json", strategy.as_str())));
            out.push(c);
        }
    }
    out
}

#[test]
fn sweep_writes_each_record_and_resume_reuses_them() {
    let dir = tempfile::tempdir().unwrap();
    let configs = grid(dir.path());
    let first = sweep(&configs, true).unwrap();
    assert_eq!(first.len(), 4);
    assert!(first.iter().all(|o| !o.reused && o.result.is_ok() && o.output.exists()));

    let second = sweep(&configs, true).unwrap();
    assert!(second.iter().all(|o| o.reused));

    // a changed config no longer matches its old record
    let mut changed = configs.clone();
    changed[0].seed = 99;
    let third = sweep(&changed, true).unwrap();
    assert!(!third[0].reused);
    assert!(third[1..].iter().all(|o| o.reused));

    let fresh = sweep(&configs, false).unwrap();
    assert!(fresh.iter().all(|o| !o.reused));
}

#[test]
fn sweep_rejects_shared_or_missing_outputs_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let mut configs = grid(dir.path());
    configs[1].output = Some(dir.path().join("out/./vanilla-300.json"));
    assert!(matches!(sweep(&configs, false), Err(CliError::Config(_))));
    configs[1].output = None;
    assert!(matches!(sweep(&configs, false), Err(CliError::Config(_))));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn sweep_isolates_a_failing_entry() {
    let dir = tempfile::tempdir().unwrap();
    let mut configs = grid(dir.path());
    configs[2].reader.provider = ReaderKind::Scripted;
    configs[2].reader.script = Some(dir.path().join("missing-script.json"));
    let outcomes = sweep(&configs, false).unwrap();
    assert!(outcomes[2].result.is_err());
    assert!(outcomes.iter().enumerate().all(|(i, o)| i == 2 || o.result.is_ok()));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fingerprint_ignores_operational_fields(
        concurrency in 1usize..64,
        name in "[a-z]{0,8}",
        work in "[a-z]{1,8}",
        rps in proptest::option::of(0.5f64..50.0),
    ) {
        let base = ExperimentConfig::synthetic(Strategy::Dos, "w");
        let mut other = base.clone();
        other.concurrency = concurrency;
        other.name = name;
        other.work_dir = work.into();
        other.output = Some("elsewhere.json".into());
        other.reader.requests_per_second = rps;
        prop_assert_eq!(base.fingerprint(), other.fingerprint());
    }

    #[test]
    fn fingerprint_tracks_semantic_fields(seed in 1u64..1000, budget in 1usize..50_000, runs in 2usize..9) {
        let base = ExperimentConfig::synthetic(Strategy::Dos, "w");
        let mut a = base.clone();
        a.seed = seed;
        prop_assert_ne!(base.fingerprint(), a.fingerprint());
        let mut b = base.clone();
        b.budgets = vec![budget, budget + 1];
        prop_assert_ne!(base.fingerprint(), b.fingerprint());
        prop_assume!(runs != base.n_runs);
        let mut c = base.clone();
        c.n_runs = runs;
        prop_assert_ne!(base.fingerprint(), c.fingerprint());
    }
}
