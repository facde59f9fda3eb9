use std::collections::BTreeMap;
use std::path::Path;

use ragbench::config::ExperimentConfig;
use ragbench::record::{BudgetRow, ResultRecord, RESULT_SCHEMA, RESULT_SCHEMA_VERSION};
use ragbench::report::{emit_report, render_csv, render_plotdata, render_table, ReportFormat};
use ragbench::CliError;
use ragbench_core::eval::RunStats;
use ragbench_core::pipelines::Strategy;

fn row(budget: Option<usize>, tokens: f64, acc: (f64, f64)) -> BudgetRow {
    let mut aggregate = BTreeMap::new();
    aggregate.insert(
        "accuracy".to_string(),
        RunStats {
            mean: acc.0,
            std_dev: acc.1,
            n_runs: 5,
        },
    );
    BudgetRow {
        budget,
        n_scored: 20,
        avg_prompt_tokens: tokens,
        avg_context_tokens: tokens - 80.0,
        aggregate,
        runs: vec![],
    }
}

fn record(strategy: Strategy, rows: Vec<BudgetRow>) -> ResultRecord {
    let mut config = ExperimentConfig::synthetic(strategy, "/work");
    config.budgets = rows.iter().filter_map(|r| r.budget).collect();
    ResultRecord {
        schema: RESULT_SCHEMA.into(),
        schema_version: RESULT_SCHEMA_VERSION,
        fingerprint: config.fingerprint(),
        strategy,
        config,
        task_ids: vec![],
        rows,
        skipped: vec![],
    }
}

fn records() -> Vec<ResultRecord> {
    vec![
        record(
            Strategy::Vanilla,
            vec![row(Some(500), 612.0, (0.55, 0.01)), row(Some(1000), 1105.4, (0.6, 0.0))],
        ),
        record(
            Strategy::Dos,
            vec![
                row(Some(1000), 1105.4, (0.7125, 0.0125)),
                row(Some(500), 612.0, (0.6, 0.02)),
            ],
        ),
        record(Strategy::FullDoc, vec![row(None, 10234.0, (0.5, 0.0))]),
    ]
}

fn golden(name: &str, actual: &str) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, actual).unwrap();
    }
    let expected = std::fs::read_to_string(&path).unwrap();
    assert_eq!(
        actual,
        expected,
        "{} differs; rerun with UPDATE_GOLDEN=1 to accept",
        path.display()
    );
}

#[test]
fn table_matches_golden() {
    golden("report_table.txt", &render_table(&records()).unwrap());
}

#[test]
fn csv_matches_golden() {
    golden("report.csv", &render_csv(&records()).unwrap());
}

#[test]
fn plotdata_matches_golden() {
    golden("plotdata.csv", &render_plotdata(&records()).unwrap());
}

#[test]
fn empty_input_is_an_error() {
    assert!(matches!(render_table(&[]), Err(CliError::EmptyInput)));
    assert!(matches!(render_csv(&[]), Err(CliError::EmptyInput)));
    assert!(matches!(render_plotdata(&[]), Err(CliError::EmptyInput)));
}

#[test]
fn emit_writes_named_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = emit_report(&records(), ReportFormat::Csv, dir.path()).unwrap();
    assert_eq!(path.file_name().unwrap(), "report.csv");
    let body = std::fs::read_to_string(path).unwrap();
    assert!(body.starts_with("strategy,budget,metric,mean,std,n,avg_tokens\n"));
    assert_eq!(body.lines().count(), 1 + 5);
}

#[test]
fn record_roundtrips_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nested/r.json");
    let r = records().remove(0);
    r.save(&path).unwrap();
    let back = ResultRecord::load(&path).unwrap();
    assert_eq!(serde_json::to_value(&r).unwrap(), serde_json::to_value(&back).unwrap());
    assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 1);
}
