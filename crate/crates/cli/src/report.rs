//! Tables, CSV and plot series from result records.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ragbench_core::eval::{RunStats, METRIC_NAMES};
use ragbench_core::pipelines::Strategy;

use crate::record::ResultRecord;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Table,
    Csv,
    Plotdata,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "table" => Ok(Self::Table),
            "csv" => Ok(Self::Csv),
            "plotdata" => Ok(Self::Plotdata),
            other => Err(format!("unknown report format `{other}`")),
        }
    }
}

struct Cell {
    stats: RunStats,
    avg_tokens: f64,
}

/// (metric, strategy, budget) -> cell, first record wins.
type Cells = BTreeMap<(String, Strategy, Option<usize>), Cell>;

fn collect(records: &[ResultRecord]) -> Cells {
    let mut cells = Cells::new();
    for r in records {
        for row in &r.rows {
            for (metric, stats) in &row.aggregate {
                cells.entry((metric.clone(), r.strategy, row.budget)).or_insert(Cell {
                    stats: *stats,
                    avg_tokens: row.avg_prompt_tokens,
                });
            }
        }
    }
    cells
}

fn metrics_in(cells: &Cells) -> Vec<&'static str> {
    METRIC_NAMES
        .into_iter()
        .filter(|m| cells.keys().any(|(name, _, _)| name == m))
        .collect()
}

fn budget_label(b: Option<usize>) -> String {
    b.map_or_else(|| "none".to_string(), |b| b.to_string())
}

fn pct(stats: &RunStats) -> String {
    format!("{:.1}% ± {:.1}%", stats.mean * 100.0, stats.std_dev * 100.0)
}

/// Strategy-by-budget matrix of `mean% ± std%` cells, each followed by the
/// average prompt tokens, one block per metric, then the resolved configs.
pub fn render_table(records: &[ResultRecord]) -> Result<String, CliError> {
    if records.is_empty() {
        return Err(CliError::EmptyInput);
    }
    let cells = collect(records);
    let mut out = String::new();
    for metric in metrics_in(&cells) {
        let strategies: BTreeSet<Strategy> = cells.keys().filter(|k| k.0 == metric).map(|k| k.1).collect();
        let budgets: BTreeSet<Option<usize>> = cells.keys().filter(|k| k.0 == metric).map(|k| k.2).collect();
        // `None` sorts first in a BTreeSet; show unbudgeted columns last
        let budgets: Vec<Option<usize>> = budgets
            .iter()
            .filter(|b| b.is_some())
            .chain(budgets.iter().filter(|b| b.is_none()))
            .copied()
            .collect();

        let mut header = vec!["strategy".to_string()];
        for b in &budgets {
            header.push(budget_label(*b));
            header.push(format!("{} tokens", budget_label(*b)));
        }
        let mut lines = vec![header];
        for s in Strategy::ALL.iter().filter(|s| strategies.contains(s)) {
            let mut line = vec![s.as_str().to_string()];
            for b in &budgets {
                match cells.get(&(metric.to_string(), *s, *b)) {
                    Some(c) => {
                        line.push(pct(&c.stats));
                        line.push(format!("{:.0}", c.avg_tokens));
                    }
                    None => {
                        line.push("-".into());
                        line.push("-".into());
                    }
                }
            }
            lines.push(line);
        }
        let widths: Vec<usize> = (0..lines[0].len())
            .map(|i| lines.iter().map(|l| l[i].chars().count()).max().unwrap_or(0))
            .collect();
        writeln!(out, "metric: {metric}").unwrap();
        for (n, line) in lines.iter().enumerate() {
            let cells: Vec<String> = line
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
                .collect();
            writeln!(out, "{}", cells.join(" | ")).unwrap();
            if n == 0 {
                let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
                writeln!(out, "{}", rule.join("-+-")).unwrap();
            }
        }
        out.push('\n');
    }
    for r in records {
        writeln!(out, "# config {}: {}", r.fingerprint, serde_json::to_string(&r.config)?).unwrap();
    }
    Ok(out)
}

fn csv_string(header: &[&str], rows: Vec<Vec<String>>) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

/// Columns: strategy, budget, metric, mean, std, n, avg_tokens.
pub fn render_csv(records: &[ResultRecord]) -> Result<String, CliError> {
    if records.is_empty() {
        return Err(CliError::EmptyInput);
    }
    let rows = collect(records)
        .iter()
        .map(|((metric, s, b), c)| {
            vec![
                s.as_str().to_string(),
                b.map(|b| b.to_string()).unwrap_or_default(),
                metric.clone(),
                format!("{:.6}", c.stats.mean),
                format!("{:.6}", c.stats.std_dev),
                c.stats.n_runs.to_string(),
                format!("{:.1}", c.avg_tokens),
            ]
        })
        .collect();
    csv_string(
        &["strategy", "budget", "metric", "mean", "std", "n", "avg_tokens"],
        rows,
    )
}

/// x, budget, stats
type Point = (f64, Option<usize>, RunStats);

/// One point per (strategy, metric, budget): x = average prompt tokens,
/// y = mean, yerr = standard deviation. Points are sorted by x per series.
pub fn render_plotdata(records: &[ResultRecord]) -> Result<String, CliError> {
    if records.is_empty() {
        return Err(CliError::EmptyInput);
    }
    let mut series: BTreeMap<(String, Strategy), Vec<Point>> = BTreeMap::new();
    for ((metric, s, b), c) in collect(records) {
        series.entry((metric, s)).or_default().push((c.avg_tokens, b, c.stats));
    }
    let mut rows = Vec::new();
    for ((metric, s), mut points) in series {
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (x, b, stats) in points {
            rows.push(vec![
                s.as_str().to_string(),
                metric.clone(),
                b.map(|b| b.to_string()).unwrap_or_default(),
                format!("{x:.1}"),
                format!("{:.6}", stats.mean),
                format!("{:.6}", stats.std_dev),
            ]);
        }
    }
    csv_string(&["strategy", "metric", "budget", "x", "y", "yerr"], rows)
}

/// Writes the report into `dir` and returns the file written.
pub fn emit_report(records: &[ResultRecord], format: ReportFormat, dir: &Path) -> Result<PathBuf, CliError> {
    let (name, body) = match format {
        ReportFormat::Table => ("report.txt", render_table(records)?),
        ReportFormat::Csv => ("report.csv", render_csv(records)?),
        ReportFormat::Plotdata => ("plotdata.csv", render_plotdata(records)?),
    };
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, body)?;
    Ok(path)
}
