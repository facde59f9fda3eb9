use std::path::Path;
use std::process::Command;

fn ragbench(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_ragbench"))
        .args(args)
        .output()
        .unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8_lossy(&out.stdout).into_owned(),
    )
}

fn write_config(dir: &Path, extra: &str) -> String {
    let path = dir.join("exp.toml");
    let body = format!(
        "benchmark = \"synthetic\"\nstrategy = \"dos\"\nbudgets = [400, 1600]\nn_runs = 2\nwork_dir = \"{}\"\n{extra}\n\
         [reader]\nprovider = \"synthetic_oracle\"\n[synthetic]\nseed = 3\nn_docs = 2\ndoc_tokens = 1500\n",
        dir.join("work").display()
    );
    std::fs::write(&path, body).unwrap();
    path.display().to_string()
}

#[test]
fn run_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "");
    let out = dir.path().join("results");
    for strategy in ["dos", "vanilla"] {
        let file = out.join(format!("{strategy}.json"));
        let (code, stdout) = ragbench(&[
            "run",
            "--config",
            &config,
            "--strategy",
            strategy,
            "--output",
            file.to_str().unwrap(),
        ]);
        assert_eq!(code, 0, "{stdout}");
        assert!(stdout.contains("budget=1600"));
    }
    let (code, stdout) = ragbench(&[
        "report",
        out.to_str().unwrap(),
        "--format",
        "csv",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let csv = std::fs::read_to_string(stdout.trim()).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4);
}

#[test]
fn overflow_skips_exit_partial() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "context_limit = 600");
    let (code, stdout) = ragbench(&["run", "--config", &config, "--strategy", "full_doc"]);
    assert_eq!(code, 2, "{stdout}");
    assert!(stdout.contains("skipped: 8"));
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "bogus_field = 1");
    assert_eq!(ragbench(&["run", "--config", &config]).0, 1);
    let config = write_config(dir.path(), "n_runs_typo = 1");
    assert_eq!(ragbench(&["build", "--config", &config]).0, 1);
    assert_eq!(ragbench(&["run", "--config", "/nonexistent.toml"]).0, 1);
}

#[test]
fn prepare_writes_a_synthetic_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("synthetic.jsonl");
    let (code, stdout) = ragbench(&["prepare", "--benchmark", "synthetic", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(stdout.starts_with("synthetic: 50 documents, 200 tasks"));
    let corpus = ragbench_core::bench::read_corpus(&out).unwrap();
    assert_eq!(corpus.documents.len(), 50);
}
