use std::collections::HashMap;
use std::path::{Component, Path, PathBuf};

use crate::config::ExperimentConfig;
use crate::record::ResultRecord;
use crate::runner::run_experiment;
use crate::CliError;

#[derive(Debug)]
pub struct SweepOutcome {
    pub fingerprint: String,
    pub output: PathBuf,
    /// Loaded from a previous sweep instead of recomputed.
    pub reused: bool,
    pub result: Result<ResultRecord, String>,
}

fn lexical(path: &Path) -> PathBuf {
    let mut out = PathBuf::new();
    for c in path.components() {
        match c {
            Component::CurDir => {}
            Component::ParentDir => {
                out.pop();
            }
            other => out.push(other),
        }
    }
    out
}

/// Every config needs its own output path.
pub fn validate_outputs(configs: &[ExperimentConfig]) -> Result<(), CliError> {
    let mut seen: HashMap<PathBuf, usize> = HashMap::new();
    for (i, c) in configs.iter().enumerate() {
        c.validate()?;
        let out = c
            .output
            .as_ref()
            .ok_or_else(|| CliError::Config(format!("sweep entry {i} has no output path")))?;
        if let Some(j) = seen.insert(lexical(out), i) {
            return Err(CliError::Config(format!(
                "sweep entries {j} and {i} both write {}",
                out.display()
            )));
        }
    }
    Ok(())
}

/// Runs each config in turn, writing each record as soon as it finishes.
/// With `resume`, records already on disk with a matching fingerprint are
/// reused. A failing config does not stop the others.
pub fn sweep(configs: &[ExperimentConfig], resume: bool) -> Result<Vec<SweepOutcome>, CliError> {
    validate_outputs(configs)?;
    let mut outcomes = Vec::new();
    for config in configs {
        let output = config.output.clone().expect("validated");
        let fingerprint = config.fingerprint();
        if resume {
            if let Ok(existing) = ResultRecord::load(&output) {
                if existing.fingerprint == fingerprint {
                    log::info!("reusing {}", output.display());
                    outcomes.push(SweepOutcome {
                        fingerprint,
                        output,
                        reused: true,
                        result: Ok(existing),
                    });
                    continue;
                }
            }
        }
        let result = run_experiment(config).map_err(|e| {
            log::error!("{} failed: {e}", output.display());
            e.to_string()
        });
        outcomes.push(SweepOutcome {
            fingerprint,
            output,
            reused: false,
            result,
        });
    }
    Ok(outcomes)
}
