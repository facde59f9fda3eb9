use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::EvalError;

/// Fraction of predictions equal to their gold label; `None` (an answer
/// that could not be parsed) counts as wrong.
pub fn mc_accuracy(predictions: &[Option<usize>], golds: &[usize]) -> Result<f64, EvalError> {
    if predictions.len() != golds.len() {
        return Err(EvalError::LengthMismatch {
            predictions: predictions.len(),
            golds: golds.len(),
        });
    }
    if golds.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let correct = predictions.iter().zip(golds).filter(|(p, g)| **p == Some(**g)).count();
    Ok(correct as f64 / golds.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single run.
    pub std_dev: f64,
    pub n_runs: usize,
}

/// Metric name to its statistics across runs.
pub type RunAggregate = BTreeMap<String, RunStats>;

pub fn aggregate_runs(values: &[f64]) -> Result<RunStats, EvalError> {
    if values.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let std_dev = if n == 1 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    };
    Ok(RunStats {
        mean,
        std_dev,
        n_runs: n,
    })
}
