//! Answer-quality metrics and run aggregation.
//!
//! All text metrics share one normalization: lowercase, drop punctuation,
//! split on whitespace. Multi-reference scores are the maximum over the
//! references.

mod aggregate;
mod metrics;
pub mod porter;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use aggregate::{aggregate_runs, mc_accuracy, RunAggregate, RunStats};
pub use metrics::{bleu, bleu_with, meteor, normalize_tokens, rouge_l, token_f1, BleuConfig};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("{predictions} predictions for {golds} gold labels")]
    LengthMismatch { predictions: usize, golds: usize },
    #[error("no values to aggregate")]
    EmptyInput,
    #[error("at least one reference answer is required")]
    NoReferences,
    #[error("n-gram order must be at least 1")]
    InvalidOrder,
}

/// Per-question scores. Generation metrics are absent for multiple-choice
/// questions and `mc_correct` is absent for free-form ones.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricScores {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bleu1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bleu4: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rouge_l: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub meteor: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc_correct: Option<bool>,
}

pub const METRIC_NAMES: [&str; 6] = ["accuracy", "f1", "bleu1", "bleu4", "rouge_l", "meteor"];

impl MetricScores {
    pub fn multiple_choice(correct: bool) -> Self {
        Self {
            mc_correct: Some(correct),
            ..Self::default()
        }
    }

    pub fn generation<S: AsRef<str>>(prediction: &str, references: &[S]) -> Result<Self, EvalError> {
        Ok(Self {
            f1: Some(token_f1(prediction, references)?),
            bleu1: Some(bleu(prediction, references, 1)?),
            bleu4: Some(bleu(prediction, references, 4)?),
            rouge_l: Some(rouge_l(prediction, references)?),
            meteor: Some(meteor(prediction, references)?),
            mc_correct: None,
        })
    }

    /// Value of a metric by report name; accuracy maps `mc_correct` to 0/1.
    pub fn get(&self, name: &str) -> Option<f64> {
        match name {
            "accuracy" => self.mc_correct.map(|c| if c { 1.0 } else { 0.0 }),
            "f1" => self.f1,
            "bleu1" => self.bleu1,
            "bleu4" => self.bleu4,
            "rouge_l" => self.rouge_l,
            "meteor" => self.meteor,
            _ => None,
        }
    }

    pub fn is_valid(&self) -> bool {
        [self.f1, self.bleu1, self.bleu4, self.rouge_l, self.meteor]
            .into_iter()
            .flatten()
            .all(|v| v.is_finite() && (0.0..=1.0).contains(&v))
    }
}
