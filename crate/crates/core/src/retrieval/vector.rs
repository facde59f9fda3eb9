use serde::{Deserialize, Serialize};

use super::RetrievalError;

/// A unit-length embedding. Construction normalizes, so every value of this
/// type has L2 norm 1 (up to f32 rounding) and finite entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f32>", into = "Vec<f32>")]
pub struct EmbeddingVector(Vec<f32>);

impl EmbeddingVector {
    pub fn normalized(values: Vec<f32>) -> Result<Self, RetrievalError> {
        if values.is_empty() {
            return Err(RetrievalError::ZeroVector);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(RetrievalError::NonFinite);
        }
        let norm = values.iter().map(|&v| f64::from(v).powi(2)).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(RetrievalError::ZeroVector);
        }
        Ok(Self(values.into_iter().map(|v| (f64::from(v) / norm) as f32).collect()))
    }

    pub fn dims(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f32] {
        &self.0
    }

    pub fn l2_norm(&self) -> f64 {
        self.0.iter().map(|&v| f64::from(v).powi(2)).sum::<f64>().sqrt()
    }
}

impl TryFrom<Vec<f32>> for EmbeddingVector {
    type Error = RetrievalError;

    fn try_from(values: Vec<f32>) -> Result<Self, Self::Error> {
        Self::normalized(values)
    }
}

impl From<EmbeddingVector> for Vec<f32> {
    fn from(v: EmbeddingVector) -> Self {
        v.0
    }
}

/// Cosine similarity of two unit vectors, clamped to [-1, 1].
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, RetrievalError> {
    if a.dims() != b.dims() {
        return Err(RetrievalError::DimensionMismatch {
            left: a.dims(),
            right: b.dims(),
        });
    }
    let dot: f64 = a.0.iter().zip(&b.0).map(|(&x, &y)| f64::from(x) * f64::from(y)).sum();
    Ok(dot.clamp(-1.0, 1.0))
}
