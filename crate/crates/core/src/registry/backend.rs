//! The inference-backend plugin contract.
//!
//! A backend is registered under an identifier and implements exactly one
//! of [`Classifier`], [`Regressor`] or [`Embedder`]. Callers never touch a
//! backend directly; every invocation goes through the
//! [`Registry`](super::Registry).

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::face::Embedding;
use super::RegistryError;

/// Ordered, duplicate-free set of class labels.
///
/// Label order is significant: the stub classifier addresses labels by index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSet(Vec<String>);

impl LabelSet {
    pub fn new<I, S>(labels: I) -> Result<Self, RegistryError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(RegistryError::InvalidDescriptor("label set is empty".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for label in &labels {
            if !seen.insert(label.as_str()) {
                return Err(RegistryError::InvalidDescriptor(format!(
                    "duplicate label {label:?}"
                )));
            }
        }
        Ok(Self(labels))
    }

    /// `prefix_000`, `prefix_001`, ... zero padded to the width of `count - 1`.
    pub fn numbered(prefix: &str, count: usize) -> Result<Self, RegistryError> {
        let width = count.saturating_sub(1).to_string().len().max(3);
        Self::new((0..count).map(|i| format!("{prefix}_{i:0width$}")))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&str> {
        self.0.get(index).map(String::as_str)
    }

    pub fn contains(&self, label: &str) -> bool {
        self.0.iter().any(|l| l == label)
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }
}

/// Inclusive score interval with `low < high`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreRange {
    low: f64,
    high: f64,
}

impl ScoreRange {
    pub fn new(low: f64, high: f64) -> Result<Self, RegistryError> {
        if !(low.is_finite() && high.is_finite() && low < high) {
            return Err(RegistryError::InvalidDescriptor(format!(
                "score range [{low}, {high}] must satisfy low < high"
            )));
        }
        Ok(Self { low, high })
    }

    pub fn low(&self) -> f64 {
        self.low
    }

    pub fn high(&self) -> f64 {
        self.high
    }

    pub fn contains(&self, value: f64) -> bool {
        value >= self.low && value <= self.high
    }

    /// NaN maps to `low`.
    pub fn clamp(&self, value: f64) -> f64 {
        if value.is_nan() {
            self.low
        } else {
            value.clamp(self.low, self.high)
        }
    }
}

pub trait Classifier: Send + Sync {
    fn labels(&self) -> &LabelSet;

    /// Confidence for every label, in label order, summing to 1.
    fn distribution(&self, input: &[u8]) -> Vec<f64>;

    fn distribution_batch(&self, inputs: &[&[u8]]) -> Vec<Vec<f64>> {
        inputs.iter().map(|input| self.distribution(input)).collect()
    }
}

pub trait Regressor: Send + Sync {
    fn range(&self) -> ScoreRange;

    /// Raw prediction; the registry clamps it into [`Regressor::range`].
    fn predict(&self, input: &[u8]) -> f64;

    fn predict_batch(&self, inputs: &[&[u8]]) -> Vec<f64> {
        inputs.iter().map(|input| self.predict(input)).collect()
    }
}

pub trait Embedder: Send + Sync {
    fn embed(&self, input: &[u8]) -> Embedding;

    fn embed_batch(&self, inputs: &[&[u8]]) -> Vec<Embedding> {
        inputs.iter().map(|input| self.embed(input)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Classification,
    Regression,
    Retrieval,
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Classification => "classification",
            Self::Regression => "regression",
            Self::Retrieval => "retrieval",
        })
    }
}

#[derive(Clone)]
pub enum Backend {
    Classifier(Arc<dyn Classifier>),
    Regressor(Arc<dyn Regressor>),
    Embedder(Arc<dyn Embedder>),
}

impl Backend {
    pub fn classifier(c: impl Classifier + 'static) -> Self {
        Self::Classifier(Arc::new(c))
    }

    pub fn regressor(r: impl Regressor + 'static) -> Self {
        Self::Regressor(Arc::new(r))
    }

    pub fn embedder(e: impl Embedder + 'static) -> Self {
        Self::Embedder(Arc::new(e))
    }

    pub fn kind(&self) -> BackendKind {
        match self {
            Self::Classifier(_) => BackendKind::Classification,
            Self::Regressor(_) => BackendKind::Regression,
            Self::Embedder(_) => BackendKind::Retrieval,
        }
    }
}

impl fmt::Debug for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("Backend").field(&self.kind()).finish()
    }
}
