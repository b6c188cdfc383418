//! Deterministic synthetic backends standing in for trained networks.
//!
//! [`StubClassifier`] puts its peak on label index `byte_sum mod |labels|`
//! and spreads the remaining mass by a softmax over per-label jitter drawn
//! from the FNV-1a hash of the input. [`StubRegressor`] maps the same hash
//! uniformly onto its score range:
//!
//! ```text
//! score = low + (fnv1a64(input) mod 10001) / 10000 * (high - low)
//! ```

use std::time::Duration;

use super::backend::{Classifier, Embedder, LabelSet, Regressor, ScoreRange};
use super::face::Embedding;
use super::hash::{fnv1a64, splitmix64};

/// Logit of the peak label. Every other label gets a logit in `[0, 1)`.
pub const PEAK_LOGIT: f64 = 4.0;

#[derive(Debug, Clone)]
pub struct StubClassifier {
    labels: LabelSet,
}

impl StubClassifier {
    pub fn new(labels: LabelSet) -> Self {
        Self { labels }
    }

    pub fn peak_index(&self, input: &[u8]) -> usize {
        let byte_sum: u64 = input.iter().map(|&b| u64::from(b)).sum();
        (byte_sum % self.labels.len() as u64) as usize
    }
}

impl Classifier for StubClassifier {
    fn labels(&self) -> &LabelSet {
        &self.labels
    }

    fn distribution(&self, input: &[u8]) -> Vec<f64> {
        let peak = self.peak_index(input);
        let hash = fnv1a64(input);
        let logits: Vec<f64> = (0..self.labels.len())
            .map(|i| {
                if i == peak {
                    PEAK_LOGIT
                } else {
                    (splitmix64(hash ^ i as u64) % 1000) as f64 / 1000.0
                }
            })
            .collect();
        // Largest logit is PEAK_LOGIT; shifting by it keeps exp() in (0, 1].
        let weights: Vec<f64> = logits.iter().map(|l| (l - PEAK_LOGIT).exp()).collect();
        let total: f64 = weights.iter().sum();
        weights.into_iter().map(|w| w / total).collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct StubRegressor {
    range: ScoreRange,
}

impl StubRegressor {
    pub fn new(range: ScoreRange) -> Self {
        Self { range }
    }
}

impl Regressor for StubRegressor {
    fn range(&self) -> ScoreRange {
        self.range
    }

    fn predict(&self, input: &[u8]) -> f64 {
        let bucket = (fnv1a64(input) % 10_001) as f64 / 10_000.0;
        self.range.low() + bucket * (self.range.high() - self.range.low())
    }
}

/// Wraps a backend and sleeps a fixed overhead per call plus a cost per item.
///
/// Models an accelerator whose launch cost dominates: batching amortises
/// `per_call` across the batch.
#[derive(Debug, Clone)]
pub struct SimulatedCost<B> {
    inner: B,
    per_call: Duration,
    per_item: Duration,
}

impl<B> SimulatedCost<B> {
    pub fn new(inner: B, per_call: Duration, per_item: Duration) -> Self {
        Self {
            inner,
            per_call,
            per_item,
        }
    }

    fn pay(&self, items: usize) {
        let cost = self.per_call + self.per_item * items as u32;
        if !cost.is_zero() {
            std::thread::sleep(cost);
        }
    }
}

impl<B: Classifier> Classifier for SimulatedCost<B> {
    fn labels(&self) -> &LabelSet {
        self.inner.labels()
    }

    fn distribution(&self, input: &[u8]) -> Vec<f64> {
        self.pay(1);
        self.inner.distribution(input)
    }

    fn distribution_batch(&self, inputs: &[&[u8]]) -> Vec<Vec<f64>> {
        self.pay(inputs.len());
        inputs.iter().map(|i| self.inner.distribution(i)).collect()
    }
}

impl<B: Regressor> Regressor for SimulatedCost<B> {
    fn range(&self) -> ScoreRange {
        self.inner.range()
    }

    fn predict(&self, input: &[u8]) -> f64 {
        self.pay(1);
        self.inner.predict(input)
    }

    fn predict_batch(&self, inputs: &[&[u8]]) -> Vec<f64> {
        self.pay(inputs.len());
        inputs.iter().map(|i| self.inner.predict(i)).collect()
    }
}

impl<B: Embedder> Embedder for SimulatedCost<B> {
    fn embed(&self, input: &[u8]) -> Embedding {
        self.pay(1);
        self.inner.embed(input)
    }

    fn embed_batch(&self, inputs: &[&[u8]]) -> Vec<Embedding> {
        self.pay(inputs.len());
        inputs.iter().map(|i| self.inner.embed(i)).collect()
    }
}
