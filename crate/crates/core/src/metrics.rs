//! Evaluation and latency statistics.
//!
//! Pearson correlation and mean absolute error score regression services,
//! accuracy scores classifiers, and the nearest-rank percentile plus
//! [`summarize_latencies`] produce the per-route rows of a stress report.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("series lengths differ: {predicted} predicted vs {truth} ground truth")]
    LengthMismatch { predicted: usize, truth: usize },
    #[error("at least {required} samples required, got {got}")]
    TooFewSamples { required: usize, got: usize },
    #[error("zero variance in the {0} series")]
    DegenerateVariance(&'static str),
    #[error("empty input")]
    EmptyInput,
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("percentile must lie in (0, 1], got {0}")]
    InvalidPercentile(f64),
}

/// Paired predicted (`x`) and ground-truth (`y`) scores.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSeries {
    predicted: Vec<f64>,
    truth: Vec<f64>,
}

impl ScoreSeries {
    pub fn new(predicted: Vec<f64>, truth: Vec<f64>) -> Result<Self, MetricsError> {
        if predicted.len() != truth.len() {
            return Err(MetricsError::LengthMismatch {
                predicted: predicted.len(),
                truth: truth.len(),
            });
        }
        if predicted.is_empty() {
            return Err(MetricsError::EmptyInput);
        }
        if let Some(i) = predicted
            .iter()
            .zip(&truth)
            .position(|(x, y)| !x.is_finite() || !y.is_finite())
        {
            return Err(MetricsError::NonFinite(i));
        }
        Ok(Self { predicted, truth })
    }

    pub fn predicted(&self) -> &[f64] {
        &self.predicted
    }

    pub fn truth(&self) -> &[f64] {
        &self.truth
    }

    pub fn len(&self) -> usize {
        self.predicted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predicted.is_empty()
    }

    pub fn predicted_mean(&self) -> f64 {
        mean(&self.predicted)
    }

    pub fn truth_mean(&self) -> f64 {
        mean(&self.truth)
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Pearson correlation between predicted and ground-truth scores.
///
/// Two-pass: means first, then centred cross and square sums.
pub fn pearson_correlation(series: &ScoreSeries) -> Result<f64, MetricsError> {
    let n = series.len();
    if n < 2 {
        return Err(MetricsError::TooFewSamples { required: 2, got: n });
    }
    let x_mean = series.predicted_mean();
    let y_mean = series.truth_mean();

    let mut cross = 0.0;
    let mut x_sq = 0.0;
    let mut y_sq = 0.0;
    for (x, y) in series.predicted.iter().zip(&series.truth) {
        let dx = x - x_mean;
        let dy = y - y_mean;
        cross += dx * dy;
        x_sq += dx * dx;
        y_sq += dy * dy;
    }
    if x_sq == 0.0 {
        return Err(MetricsError::DegenerateVariance("predicted"));
    }
    if y_sq == 0.0 {
        return Err(MetricsError::DegenerateVariance("ground-truth"));
    }
    // sqrt(a)·sqrt(b) = sqrt(a·b); the single root keeps r = ±1 exact for
    // proportional series. Clamp covers residual rounding past |1|.
    Ok((cross / (x_sq * y_sq).sqrt()).clamp(-1.0, 1.0))
}

pub fn mean_absolute_error(series: &ScoreSeries) -> f64 {
    let total: f64 = series
        .predicted
        .iter()
        .zip(&series.truth)
        .map(|(x, y)| (x - y).abs())
        .sum();
    total / series.len() as f64
}

/// Fraction of positions where the prediction equals the truth.
pub fn accuracy<T: PartialEq>(predictions: &[T], truths: &[T]) -> Result<f64, MetricsError> {
    if predictions.len() != truths.len() {
        return Err(MetricsError::LengthMismatch {
            predicted: predictions.len(),
            truth: truths.len(),
        });
    }
    if predictions.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let matches = predictions
        .iter()
        .zip(truths)
        .filter(|(p, t)| p == t)
        .count();
    Ok(matches as f64 / predictions.len() as f64)
}

/// 1-indexed nearest rank `ceil(p * n)`.
fn nearest_rank(p: f64, n: usize) -> usize {
    let exact = p * n as f64;
    // 0.99 * 100 must land on rank 99, not 100, despite 0.99 being inexact.
    let rank = (exact - exact * 1e-12).ceil() as usize;
    rank.clamp(1, n)
}

/// Nearest-rank percentile: the `ceil(p * n)`-th smallest sample.
pub fn percentile_nearest_rank<T: Ord + Copy>(samples: &[T], p: f64) -> Result<T, MetricsError> {
    if samples.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(MetricsError::InvalidPercentile(p));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_unstable();
    Ok(sorted[nearest_rank(p, sorted.len()) - 1])
}

/// Converts a duration to fractional milliseconds at microsecond resolution.
pub fn duration_ms(d: Duration) -> f64 {
    d.as_micros() as f64 / 1000.0
}

/// Rounds a millisecond value half-up to an integer.
pub fn round_half_up(ms: f64) -> i64 {
    (ms + 0.5).floor() as i64
}

/// Aggregate latency statistics for one API route.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencySummary {
    pub api: String,
    /// Arithmetic mean in milliseconds.
    pub avg_latency: f64,
    /// Nearest-rank 99th percentile in milliseconds.
    pub p99: f64,
    pub error_count: u64,
    /// Number of successful samples. May exceed the number of samples the
    /// latency figures were computed from when a warmup prefix was excluded.
    pub sample_count: u64,
}

impl LatencySummary {
    /// Row for a route whose every attempt failed; it carries no latency.
    pub fn errors_only(api: impl Into<String>, error_count: u64) -> Self {
        Self {
            api: api.into(),
            avg_latency: 0.0,
            p99: 0.0,
            error_count,
            sample_count: 0,
        }
    }

    pub fn has_latency(&self) -> bool {
        self.sample_count > 0
    }
}

pub fn summarize_latencies(
    api: &str,
    samples: &[Duration],
    errors: u64,
) -> Result<LatencySummary, MetricsError> {
    if samples.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let total_us: u128 = samples.iter().map(Duration::as_micros).sum();
    let avg_latency = total_us as f64 / samples.len() as f64 / 1000.0;
    let p99 = percentile_nearest_rank(samples, 0.99)?;
    Ok(LatencySummary {
        api: api.to_string(),
        avg_latency,
        p99: duration_ms(p99),
        error_count: errors,
        sample_count: samples.len() as u64,
    })
}
