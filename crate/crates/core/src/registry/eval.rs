//! Evaluation harness producing per-service performance rows.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Registry, RegistryError};
use crate::metrics::{self, ScoreSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MetricName {
    Acc,
    #[serde(rename = "PC")]
    Pc,
    #[serde(rename = "MAE")]
    Mae,
}

impl fmt::Display for MetricName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Acc => "Acc",
            Self::Pc => "PC",
            Self::Mae => "MAE",
        })
    }
}

/// Names attached to each row: which service, model and dataset were scored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvaluationTarget {
    pub service: String,
    pub model: String,
    pub dataset: String,
}

impl EvaluationTarget {
    pub fn new(service: impl Into<String>, model: impl Into<String>, dataset: impl Into<String>) -> Self {
        Self {
            service: service.into(),
            model: model.into(),
            dataset: dataset.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRow {
    pub service: String,
    pub model: String,
    pub dataset: String,
    pub metric_name: MetricName,
    pub value: f64,
}

impl EvaluationRow {
    fn new(target: &EvaluationTarget, metric_name: MetricName, value: f64) -> Self {
        Self {
            service: target.service.clone(),
            model: target.model.clone(),
            dataset: target.dataset.clone(),
            metric_name,
            value,
        }
    }

    fn in_domain(&self) -> bool {
        match self.metric_name {
            MetricName::Acc => (0.0..=1.0).contains(&self.value),
            MetricName::Pc => (-1.0..=1.0).contains(&self.value),
            MetricName::Mae => self.value >= 0.0,
        }
    }
}

/// Rows in insertion order. Rows outside their metric's domain are refused.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    rows: Vec<EvaluationRow>,
}

impl EvaluationReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, row: EvaluationRow) -> Result<(), RegistryError> {
        if !row.in_domain() {
            return Err(RegistryError::InvalidDescriptor(format!(
                "{} = {} outside its domain",
                row.metric_name, row.value
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn rows(&self) -> &[EvaluationRow] {
        &self.rows
    }

    /// Plain-text table with a `Metric=value` performance column, four decimals.
    pub fn render(&self) -> String {
        let header = ["Service", "Model", "Dataset", "Performance"];
        let cells: Vec<[String; 4]> = self
            .rows
            .iter()
            .map(|r| {
                [
                    r.service.clone(),
                    r.model.clone(),
                    r.dataset.clone(),
                    format!("{}={:.4}", r.metric_name, r.value),
                ]
            })
            .collect();
        let mut widths = header.map(str::len);
        for row in &cells {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.len());
            }
        }
        let line = |cols: [&str; 4]| {
            cols.iter()
                .zip(widths)
                .map(|(c, w)| format!("{c:<w$}"))
                .collect::<Vec<_>>()
                .join(" | ")
                .trim_end()
                .to_string()
        };
        let mut out = line(header);
        out.push('\n');
        for row in &cells {
            out.push_str(&line([&row[0], &row[1], &row[2], &row[3]]));
            out.push('\n');
        }
        out
    }
}

impl Registry {
    /// Top-1 accuracy of a classifier backend over `(image, true_label)` pairs.
    pub fn evaluate_classifier<I, L>(
        &self,
        backend_id: &str,
        dataset: &[(I, L)],
        target: &EvaluationTarget,
    ) -> Result<EvaluationRow, RegistryError>
    where
        I: AsRef<[u8]>,
        L: AsRef<str>,
    {
        if dataset.is_empty() {
            return Err(RegistryError::EmptyDataset);
        }
        let mut predictions = Vec::with_capacity(dataset.len());
        for (image, _) in dataset {
            let top = self.classify(backend_id, image.as_ref(), 1)?;
            predictions.push(top.top_k[0].label.clone());
        }
        let truths: Vec<String> = dataset.iter().map(|(_, l)| l.as_ref().to_string()).collect();
        let acc = metrics::accuracy(&predictions, &truths)?;
        Ok(EvaluationRow::new(target, MetricName::Acc, acc))
    }

    /// Pearson correlation and MAE of a regressor over `(input, true_score)`
    /// pairs, in that order.
    pub fn evaluate_regressor<I>(
        &self,
        backend_id: &str,
        dataset: &[(I, f64)],
        target: &EvaluationTarget,
    ) -> Result<[EvaluationRow; 2], RegistryError>
    where
        I: AsRef<[u8]>,
    {
        if dataset.is_empty() {
            return Err(RegistryError::EmptyDataset);
        }
        let mut predicted = Vec::with_capacity(dataset.len());
        for (input, _) in dataset {
            predicted.push(self.score(backend_id, input.as_ref())?.score);
        }
        let truth: Vec<f64> = dataset.iter().map(|(_, y)| *y).collect();
        let series = ScoreSeries::new(predicted, truth)?;
        let pc = metrics::pearson_correlation(&series)?;
        let mae = metrics::mean_absolute_error(&series);
        Ok([
            EvaluationRow::new(target, MetricName::Pc, pc),
            EvaluationRow::new(target, MetricName::Mae, mae),
        ])
    }
}
