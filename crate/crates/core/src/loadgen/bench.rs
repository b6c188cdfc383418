//! Naive versus batched backend throughput.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::Serialize;

use super::LoadgenError;
use crate::registry::Registry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchMode {
    /// One item per backend call.
    Naive,
    /// Up to `batch_size` items per backend call.
    Batched,
}

impl fmt::Display for BenchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Naive => "naive",
            Self::Batched => "batched",
        })
    }
}

impl FromStr for BenchMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "naive" => Ok(Self::Naive),
            "batched" => Ok(Self::Batched),
            other => Err(format!("unknown mode {other:?}; expected naive or batched")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThroughputResult {
    pub backend_id: String,
    pub mode: BenchMode,
    pub items: usize,
    pub batch_size: usize,
    /// Backend invocations made.
    pub calls: usize,
    pub wall_time: Duration,
    /// Items per second of wall time.
    pub fps: f64,
}

impl fmt::Display for ThroughputResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} (batch {}): {} items in {} calls, {:.3} s, {:.2} FPS",
            self.backend_id,
            self.mode,
            self.batch_size,
            self.items,
            self.calls,
            self.wall_time.as_secs_f64(),
            self.fps
        )
    }
}

/// Deterministic, distinct, non-empty benchmark inputs.
pub fn bench_inputs(items: usize) -> Vec<Vec<u8>> {
    (0..items).map(|i| format!("bench-item-{i:06}").into_bytes()).collect()
}

/// Pushes `items` inputs through `backend_id`: one call per item in naive
/// mode, `⌈items / batch_size⌉` calls in batched mode. `batch_size` is
/// ignored (reported as 1) in naive mode.
pub fn bench_throughput(
    registry: &Registry,
    backend_id: &str,
    mode: BenchMode,
    items: usize,
    batch_size: usize,
) -> Result<ThroughputResult, LoadgenError> {
    if items == 0 {
        return Err(LoadgenError::InvalidBench("items must be at least 1".into()));
    }
    let batch_size = match mode {
        BenchMode::Naive => 1,
        BenchMode::Batched if batch_size == 0 => {
            return Err(LoadgenError::InvalidBench("batch size must be at least 1".into()))
        }
        BenchMode::Batched => batch_size,
    };
    registry.backend(backend_id)?;
    let inputs = bench_inputs(items);
    let refs: Vec<&[u8]> = inputs.iter().map(Vec::as_slice).collect();

    let start = Instant::now();
    let mut calls = 0;
    let mut processed = 0;
    for chunk in refs.chunks(batch_size) {
        processed += registry.invoke_batch(backend_id, chunk)?;
        calls += 1;
    }
    let wall_time = start.elapsed();
    debug_assert_eq!(processed, items);
    Ok(ThroughputResult {
        backend_id: backend_id.to_string(),
        mode,
        items,
        batch_size,
        calls,
        wall_time,
        fps: items as f64 / wall_time.as_secs_f64().max(f64::MIN_POSITIVE),
    })
}
