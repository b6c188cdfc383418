//! Load generation against a running gateway and backend throughput
//! benchmarking.
//!
//! A [`StressPlan`] names targets, virtual users and a stop condition;
//! [`run_stress`] drives it and returns a [`StressReport`] with one
//! [`LatencySummary`](crate::metrics::LatencySummary) row per route, rendered
//! by [`render_report`] or [`render_csv`]. [`bench_throughput`] compares
//! one-item calls against batched calls on a registry backend.

pub mod bench;
pub mod plan;
pub mod report;
pub mod runner;
pub mod transport;

use thiserror::Error;

use crate::registry::RegistryError;

pub use bench::{bench_inputs, bench_throughput, BenchMode, ThroughputResult};
pub use plan::{Payload, PlanOverrides, StopCondition, StressPlan, StressTarget};
pub use report::{parse_report, render_csv, render_report, ReportRow, StressReport};
pub use runner::{aggregate, run_stress, run_with_transport, warmup_len, Outcome};
pub use transport::{FnTransport, HttpTransport, Sample, Transport};

#[derive(Debug, Error)]
pub enum LoadgenError {
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("target unreachable: {0}")]
    TargetUnreachable(String),
    #[error("invalid benchmark: {0}")]
    InvalidBench(String),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error("malformed report: {0}")]
    MalformedReport(String),
    #[error("load loop failed: {0}")]
    Runner(String),
}
