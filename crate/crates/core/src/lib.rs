//! Inference gateway over pluggable recognition backends.
//!
//! - [`registry`]: service catalog, backend plugin contract, synthetic
//!   backends, face index and evaluation harness.
//! - [`metrics`]: Pearson correlation, MAE, accuracy, latency percentiles.
//! - [`gateway`]: the HTTP service with key authentication, call logging
//!   and round-robin dispatch over a worker pool.
//! - [`persistence`]: durable user and API-call tables.
//! - [`loadgen`]: stress runner, latency reports and throughput bench.

pub mod catalog;
pub mod gateway;
pub mod loadgen;
pub mod metrics;
pub mod registry;
pub mod persistence;
