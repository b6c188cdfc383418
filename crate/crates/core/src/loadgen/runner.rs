//! The load loop and per-route aggregation.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use super::plan::{StopCondition, StressPlan};
use super::report::StressReport;
use super::transport::{HttpTransport, Sample, Transport};
use super::LoadgenError;
use crate::metrics::{summarize_latencies, LatencySummary};

/// Percentage of each route's successful samples treated as warmup.
pub const WARMUP_PERCENT: usize = 5;
/// Lower bound on the warmup sample count.
pub const WARMUP_MIN: usize = 5;

/// Number of leading successful samples excluded from a route's latency
/// statistics: 5% (rounded up), at least 5, always leaving one sample.
pub fn warmup_len(successes: usize) -> usize {
    if successes <= 1 {
        return 0;
    }
    (successes * WARMUP_PERCENT)
        .div_ceil(100)
        .max(WARMUP_MIN)
        .min(successes - 1)
}

/// One attempted request, as recorded by its virtual user.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Outcome {
    pub seq: u64,
    pub target: usize,
    pub sample: Sample,
}

/// Runs `plan` over HTTP.
pub async fn run_stress(plan: &StressPlan) -> Result<StressReport, LoadgenError> {
    let transport = Arc::new(HttpTransport::new(plan)?);
    run_with_transport(plan, transport).await
}

/// Runs `plan` through `transport`.
///
/// Request `seq` goes to target `seq % targets.len()`. Each virtual user
/// claims the next sequence number, waits for its slot when paced, sends,
/// and records the outcome in its own buffer; buffers are merged once all
/// users have stopped, so no sample is lost or counted twice.
pub async fn run_with_transport(
    plan: &StressPlan,
    transport: Arc<dyn Transport>,
) -> Result<StressReport, LoadgenError> {
    plan.validate()?;
    transport.preflight().await?;

    let next = Arc::new(AtomicU64::new(0));
    let targets = plan.targets.len();
    let stop = plan.stop;
    let interval = plan.target_qps.map(|qps| 1.0 / qps);
    let start = tokio::time::Instant::now();

    let mut users = Vec::with_capacity(plan.virtual_users);
    for _ in 0..plan.virtual_users {
        let next = Arc::clone(&next);
        let transport = Arc::clone(&transport);
        users.push(tokio::spawn(async move {
            let mut outcomes = Vec::new();
            loop {
                let seq = next.fetch_add(1, Ordering::Relaxed);
                let slot = interval.map(|i| start + Duration::from_secs_f64(seq as f64 * i));
                match stop {
                    StopCondition::TotalRequests(n) if seq >= n => break,
                    StopCondition::Duration(d) => {
                        let deadline = start + d;
                        let due = slot.unwrap_or_else(tokio::time::Instant::now);
                        if due >= deadline {
                            break;
                        }
                    }
                    _ => {}
                }
                if let Some(slot) = slot {
                    tokio::time::sleep_until(slot).await;
                }
                let target = (seq % targets as u64) as usize;
                let sample = transport.send(target, seq).await;
                outcomes.push(Outcome { seq, target, sample });
            }
            outcomes
        }));
    }

    let mut outcomes = Vec::new();
    for user in users {
        outcomes.extend(user.await.map_err(|e| LoadgenError::Runner(e.to_string()))?);
    }
    let wall_time = start.elapsed();
    aggregate(plan, outcomes, wall_time)
}

/// Builds the report from every recorded outcome.
pub fn aggregate(
    plan: &StressPlan,
    mut outcomes: Vec<Outcome>,
    wall_time: Duration,
) -> Result<StressReport, LoadgenError> {
    outcomes.sort_by_key(|o| o.seq);
    let routes = plan.routes();
    let mut latencies: Vec<Vec<Duration>> = vec![Vec::new(); routes.len()];
    let mut errors = vec![0u64; routes.len()];
    for o in &outcomes {
        let route = &plan.targets[o.target].route;
        let row = routes.iter().position(|r| r == route).expect("route of a plan target");
        if o.sample.ok {
            latencies[row].push(o.sample.latency);
        } else {
            errors[row] += 1;
        }
    }
    let rows = routes
        .iter()
        .zip(latencies)
        .zip(errors)
        .map(|((route, samples), errors)| {
            if samples.is_empty() {
                return Ok(LatencySummary::errors_only(*route, errors));
            }
            let measured = &samples[warmup_len(samples.len())..];
            let mut row = summarize_latencies(route, measured, errors)
                .map_err(|e| LoadgenError::Runner(e.to_string()))?;
            row.sample_count = samples.len() as u64;
            Ok(row)
        })
        .collect::<Result<Vec<_>, LoadgenError>>()?;
    StressReport::new(rows, wall_time, outcomes.len() as u64)
}

