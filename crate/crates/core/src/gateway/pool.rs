//! Round-robin worker pool with hysteresis-based health tracking.

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use super::api::GatewayError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HealthStatus {
    Healthy,
    Unhealthy,
}

/// Consecutive-result thresholds for flipping a worker's status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HealthThresholds {
    /// Consecutive failed probes that mark a healthy worker unhealthy.
    pub failures: u32,
    /// Consecutive successful probes that mark an unhealthy worker healthy.
    pub successes: u32,
}

impl Default for HealthThresholds {
    fn default() -> Self {
        Self {
            failures: 3,
            successes: 2,
        }
    }
}

#[derive(Debug, Default)]
struct Streaks {
    failures: u32,
    successes: u32,
}

/// Health state for one worker. Reads are lock-free; probe results are
/// folded in under a small lock.
#[derive(Debug)]
pub struct HealthTracker {
    healthy: AtomicBool,
    streaks: Mutex<Streaks>,
    thresholds: HealthThresholds,
}

impl HealthTracker {
    /// Workers start healthy.
    pub fn new(thresholds: HealthThresholds) -> Self {
        Self {
            healthy: AtomicBool::new(true),
            streaks: Mutex::default(),
            thresholds,
        }
    }

    pub fn status(&self) -> HealthStatus {
        if self.healthy.load(Ordering::Acquire) {
            HealthStatus::Healthy
        } else {
            HealthStatus::Unhealthy
        }
    }

    pub fn is_healthy(&self) -> bool {
        self.healthy.load(Ordering::Acquire)
    }

    /// Folds one probe outcome in and returns the resulting status.
    pub fn record(&self, probe_ok: bool) -> HealthStatus {
        let mut streaks = self.streaks.lock();
        if probe_ok {
            streaks.failures = 0;
            streaks.successes = streaks.successes.saturating_add(1);
            if streaks.successes >= self.thresholds.successes {
                self.healthy.store(true, Ordering::Release);
            }
        } else {
            streaks.successes = 0;
            streaks.failures = streaks.failures.saturating_add(1);
            if streaks.failures >= self.thresholds.failures {
                self.healthy.store(false, Ordering::Release);
            }
        }
        self.status()
    }

    /// Overrides the status and clears both streaks.
    pub fn force(&self, status: HealthStatus) {
        let mut streaks = self.streaks.lock();
        *streaks = Streaks::default();
        self.healthy
            .store(status == HealthStatus::Healthy, Ordering::Release);
    }
}

struct Entry<W> {
    worker: W,
    health: HealthTracker,
}

/// Ordered workers plus a rotating cursor.
///
/// [`WorkerPool::dispatch`] hands out healthy workers in strict rotation: the
/// cursor moves to just past the worker chosen, so an unhealthy worker is
/// skipped without its turn being given to the next one twice.
pub struct WorkerPool<W> {
    entries: Vec<Entry<W>>,
    cursor: AtomicUsize,
}

impl<W> WorkerPool<W> {
    pub fn new(workers: Vec<W>, thresholds: HealthThresholds) -> Self {
        Self {
            entries: workers
                .into_iter()
                .map(|worker| Entry {
                    worker,
                    health: HealthTracker::new(thresholds),
                })
                .collect(),
            cursor: AtomicUsize::new(0),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn worker(&self, index: usize) -> &W {
        &self.entries[index].worker
    }

    pub fn health(&self, index: usize) -> &HealthTracker {
        &self.entries[index].health
    }

    pub fn workers(&self) -> impl Iterator<Item = (usize, &W, &HealthTracker)> {
        self.entries
            .iter()
            .enumerate()
            .map(|(i, e)| (i, &e.worker, &e.health))
    }

    pub fn healthy_count(&self) -> usize {
        self.entries.iter().filter(|e| e.health.is_healthy()).count()
    }

    /// Next healthy worker in rotation, with its index.
    pub fn dispatch(&self) -> Result<(usize, &W), GatewayError> {
        let n = self.entries.len();
        if n == 0 {
            return Err(GatewayError::NoHealthyWorker);
        }
        let mut current = self.cursor.load(Ordering::Acquire);
        loop {
            let start = current % n;
            let chosen = (0..n)
                .map(|offset| (start + offset) % n)
                .find(|&i| self.entries[i].health.is_healthy())
                .ok_or(GatewayError::NoHealthyWorker)?;
            match self.cursor.compare_exchange_weak(
                current,
                (chosen + 1) % n,
                Ordering::AcqRel,
                Ordering::Acquire,
            ) {
                Ok(_) => return Ok((chosen, &self.entries[chosen].worker)),
                Err(actual) => current = actual,
            }
        }
    }
}
