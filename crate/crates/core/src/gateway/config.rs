//! Server configuration: command-line flags, then `INFERGATE_*` environment
//! variables, then built-in defaults.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::time::Duration;

use clap::Parser;

use super::pool::HealthThresholds;

pub const DEFAULT_MAX_IMAGE_BYTES: usize = 8 * 1024 * 1024;
pub const DEFAULT_MAX_BODY_BYTES: usize = 12 * 1024 * 1024;
pub const DEFAULT_FETCH_TIMEOUT_MS: u64 = 5_000;

#[derive(Debug, Clone, Parser)]
#[command(name = "infergate-server", about = "Serve the recognition APIs over HTTP")]
pub struct GatewayConfig {
    /// Address to listen on.
    #[arg(long, env = "INFERGATE_LISTEN", default_value = "127.0.0.1:8080")]
    pub listen: SocketAddr,

    /// Path prefix the API routes are mounted under.
    #[arg(long, env = "INFERGATE_PREFIX", default_value = "/api/")]
    pub prefix: String,

    /// Comma-separated workers: `local` or a peer gateway base URL.
    #[arg(long, env = "INFERGATE_WORKERS", value_delimiter = ',', default_value = "local,local")]
    pub workers: Vec<String>,

    /// Directory holding the database.
    #[arg(long, env = "INFERGATE_DATA_DIR", default_value = "./data")]
    pub data_dir: PathBuf,

    #[arg(long, env = "INFERGATE_MAX_IMAGE_BYTES", default_value_t = DEFAULT_MAX_IMAGE_BYTES)]
    pub max_image_bytes: usize,

    #[arg(long, env = "INFERGATE_MAX_BODY_BYTES", default_value_t = DEFAULT_MAX_BODY_BYTES)]
    pub max_body_bytes: usize,

    #[arg(long, env = "INFERGATE_FETCH_TIMEOUT_MS", default_value_t = DEFAULT_FETCH_TIMEOUT_MS)]
    pub fetch_timeout_ms: u64,

    /// Consecutive failed probes before a worker is taken out of rotation.
    #[arg(long, env = "INFERGATE_HEALTH_FAILURES", default_value_t = 3)]
    pub health_failures: u32,

    /// Consecutive good probes before a worker is put back.
    #[arg(long, env = "INFERGATE_HEALTH_SUCCESSES", default_value_t = 2)]
    pub health_successes: u32,

    #[arg(long, env = "INFERGATE_PROBE_INTERVAL_MS", default_value_t = 1_000)]
    pub probe_interval_ms: u64,

    /// Static console bundle served under `/console/`.
    #[arg(long, env = "INFERGATE_CONSOLE_DIR")]
    pub console_dir: Option<PathBuf>,

    /// Shared secret required on the internal inference endpoint.
    #[arg(long, env = "INFERGATE_WORKER_TOKEN")]
    pub worker_token: Option<String>,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self::parse_from(["infergate-server"])
    }
}

/// Resource limits applied per request.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub max_image_bytes: usize,
    pub max_body_bytes: usize,
    pub fetch_timeout: Duration,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            max_image_bytes: DEFAULT_MAX_IMAGE_BYTES,
            max_body_bytes: DEFAULT_MAX_BODY_BYTES,
            fetch_timeout: Duration::from_millis(DEFAULT_FETCH_TIMEOUT_MS),
        }
    }
}

impl GatewayConfig {
    pub fn limits(&self) -> Limits {
        Limits {
            max_image_bytes: self.max_image_bytes,
            max_body_bytes: self.max_body_bytes,
            fetch_timeout: Duration::from_millis(self.fetch_timeout_ms),
        }
    }

    pub fn thresholds(&self) -> HealthThresholds {
        HealthThresholds {
            failures: self.health_failures.max(1),
            successes: self.health_successes.max(1),
        }
    }

    pub fn probe_interval(&self) -> Duration {
        Duration::from_millis(self.probe_interval_ms.max(10))
    }

    /// `/api/`-style prefix: leading and trailing slash, no doubles.
    pub fn normalized_prefix(&self) -> String {
        normalize_prefix(&self.prefix)
    }
}

pub fn normalize_prefix(prefix: &str) -> String {
    let inner = prefix.trim_matches('/');
    if inner.is_empty() {
        "/".to_string()
    } else {
        format!("/{inner}/")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Defaults and environment overrides share one test: the process
    // environment is global and tests run in parallel.
    #[test]
    fn flags_beat_env_beat_defaults() {
        let c = GatewayConfig::try_parse_from(["x"]).unwrap();
        assert_eq!(c.limits(), Limits::default());
        assert_eq!(c.thresholds(), HealthThresholds::default());
        assert_eq!(c.probe_interval(), Duration::from_secs(1));
        assert_eq!(c.workers, ["local", "local"]);
        assert_eq!(c.normalized_prefix(), "/api/");

        std::env::set_var("INFERGATE_FETCH_TIMEOUT_MS", "750");
        std::env::set_var("INFERGATE_MAX_IMAGE_BYTES", "1000");
        let env_only = GatewayConfig::try_parse_from(["x"]).unwrap();
        assert_eq!(env_only.fetch_timeout_ms, 750);
        assert_eq!(env_only.max_image_bytes, 1000);
        let flagged = GatewayConfig::try_parse_from(["x", "--fetch-timeout-ms", "20"]).unwrap();
        assert_eq!(flagged.fetch_timeout_ms, 20);
        assert_eq!(flagged.max_image_bytes, 1000);
        std::env::remove_var("INFERGATE_FETCH_TIMEOUT_MS");
        std::env::remove_var("INFERGATE_MAX_IMAGE_BYTES");
        assert_eq!(GatewayConfig::try_parse_from(["x"]).unwrap().fetch_timeout_ms, 5_000);
    }

    #[test]
    fn worker_list_and_prefix() {
        let c = GatewayConfig::try_parse_from(["x", "--workers", "local,http://10.0.0.2:8080", "--prefix", "v1"]).unwrap();
        assert_eq!(c.workers, ["local", "http://10.0.0.2:8080"]);
        assert_eq!(c.normalized_prefix(), "/v1/");
        assert_eq!(normalize_prefix("/"), "/");
    }
}
