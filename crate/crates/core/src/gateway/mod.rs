//! HTTP gateway: authentication, parameter validation, image fetching,
//! load-balanced dispatch to workers and per-call logging.

pub mod api;
pub mod calllog;
pub mod config;
pub mod input;
pub mod pool;
pub mod server;
pub mod service;
pub mod worker;

pub use api::{ApiRequest, ApiResponse, GatewayError, Params, API_KEY_HEADER, TERMINAL_TYPE_HEADER};
pub use calllog::CallLogger;
pub use config::{GatewayConfig, Limits};
pub use pool::{HealthStatus, HealthThresholds, HealthTracker, WorkerPool};
pub use server::{router, spawn_server, start, RouterOptions, RunningServer, StartupError};
pub use service::Gateway;
pub use worker::{parse_worker_spec, Worker};
