//! Backend executors the dispatcher balances across.
//!
//! A [`Worker::Local`] runs inference in-process on the blocking thread pool.
//! A [`Worker::Remote`] forwards the decoded input to another gateway's
//! internal inference endpoint and is probed through its `/healthz`.

use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use url::Url;

use super::api::GatewayError;
use super::input::{decode_imgraw, encode_imgraw};
use crate::registry::{Registry, RegistryError, ServiceOutput};

/// Path of the worker-to-worker inference endpoint.
pub const INTERNAL_INFER_PATH: &str = "/internal/infer";
/// Header carrying the shared worker token, when one is configured.
pub const WORKER_TOKEN_HEADER: &str = "x-worker-token";

/// Body of an internal inference call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferRequest {
    pub route: String,
    /// Base-64 input bytes.
    pub input: String,
}

impl InferRequest {
    pub fn new(route: &str, input: &[u8]) -> Self {
        Self {
            route: route.to_string(),
            input: encode_imgraw(input),
        }
    }

    pub fn decode_input(&self, max_bytes: usize) -> Result<Vec<u8>, GatewayError> {
        decode_imgraw(&self.input, max_bytes)
    }
}

/// Error body of an internal inference call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferError {
    pub status: i32,
    pub message: String,
}

impl From<RegistryError> for GatewayError {
    fn from(e: RegistryError) -> Self {
        match e {
            RegistryError::EmptyIndex => Self::EmptyIndex,
            RegistryError::UnknownRoute(route) => Self::NotFound(route),
            RegistryError::EmptyInput => Self::BadRequest("empty input".into()),
            other => Self::Internal(other.to_string()),
        }
    }
}

#[derive(Clone)]
pub enum Worker {
    Local {
        name: String,
        registry: Registry,
    },
    Remote {
        name: String,
        base: Url,
        client: reqwest::Client,
        token: Option<String>,
    },
}

impl fmt::Debug for Worker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Local { name, .. } => write!(f, "Local({name})"),
            Self::Remote { name, base, .. } => write!(f, "Remote({name} @ {base})"),
        }
    }
}

impl Worker {
    pub fn local(name: impl Into<String>, registry: Registry) -> Self {
        Self::Local {
            name: name.into(),
            registry,
        }
    }

    pub fn remote(name: impl Into<String>, base: Url, client: reqwest::Client, token: Option<String>) -> Self {
        Self::Remote {
            name: name.into(),
            base,
            client,
            token,
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Self::Local { name, .. } | Self::Remote { name, .. } => name,
        }
    }

    pub async fn execute(&self, route: &str, input: Vec<u8>) -> Result<ServiceOutput, GatewayError> {
        match self {
            Self::Local { registry, .. } => {
                let registry = registry.clone();
                let route = route.to_string();
                tokio::task::spawn_blocking(move || registry.invoke(&route, &input))
                    .await
                    .map_err(|e| GatewayError::Internal(format!("worker task failed: {e}")))?
                    .map_err(GatewayError::from)
            }
            Self::Remote {
                base,
                client,
                token,
                ..
            } => {
                let url = base
                    .join(INTERNAL_INFER_PATH.trim_start_matches('/'))
                    .map_err(|e| GatewayError::Internal(e.to_string()))?;
                let mut req = client.post(url).json(&InferRequest::new(route, &input));
                if let Some(token) = token {
                    req = req.header(WORKER_TOKEN_HEADER, token);
                }
                let resp = req
                    .send()
                    .await
                    .map_err(|e| GatewayError::WorkerFailed(e.to_string()))?;
                let status = resp.status();
                let body = resp
                    .bytes()
                    .await
                    .map_err(|e| GatewayError::WorkerFailed(e.to_string()))?;
                if status.is_success() {
                    serde_json::from_slice(&body)
                        .map_err(|e| GatewayError::WorkerFailed(format!("bad worker reply: {e}")))
                } else {
                    let err: InferError = serde_json::from_slice(&body).map_err(|_| {
                        GatewayError::WorkerFailed(format!("worker answered {status}"))
                    })?;
                    Err(match err.status {
                        -7 => GatewayError::EmptyIndex,
                        _ => GatewayError::WorkerFailed(err.message),
                    })
                }
            }
        }
    }

    /// One health probe. Local workers always answer.
    pub async fn probe(&self, timeout: Duration) -> bool {
        match self {
            Self::Local { .. } => true,
            Self::Remote { base, client, .. } => {
                let Ok(url) = base.join("healthz") else {
                    return false;
                };
                matches!(
                    tokio::time::timeout(timeout, client.get(url).send()).await,
                    Ok(Ok(resp)) if resp.status().is_success()
                )
            }
        }
    }
}

/// Parses a worker list entry: `local` or an http(s) base URL.
pub fn parse_worker_spec(
    spec: &str,
    index: usize,
    registry: &Registry,
    client: &reqwest::Client,
    token: Option<&str>,
) -> Result<Worker, String> {
    let spec = spec.trim();
    if spec.eq_ignore_ascii_case("local") {
        return Ok(Worker::local(format!("local-{index}"), registry.clone()));
    }
    let mut base = Url::parse(spec).map_err(|e| format!("worker {spec:?}: {e}"))?;
    if !matches!(base.scheme(), "http" | "https") {
        return Err(format!("worker {spec:?} must be `local` or an http(s) URL"));
    }
    if !base.path().ends_with('/') {
        let path = format!("{}/", base.path());
        base.set_path(&path);
    }
    Ok(Worker::remote(
        format!("remote-{index}"),
        base,
        client.clone(),
        token.map(str::to_string),
    ))
}
