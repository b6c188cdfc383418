//! How a virtual user issues one request.
//!
//! [`HttpTransport`] talks to a real gateway. [`FnTransport`] answers from a
//! closure, for driving the runner with known latencies.

use std::future::Future;
use std::pin::Pin;
use std::time::{Duration, Instant};

use axum::body::Bytes;
use reqwest::header::{HeaderMap, HeaderValue, CONTENT_TYPE};
use url::Url;

use super::plan::{Payload, StressPlan, StressTarget};
use super::LoadgenError;
use crate::gateway::config::normalize_prefix;
use crate::gateway::{API_KEY_HEADER, TERMINAL_TYPE_HEADER};
use crate::registry::HttpMethod;

pub type BoxFuture<'a, T> = Pin<Box<dyn Future<Output = T> + Send + 'a>>;

/// Outcome of one request.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sample {
    pub latency: Duration,
    pub ok: bool,
}

pub trait Transport: Send + Sync {
    /// Checked once before any load is generated.
    fn preflight(&self) -> BoxFuture<'_, Result<(), LoadgenError>> {
        Box::pin(async { Ok(()) })
    }

    /// Sends request number `seq` (global across virtual users) to `target`,
    /// the plan's target at index `target_index`.
    fn send(&self, target_index: usize, seq: u64) -> BoxFuture<'_, Sample>;
}

struct Prepared {
    method: reqwest::Method,
    url: Url,
    body: Option<Bytes>,
}

/// Real HTTP against a gateway. Latency runs from the start of the request
/// write until the response body is fully read; a non-2xx status or any
/// transport failure is an error.
pub struct HttpTransport {
    client: reqwest::Client,
    base_url: Url,
    headers: HeaderMap,
    prepared: Vec<Prepared>,
}

impl HttpTransport {
    pub fn new(plan: &StressPlan) -> Result<Self, LoadgenError> {
        plan.validate()?;
        let client = reqwest::Client::builder()
            .timeout(plan.request_timeout)
            .pool_max_idle_per_host(plan.virtual_users)
            .build()
            .map_err(|e| LoadgenError::InvalidPlan(e.to_string()))?;
        let mut headers = HeaderMap::new();
        let key = HeaderValue::from_str(&plan.user_key)
            .map_err(|_| LoadgenError::InvalidPlan("user_key is not a valid header value".into()))?;
        headers.insert(API_KEY_HEADER, key);
        if let Some(t) = plan.terminal_type {
            headers.insert(TERMINAL_TYPE_HEADER, HeaderValue::from(u16::from(t.code())));
        }
        let root = format!(
            "{}{}",
            plan.base_url.as_str().trim_end_matches('/'),
            normalize_prefix(&plan.prefix)
        );
        let prepared = plan
            .targets
            .iter()
            .map(|t| prepare(&root, t))
            .collect::<Result<_, _>>()?;
        Ok(Self {
            client,
            base_url: plan.base_url.clone(),
            headers,
            prepared,
        })
    }
}

fn prepare(root: &str, target: &StressTarget) -> Result<Prepared, LoadgenError> {
    let mut url = Url::parse(&format!("{root}{}", target.route))
        .map_err(|e| LoadgenError::InvalidPlan(format!("route {:?}: {e}", target.route)))?;
    let method = match target.method {
        HttpMethod::Get => reqwest::Method::GET,
        HttpMethod::Post => reqwest::Method::POST,
    };
    let body = match &target.payload {
        Payload::Id(id) => {
            url.query_pairs_mut().append_pair("id", id);
            None
        }
        Payload::ImgRaw(raw) => Some(serde_json::json!({ "imgraw": raw })),
        Payload::ImgUrl(u) => Some(serde_json::json!({ "imgurl": u })),
    };
    Ok(Prepared {
        method,
        url,
        body: body.map(|b| Bytes::from(b.to_string())),
    })
}

impl Transport for HttpTransport {
    fn preflight(&self) -> BoxFuture<'_, Result<(), LoadgenError>> {
        Box::pin(async move {
            let addrs = self
                .base_url
                .socket_addrs(|| None)
                .map_err(|e| LoadgenError::TargetUnreachable(format!("{}: {e}", self.base_url)))?;
            let mut last = None;
            for addr in addrs {
                match tokio::time::timeout(Duration::from_secs(5), tokio::net::TcpStream::connect(addr)).await {
                    Ok(Ok(_)) => return Ok(()),
                    Ok(Err(e)) => last = Some(e.to_string()),
                    Err(_) => last = Some("connect timed out".into()),
                }
            }
            Err(LoadgenError::TargetUnreachable(format!(
                "{}: {}",
                self.base_url,
                last.unwrap_or_else(|| "no address".into())
            )))
        })
    }

    fn send(&self, target_index: usize, _seq: u64) -> BoxFuture<'_, Sample> {
        Box::pin(async move {
            let p = &self.prepared[target_index];
            let mut request = self
                .client
                .request(p.method.clone(), p.url.clone())
                .headers(self.headers.clone());
            if let Some(body) = &p.body {
                request = request.header(CONTENT_TYPE, "application/json").body(body.clone());
            }
            let start = Instant::now();
            let ok = match request.send().await {
                Ok(resp) => {
                    let success = resp.status().is_success();
                    resp.bytes().await.is_ok() && success
                }
                Err(_) => false,
            };
            Sample {
                latency: start.elapsed(),
                ok,
            }
        })
    }
}

/// Answers each request from a closure of `(target_index, seq)`, without I/O.
pub struct FnTransport<F> {
    respond: F,
}

impl<F> FnTransport<F>
where
    F: Fn(usize, u64) -> Sample + Send + Sync,
{
    pub fn new(respond: F) -> Self {
        Self { respond }
    }
}

impl<F> Transport for FnTransport<F>
where
    F: Fn(usize, u64) -> Sample + Send + Sync,
{
    fn send(&self, target_index: usize, seq: u64) -> BoxFuture<'_, Sample> {
        let sample = (self.respond)(target_index, seq);
        Box::pin(async move {
            tokio::task::yield_now().await;
            sample
        })
    }
}
