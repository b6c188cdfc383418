//! Request handling independent of the HTTP transport.

use std::sync::Arc;
use std::time::Instant;

use axum::http::Method;
use subtle::ConstantTimeEq;

use super::api::{ApiRequest, ApiResponse, GatewayError, Params};
use super::calllog::CallLogger;
use super::config::Limits;
use super::input::{decode_imgraw, fetch_image_url};
use super::pool::{HealthStatus, WorkerPool};
use super::worker::Worker;
use crate::metrics::duration_ms;
use crate::persistence::{
    truncate_chars, ApiCallRecord, PersistenceError, Store, TerminalType, Timestamp, API_NAME_MAX,
    IMG_PATH_MAX,
};
use crate::registry::{fnv1a64, HttpMethod, Registry};

/// Maximum accepted length of a `dm/` record id, in bytes.
pub const MAX_ID_BYTES: usize = 256;

/// Shared state behind every request. Cheap to clone.
#[derive(Clone)]
pub struct Gateway {
    inner: Arc<Inner>,
}

struct Inner {
    registry: Registry,
    store: Arc<Store>,
    pool: WorkerPool<Worker>,
    logger: CallLogger,
    http: reqwest::Client,
    limits: Limits,
}

/// Where the input bytes came from; recorded as the call's `img_path`.
enum Source {
    Raw(Vec<u8>),
    Url(String),
    Id(String),
}

impl Source {
    fn img_path(&self) -> String {
        let path = match self {
            Self::Raw(bytes) => format!("imgraw:{:016x}", fnv1a64(bytes)),
            Self::Url(url) => url.clone(),
            Self::Id(id) => format!("id:{id}"),
        };
        truncate_chars(&path, IMG_PATH_MAX)
    }
}

impl Gateway {
    pub fn new(
        registry: Registry,
        store: Arc<Store>,
        pool: WorkerPool<Worker>,
        limits: Limits,
    ) -> Self {
        let http = reqwest::Client::builder()
            .connect_timeout(limits.fetch_timeout)
            .timeout(limits.fetch_timeout)
            .build()
            .expect("build HTTP client");
        let logger = CallLogger::spawn(Arc::clone(&store));
        Self {
            inner: Arc::new(Inner {
                registry,
                store,
                pool,
                logger,
                http,
                limits,
            }),
        }
    }

    /// Gateway with `workers` local workers over `registry`.
    pub fn with_local_workers(registry: Registry, store: Arc<Store>, workers: usize, limits: Limits) -> Self {
        let pool = WorkerPool::new(
            (0..workers)
                .map(|i| Worker::local(format!("local-{i}"), registry.clone()))
                .collect(),
            Default::default(),
        );
        Self::new(registry, store, pool, limits)
    }

    pub fn registry(&self) -> &Registry {
        &self.inner.registry
    }

    pub fn store(&self) -> &Arc<Store> {
        &self.inner.store
    }

    pub fn pool(&self) -> &WorkerPool<Worker> {
        &self.inner.pool
    }

    pub fn limits(&self) -> Limits {
        self.inner.limits
    }

    pub fn logger(&self) -> &CallLogger {
        &self.inner.logger
    }

    /// Waits until every call record logged so far is in the store.
    pub async fn flush_logs(&self) {
        self.inner.logger.flush().await;
    }

    /// Resolves `user_key` to a username.
    pub fn authenticate(&self, user_key: Option<&str>) -> Result<String, GatewayError> {
        let key = user_key.filter(|k| !k.is_empty()).ok_or(GatewayError::Unauthorized)?;
        match self.inner.store.lookup_user_by_key(key) {
            Ok(user) if bool::from(user.userkey.as_bytes().ct_eq(key.as_bytes())) => Ok(user.username),
            Ok(_) | Err(PersistenceError::NotFound) => Err(GatewayError::Unauthorized),
            Err(e) => Err(GatewayError::Internal(e.to_string())),
        }
    }

    /// Serves one API call. Never panics on malformed input; every request
    /// that gets past authentication is logged exactly once.
    pub async fn route_request(&self, request: ApiRequest) -> ApiResponse {
        let start = Instant::now();
        let username = match self.authenticate(request.user_key.as_deref()) {
            Ok(name) => name,
            Err(e) => return ApiResponse::error(&e, duration_ms(start.elapsed())),
        };
        let terminal_type = request.terminal_type.clone().unwrap_or(TerminalType::Api);
        let (outcome, img_path) = self.serve_authenticated(&request).await;
        let elapse = duration_ms(start.elapsed());
        let response = match &outcome {
            Ok(output) => ApiResponse::ok(output, elapse),
            Err(e) => ApiResponse::error(e, elapse),
        };
        self.inner.logger.log(ApiCallRecord {
            username,
            api_name: truncate_chars(&request.route, API_NAME_MAX),
            api_elapse: elapse,
            api_call_datetime: Timestamp::now(),
            terminal_type,
            img_path,
        });
        response
    }

    async fn serve_authenticated(
        &self,
        request: &ApiRequest,
    ) -> (Result<crate::registry::ServiceOutput, GatewayError>, String) {
        let mut img_path = String::new();
        let result = async {
            let service = self
                .inner
                .registry
                .lookup(&request.route)
                .map_err(|_| GatewayError::NotFound(request.route.clone()))?;
            let expected = match service.method {
                HttpMethod::Get => Method::GET,
                HttpMethod::Post => Method::POST,
            };
            if request.method != expected {
                return Err(GatewayError::MethodNotAllowed {
                    route: request.route.clone(),
                    method: request.method.to_string(),
                });
            }
            request.terminal_type.clone().map_err(GatewayError::BadRequest)?;
            let params = request.params.clone().map_err(GatewayError::BadRequest)?;
            let source = self.select_source(service.method, params)?;
            img_path = source.img_path();
            let input = match source {
                Source::Raw(bytes) => bytes,
                Source::Id(id) => id.into_bytes(),
                Source::Url(url) => {
                    fetch_image_url(
                        &self.inner.http,
                        &url,
                        self.inner.limits.fetch_timeout,
                        self.inner.limits.max_image_bytes,
                    )
                    .await?
                }
            };
            let (index, worker) = self.inner.pool.dispatch()?;
            let result = worker.execute(&request.route, input).await;
            if matches!(result, Err(GatewayError::WorkerFailed(_))) {
                // Feed transport failures into the same hysteresis the probes use.
                if self.inner.pool.health(index).record(false) == HealthStatus::Unhealthy {
                    tracing::warn!(worker = worker.name(), "worker marked unhealthy");
                }
            }
            result
        }
        .await;
        if img_path.is_empty() {
            img_path = "-".into();
        }
        (result, img_path)
    }

    /// Enforces the parameter column: `imgraw` xor `imgurl` for POST
    /// services, `id` alone for GET services.
    fn select_source(&self, method: HttpMethod, params: Params) -> Result<Source, GatewayError> {
        match (method, params) {
            (HttpMethod::Post, Params { imgraw: Some(raw), imgurl: None, id: None }) => {
                decode_imgraw(&raw, self.inner.limits.max_image_bytes).map(Source::Raw)
            }
            (HttpMethod::Post, Params { imgraw: None, imgurl: Some(url), id: None }) => {
                if url.is_empty() {
                    Err(GatewayError::BadRequest("imgurl is empty".into()))
                } else {
                    Ok(Source::Url(url))
                }
            }
            (HttpMethod::Post, _) => Err(GatewayError::BadRequest(
                "exactly one of imgraw or imgurl is required".into(),
            )),
            (HttpMethod::Get, Params { imgraw: None, imgurl: None, id: Some(id) }) => {
                if id.is_empty() || id.len() > MAX_ID_BYTES {
                    Err(GatewayError::BadRequest(format!(
                        "id must be 1 to {MAX_ID_BYTES} bytes"
                    )))
                } else {
                    Ok(Source::Id(id))
                }
            }
            (HttpMethod::Get, _) => Err(GatewayError::BadRequest("exactly the id parameter is required".into())),
        }
    }

    /// One probe round over every worker; returns the resulting statuses.
    pub async fn health_check(&self, probe_timeout: std::time::Duration) -> Vec<HealthStatus> {
        let mut statuses = Vec::with_capacity(self.inner.pool.len());
        for (_, worker, health) in self.inner.pool.workers() {
            let ok = worker.probe(probe_timeout).await;
            statuses.push(health.record(ok));
        }
        statuses
    }
}
