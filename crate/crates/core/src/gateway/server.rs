//! HTTP transport: maps requests onto [`Gateway::route_request`].
//!
//! - `GET  /healthz` — 200 while serving
//! - `*    {prefix}{route}` — the recognition APIs
//! - `GET  /calls?api_name=&limit=` — the caller's own call log, newest first
//! - `POST /internal/infer` — worker-to-worker inference
//! - `GET  /console/*` — static console bundle, when configured

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use axum::body::{to_bytes, Body, Bytes};
use axum::extract::{Query, State};
use axum::http::{header, HeaderMap, Method, Request, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;
use tokio::net::TcpListener;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

use super::api::{ApiRequest, ApiResponse, GatewayError, Params, API_KEY_HEADER, TERMINAL_TYPE_HEADER};
use super::config::{normalize_prefix, GatewayConfig};
use super::pool::WorkerPool;
use super::service::Gateway;
use super::worker::{parse_worker_spec, InferError, InferRequest, INTERNAL_INFER_PATH, WORKER_TOKEN_HEADER};
use crate::persistence::{CallFilter, PersistenceError, Store, TerminalType};
use crate::registry::Registry;

pub const HEALTH_PATH: &str = "/healthz";
pub const CALLS_PATH: &str = "/calls";
const MAX_CALLS_LIMIT: usize = 1000;

#[derive(Clone)]
struct AppState {
    gateway: Gateway,
    prefix: Arc<str>,
    worker_token: Option<Arc<str>>,
}

/// Options for [`router`] beyond the gateway itself.
#[derive(Debug, Clone, Default)]
pub struct RouterOptions {
    pub prefix: Option<String>,
    pub console_dir: Option<PathBuf>,
    pub worker_token: Option<String>,
}

pub fn router(gateway: Gateway, options: RouterOptions) -> Router {
    let state = AppState {
        gateway,
        prefix: normalize_prefix(options.prefix.as_deref().unwrap_or("/api/")).into(),
        worker_token: options.worker_token.map(Into::into),
    };
    let mut app = Router::new()
        .route(HEALTH_PATH, get(|| async { "ok" }))
        .route(CALLS_PATH, get(list_calls))
        .route(INTERNAL_INFER_PATH, post(internal_infer));
    if let Some(dir) = options.console_dir {
        app = app.nest_service("/console", tower_http::services::ServeDir::new(dir));
    }
    app.fallback(api_call).with_state(state)
}

fn json_response(resp: &ApiResponse) -> Response {
    let status = StatusCode::from_u16(resp.http_status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    (status, Json(resp)).into_response()
}

fn header_str<'a>(headers: &'a HeaderMap, name: &str) -> Option<&'a str> {
    headers.get(name).and_then(|v| v.to_str().ok())
}

fn parse_terminal(headers: &HeaderMap) -> Result<TerminalType, String> {
    match headers.get(TERMINAL_TYPE_HEADER) {
        None => Ok(TerminalType::Api),
        Some(v) => v
            .to_str()
            .ok()
            .and_then(|s| s.trim().parse::<i64>().ok())
            .and_then(TerminalType::from_code)
            .ok_or_else(|| "x-terminal-type must be an integer 0..=4".to_string()),
    }
}

/// Collects `imgraw` / `imgurl` / `id` from urlencoded pairs; repeats are an error.
fn params_from_pairs<'a>(pairs: impl Iterator<Item = (std::borrow::Cow<'a, str>, std::borrow::Cow<'a, str>)>) -> Result<Params, String> {
    let mut params = Params::default();
    for (key, value) in pairs {
        let slot = match key.as_ref() {
            "imgraw" => &mut params.imgraw,
            "imgurl" => &mut params.imgurl,
            "id" => &mut params.id,
            _ => continue,
        };
        if slot.replace(value.into_owned()).is_some() {
            return Err(format!("parameter {key:?} given more than once"));
        }
    }
    Ok(params)
}

fn parse_body(headers: &HeaderMap, body: &[u8]) -> Result<Params, String> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(Params::default());
    }
    let content_type = header_str(headers, header::CONTENT_TYPE.as_str()).unwrap_or("");
    let is_json = content_type.starts_with("application/json")
        || (!content_type.starts_with("application/x-www-form-urlencoded")
            && body.iter().find(|b| !b.is_ascii_whitespace()) == Some(&b'{'));
    if is_json {
        let value: serde_json::Value =
            serde_json::from_slice(body).map_err(|e| format!("malformed JSON body: {e}"))?;
        let object = value.as_object().ok_or("JSON body must be an object")?;
        let field = |name: &str| -> Result<Option<String>, String> {
            match object.get(name) {
                None | Some(serde_json::Value::Null) => Ok(None),
                Some(serde_json::Value::String(s)) => Ok(Some(s.clone())),
                Some(_) => Err(format!("{name} must be a string")),
            }
        };
        Ok(Params {
            imgraw: field("imgraw")?,
            imgurl: field("imgurl")?,
            id: field("id")?,
        })
    } else {
        params_from_pairs(url::form_urlencoded::parse(body))
    }
}

/// Builds the transport-independent request from HTTP parts.
pub fn api_request_from_http(route: &str, method: Method, uri: &Uri, headers: &HeaderMap, body: Result<Bytes, String>) -> ApiRequest {
    let query = uri.query().unwrap_or("");
    let params = body.and_then(|body| {
        let from_query = params_from_pairs(url::form_urlencoded::parse(query.as_bytes()))?;
        let from_body = parse_body(headers, &body)?;
        // Query and body must not both carry the same parameter.
        let merge = |a: Option<String>, b: Option<String>, name: &str| match (a, b) {
            (Some(_), Some(_)) => Err(format!("parameter {name:?} given more than once")),
            (a, b) => Ok(a.or(b)),
        };
        Ok(Params {
            imgraw: merge(from_query.imgraw, from_body.imgraw, "imgraw")?,
            imgurl: merge(from_query.imgurl, from_body.imgurl, "imgurl")?,
            id: merge(from_query.id, from_body.id, "id")?,
        })
    });
    ApiRequest {
        route: route.to_string(),
        method,
        user_key: header_str(headers, API_KEY_HEADER).map(str::to_string),
        terminal_type: parse_terminal(headers),
        params,
    }
}

async fn api_call(State(state): State<AppState>, request: Request<Body>) -> Response {
    let (parts, body) = request.into_parts();
    let path = parts.uri.path();
    let Some(route) = path.strip_prefix(&*state.prefix) else {
        let err = GatewayError::NotFound(path.to_string());
        return json_response(&ApiResponse::error(&err, 0.0));
    };
    let limit = state.gateway.limits().max_body_bytes;
    let body = to_bytes(body, limit)
        .await
        .map_err(|_| format!("request body exceeds {limit} bytes"));
    let api_request = api_request_from_http(route, parts.method.clone(), &parts.uri, &parts.headers, body);
    json_response(&state.gateway.route_request(api_request).await)
}

#[derive(Debug, Deserialize)]
struct CallsQuery {
    api_name: Option<String>,
    limit: Option<usize>,
}

async fn list_calls(
    State(state): State<AppState>,
    headers: HeaderMap,
    query: Result<Query<CallsQuery>, axum::extract::rejection::QueryRejection>,
) -> Response {
    let start = std::time::Instant::now();
    let elapse = || crate::metrics::duration_ms(start.elapsed());
    let username = match state.gateway.authenticate(header_str(&headers, API_KEY_HEADER)) {
        Ok(u) => u,
        Err(e) => return json_response(&ApiResponse::error(&e, elapse())),
    };
    let Ok(Query(query)) = query else {
        let err = GatewayError::BadRequest("invalid query string".into());
        return json_response(&ApiResponse::error(&err, elapse()));
    };
    let limit = query.limit.unwrap_or(20);
    if limit == 0 || limit > MAX_CALLS_LIMIT {
        let err = GatewayError::BadRequest(format!("limit must be 1..={MAX_CALLS_LIMIT}"));
        return json_response(&ApiResponse::error(&err, elapse()));
    }
    state.gateway.flush_logs().await;
    let filter = CallFilter {
        api_name: query.api_name.filter(|a| !a.is_empty()),
        ..CallFilter::for_user(username, limit)
    };
    let store = Arc::clone(state.gateway.store());
    let rows = tokio::task::spawn_blocking(move || store.query_calls(&filter)).await;
    match rows {
        Ok(Ok(rows)) => {
            let results: Vec<_> = rows
                .iter()
                .map(|r| {
                    json!({
                        "username": r.username,
                        "api_name": r.api_name,
                        "api_elapse": r.api_elapse,
                        "api_call_datetime": r.api_call_datetime.to_string(),
                        "terminal_type": r.terminal_type.code(),
                        "img_path": r.img_path,
                    })
                })
                .collect();
            let resp = ApiResponse {
                status: 0,
                message: "success".into(),
                elapse: elapse(),
                results: Some(json!(results)),
                http_status: 200,
            };
            json_response(&resp)
        }
        Ok(Err(e)) => json_response(&ApiResponse::error(&GatewayError::Internal(e.to_string()), elapse())),
        Err(e) => json_response(&ApiResponse::error(&GatewayError::Internal(e.to_string()), elapse())),
    }
}

async fn internal_infer(State(state): State<AppState>, headers: HeaderMap, body: Bytes) -> Response {
    let reply = |status: StatusCode, err: GatewayError| {
        (
            status,
            Json(InferError {
                status: err.status_code(),
                message: err.to_string(),
            }),
        )
            .into_response()
    };
    if let Some(expected) = &state.worker_token {
        let given = header_str(&headers, WORKER_TOKEN_HEADER).unwrap_or("");
        let ok: bool = subtle::ConstantTimeEq::ct_eq(given.as_bytes(), expected.as_bytes()).into();
        if !ok {
            return reply(StatusCode::UNAUTHORIZED, GatewayError::Unauthorized);
        }
    }
    let request: InferRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return reply(StatusCode::BAD_REQUEST, GatewayError::BadRequest(e.to_string())),
    };
    let input = match request.decode_input(state.gateway.limits().max_image_bytes) {
        Ok(i) => i,
        Err(e) => return reply(e.http_status(), e),
    };
    let registry = state.gateway.registry().clone();
    let route = request.route.clone();
    match tokio::task::spawn_blocking(move || registry.invoke(&route, &input)).await {
        Ok(Ok(output)) => Json(output).into_response(),
        Ok(Err(e)) => {
            let e = GatewayError::from(e);
            reply(e.http_status(), e)
        }
        Err(e) => reply(StatusCode::INTERNAL_SERVER_ERROR, GatewayError::Internal(e.to_string())),
    }
}

/// A server bound to a local port, running in the background.
pub struct RunningServer {
    addr: SocketAddr,
    gateway: Gateway,
    shutdown: Option<oneshot::Sender<()>>,
    server: JoinHandle<std::io::Result<()>>,
    prober: Option<JoinHandle<()>>,
}

impl RunningServer {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn gateway(&self) -> &Gateway {
        &self.gateway
    }

    /// Graceful stop: finishes in-flight requests, then flushes the call log.
    pub async fn shutdown(mut self) -> std::io::Result<()> {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(prober) = self.prober.take() {
            prober.abort();
        }
        let result = (&mut self.server)
            .await
            .unwrap_or_else(|e| Err(std::io::Error::other(e)));
        self.gateway.flush_logs().await;
        result
    }
}

/// Serves `gateway` on `listener`. With `probe_interval`, worker health is
/// probed in the background at that period.
pub async fn spawn_server(
    listener: TcpListener,
    gateway: Gateway,
    options: RouterOptions,
    probe_interval: Option<Duration>,
) -> std::io::Result<RunningServer> {
    let addr = listener.local_addr()?;
    let app = router(gateway.clone(), options);
    let (tx, rx) = oneshot::channel::<()>();
    let server = tokio::spawn(async move {
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = rx.await;
            })
            .await
    });
    let prober = probe_interval.map(|period| {
        let gateway = gateway.clone();
        tokio::spawn(async move {
            let mut ticker = tokio::time::interval(period);
            ticker.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
            loop {
                ticker.tick().await;
                gateway.health_check(period).await;
            }
        })
    });
    Ok(RunningServer {
        addr,
        gateway,
        shutdown: Some(tx),
        server,
        prober,
    })
}

#[derive(Debug, thiserror::Error)]
pub enum StartupError {
    #[error("storage: {0}")]
    Storage(#[from] PersistenceError),
    #[error("worker list: {0}")]
    Workers(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Builds the gateway described by `config` over `registry` and starts it.
pub async fn start(config: &GatewayConfig, registry: Registry) -> Result<RunningServer, StartupError> {
    let store = Arc::new(Store::open(&config.data_dir)?);
    let client = reqwest::Client::builder()
        .timeout(Duration::from_secs(30))
        .build()
        .map_err(|e| StartupError::Workers(e.to_string()))?;
    let workers = config
        .workers
        .iter()
        .filter(|w| !w.trim().is_empty())
        .enumerate()
        .map(|(i, spec)| parse_worker_spec(spec, i, &registry, &client, config.worker_token.as_deref()))
        .collect::<Result<Vec<_>, _>>()
        .map_err(StartupError::Workers)?;
    if workers.is_empty() {
        return Err(StartupError::Workers("at least one worker is required".into()));
    }
    let pool = WorkerPool::new(workers, config.thresholds());
    let gateway = Gateway::new(registry, store, pool, config.limits());
    let listener = TcpListener::bind(config.listen).await?;
    let options = RouterOptions {
        prefix: Some(config.prefix.clone()),
        console_dir: config.console_dir.clone(),
        worker_token: config.worker_token.clone(),
    };
    let server = spawn_server(listener, gateway, options, Some(config.probe_interval())).await?;
    tracing::info!(addr = %server.addr(), "gateway listening");
    Ok(server)
}
