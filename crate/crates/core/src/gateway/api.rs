//! Request and response shapes of the public API.

use axum::http::{Method, StatusCode};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::persistence::TerminalType;
use crate::registry::ServiceOutput;

/// Header carrying the caller's user key.
pub const API_KEY_HEADER: &str = "x-api-key";
/// Header carrying the numeric terminal type (0 web .. 4 api).
pub const TERMINAL_TYPE_HEADER: &str = "x-terminal-type";

/// Status of a successful response.
pub const STATUS_OK: i32 = 0;

/// Everything that can go wrong serving a request. Each variant has a fixed
/// HTTP status and a fixed negative `status` code in the JSON body.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GatewayError {
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("unauthorized")]
    Unauthorized,
    #[error("no such API: {0}")]
    NotFound(String),
    #[error("method {method} not allowed for {route}")]
    MethodNotAllowed { route: String, method: String },
    #[error("image fetch failed: {0}")]
    UpstreamFetchFailed(String),
    #[error("no healthy worker available")]
    NoHealthyWorker,
    #[error("face index is empty")]
    EmptyIndex,
    #[error("worker failed: {0}")]
    WorkerFailed(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl GatewayError {
    pub fn http_status(&self) -> StatusCode {
        match self {
            Self::BadRequest(_) => StatusCode::BAD_REQUEST,
            Self::Unauthorized => StatusCode::UNAUTHORIZED,
            Self::NotFound(_) => StatusCode::NOT_FOUND,
            Self::MethodNotAllowed { .. } => StatusCode::METHOD_NOT_ALLOWED,
            Self::UpstreamFetchFailed(_) => StatusCode::BAD_GATEWAY,
            Self::NoHealthyWorker => StatusCode::SERVICE_UNAVAILABLE,
            Self::EmptyIndex => StatusCode::CONFLICT,
            Self::WorkerFailed(_) => StatusCode::BAD_GATEWAY,
            Self::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    pub fn status_code(&self) -> i32 {
        match self {
            Self::BadRequest(_) => -1,
            Self::Unauthorized => -2,
            Self::NotFound(_) => -3,
            Self::MethodNotAllowed { .. } => -4,
            Self::UpstreamFetchFailed(_) => -5,
            Self::NoHealthyWorker => -6,
            Self::EmptyIndex => -7,
            Self::WorkerFailed(_) => -8,
            Self::Internal(_) => -9,
        }
    }
}

/// The three parameter forms. Exactly one must be present, and which one
/// depends on the route.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Params {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub imgraw: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub imgurl: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
}

impl Params {
    pub fn imgraw(b64: impl Into<String>) -> Self {
        Self {
            imgraw: Some(b64.into()),
            ..Self::default()
        }
    }

    pub fn imgurl(url: impl Into<String>) -> Self {
        Self {
            imgurl: Some(url.into()),
            ..Self::default()
        }
    }

    pub fn id(id: impl Into<String>) -> Self {
        Self {
            id: Some(id.into()),
            ..Self::default()
        }
    }
}

/// A parsed but unvalidated API call.
///
/// `params` is `Err` when the transport-level payload could not be parsed;
/// the error surfaces as a 400 only after the caller authenticates.
#[derive(Debug, Clone)]
pub struct ApiRequest {
    /// Path relative to the API prefix, e.g. `cv/plant`.
    pub route: String,
    pub method: Method,
    pub user_key: Option<String>,
    pub terminal_type: Result<TerminalType, String>,
    pub params: Result<Params, String>,
}

impl ApiRequest {
    pub fn new(route: impl Into<String>, method: Method, user_key: Option<&str>, params: Params) -> Self {
        Self {
            route: route.into(),
            method,
            user_key: user_key.map(str::to_string),
            terminal_type: Ok(TerminalType::Api),
            params: Ok(params),
        }
    }

    pub fn with_terminal(mut self, terminal: TerminalType) -> Self {
        self.terminal_type = Ok(terminal);
        self
    }
}

/// JSON envelope returned for every API call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiResponse {
    pub status: i32,
    pub message: String,
    /// Milliseconds spent handling the request inside the gateway.
    pub elapse: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub results: Option<Value>,
    #[serde(skip)]
    pub http_status: u16,
}

impl ApiResponse {
    pub fn ok(output: &ServiceOutput, elapse: f64) -> Self {
        Self {
            status: STATUS_OK,
            message: "success".into(),
            elapse,
            results: Some(results_json(output)),
            http_status: 200,
        }
    }

    pub fn error(err: &GatewayError, elapse: f64) -> Self {
        Self {
            status: err.status_code(),
            message: err.to_string(),
            elapse,
            results: None,
            http_status: err.http_status().as_u16(),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == STATUS_OK
    }

    /// Checks the envelope invariant: results iff OK, message always set on error.
    pub fn is_well_formed(&self) -> bool {
        if self.is_ok() {
            self.results.is_some() && self.http_status == 200
        } else {
            self.status < 0 && self.results.is_none() && !self.message.is_empty() && self.http_status >= 400
        }
    }
}

/// Classification: `[{"label", "confidence"}]`; regression: `{"score"}`;
/// retrieval: `[{"person_id", "similarity"}]`.
pub fn results_json(output: &ServiceOutput) -> Value {
    match output {
        ServiceOutput::Classification(c) => json!(c
            .top_k
            .iter()
            .map(|l| json!({"label": l.label, "confidence": l.confidence}))
            .collect::<Vec<_>>()),
        ServiceOutput::Regression(r) => json!({"score": r.score}),
        ServiceOutput::Retrieval(r) => json!(r
            .matches
            .iter()
            .map(|m| json!({"person_id": m.person_id, "similarity": m.similarity}))
            .collect::<Vec<_>>()),
    }
}
