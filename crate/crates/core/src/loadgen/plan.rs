//! Stress plans and their TOML file format.
//!
//! ```toml
//! base_url = "http://127.0.0.1:8080"
//! prefix = "/api/"          # optional, default "/api/"
//! user_key = "demo-key"
//! users = 4                 # virtual users, default 20
//! duration = 60             # seconds, or `requests = 1200`; default 60 s
//! qps = 20                  # optional pacing; omit for closed loop
//! terminal_type = 4         # optional X-Terminal-Type header
//! timeout_ms = 30000        # optional per-request timeout
//!
//! [[target]]
//! route = "cv/fbp"
//! imgraw_file = "face.jpg"  # or `imgraw` (base-64), `imgurl`, `id`
//!
//! [[target]]
//! route = "dm/zhihuliveeval"
//! method = "GET"            # optional; inferred from the payload
//! id = "12345"
//! ```
//!
//! Relative `imgraw_file` paths resolve against the plan file's directory.

use std::path::Path;
use std::time::Duration;

use serde::Deserialize;
use url::Url;

use super::LoadgenError;
use crate::gateway::input::encode_imgraw;
use crate::persistence::TerminalType;
use crate::registry::HttpMethod;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);
pub const DEFAULT_USERS: usize = 20;
pub const DEFAULT_DURATION: Duration = Duration::from_secs(60);

/// The one input parameter a request carries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Payload {
    /// Base-64 encoded image bytes.
    ImgRaw(String),
    ImgUrl(String),
    Id(String),
}

impl Payload {
    pub fn imgraw_bytes(bytes: &[u8]) -> Self {
        Self::ImgRaw(encode_imgraw(bytes))
    }

    fn method(&self) -> HttpMethod {
        match self {
            Self::ImgRaw(_) | Self::ImgUrl(_) => HttpMethod::Post,
            Self::Id(_) => HttpMethod::Get,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StressTarget {
    pub route: String,
    pub method: HttpMethod,
    pub payload: Payload,
}

impl StressTarget {
    /// Target whose method is implied by the payload.
    pub fn new(route: impl Into<String>, payload: Payload) -> Self {
        Self {
            route: route.into(),
            method: payload.method(),
            payload,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopCondition {
    Duration(Duration),
    TotalRequests(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StressPlan {
    pub base_url: Url,
    pub prefix: String,
    pub user_key: String,
    pub targets: Vec<StressTarget>,
    pub virtual_users: usize,
    pub stop: StopCondition,
    /// Fixed-interval pacing: request `i` starts no earlier than `i / qps`
    /// seconds into the run. `None` runs closed-loop.
    pub target_qps: Option<f64>,
    pub terminal_type: Option<TerminalType>,
    pub request_timeout: Duration,
}

/// Command-line overrides applied on top of a plan file.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PlanOverrides {
    pub users: Option<usize>,
    pub duration: Option<f64>,
    pub requests: Option<u64>,
    pub qps: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanFile {
    base_url: String,
    #[serde(default = "default_prefix")]
    prefix: String,
    user_key: String,
    users: Option<usize>,
    duration: Option<f64>,
    requests: Option<u64>,
    qps: Option<f64>,
    terminal_type: Option<i64>,
    timeout_ms: Option<u64>,
    #[serde(rename = "target", default)]
    targets: Vec<TargetEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TargetEntry {
    route: String,
    method: Option<String>,
    imgraw: Option<String>,
    imgraw_file: Option<String>,
    imgurl: Option<String>,
    id: Option<String>,
}

fn default_prefix() -> String {
    "/api/".into()
}

fn invalid(msg: impl Into<String>) -> LoadgenError {
    LoadgenError::InvalidPlan(msg.into())
}

fn seconds(value: f64, what: &str) -> Result<Duration, LoadgenError> {
    Duration::try_from_secs_f64(value)
        .ok()
        .filter(|d| !d.is_zero())
        .ok_or_else(|| invalid(format!("{what} must be a positive number of seconds")))
}

impl TargetEntry {
    fn into_target(self, base_dir: &Path) -> Result<StressTarget, LoadgenError> {
        let mut payloads = Vec::new();
        if let Some(raw) = self.imgraw {
            payloads.push(Payload::ImgRaw(raw));
        }
        if let Some(file) = self.imgraw_file {
            let path = base_dir.join(file);
            let bytes = std::fs::read(&path)
                .map_err(|e| invalid(format!("{}: {e}", path.display())))?;
            payloads.push(Payload::imgraw_bytes(&bytes));
        }
        if let Some(url) = self.imgurl {
            payloads.push(Payload::ImgUrl(url));
        }
        if let Some(id) = self.id {
            payloads.push(Payload::Id(id));
        }
        if payloads.len() != 1 {
            return Err(invalid(format!(
                "target {:?} needs exactly one of imgraw, imgraw_file, imgurl, id",
                self.route
            )));
        }
        let payload = payloads.remove(0);
        let mut target = StressTarget::new(self.route, payload);
        if let Some(method) = self.method {
            target.method = method
                .parse()
                .map_err(|_| invalid(format!("unknown method {method:?}")))?;
        }
        Ok(target)
    }
}

impl StressPlan {
    /// Closed-loop plan with [`DEFAULT_USERS`] virtual users.
    pub fn new(base_url: Url, user_key: impl Into<String>, targets: Vec<StressTarget>, stop: StopCondition) -> Self {
        Self {
            base_url,
            prefix: default_prefix(),
            user_key: user_key.into(),
            targets,
            virtual_users: DEFAULT_USERS,
            stop,
            target_qps: None,
            terminal_type: None,
            request_timeout: DEFAULT_TIMEOUT,
        }
    }

    pub fn load(path: &Path) -> Result<Self, LoadgenError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self, LoadgenError> {
        let file: PlanFile = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
        let stop = match (file.duration, file.requests) {
            (Some(d), None) => StopCondition::Duration(seconds(d, "duration")?),
            (None, Some(n)) => StopCondition::TotalRequests(n),
            (None, None) => StopCondition::Duration(DEFAULT_DURATION),
            (Some(_), Some(_)) => return Err(invalid("set at most one of duration or requests")),
        };
        let plan = Self {
            base_url: Url::parse(&file.base_url).map_err(|e| invalid(format!("base_url: {e}")))?,
            prefix: file.prefix,
            user_key: file.user_key,
            targets: file
                .targets
                .into_iter()
                .map(|t| t.into_target(base_dir))
                .collect::<Result<_, _>>()?,
            virtual_users: file.users.unwrap_or(DEFAULT_USERS),
            stop,
            target_qps: file.qps,
            terminal_type: file
                .terminal_type
                .map(|code| TerminalType::from_code(code).ok_or_else(|| invalid(format!("terminal_type {code}"))))
                .transpose()?,
            request_timeout: file.timeout_ms.map_or(DEFAULT_TIMEOUT, Duration::from_millis),
        };
        plan.validate()?;
        Ok(plan)
    }

    /// Applies command-line overrides; `duration` and `requests` replace the
    /// stop condition.
    pub fn apply(&mut self, overrides: PlanOverrides) -> Result<(), LoadgenError> {
        if let Some(users) = overrides.users {
            self.virtual_users = users;
        }
        match (overrides.duration, overrides.requests) {
            (Some(_), Some(_)) => return Err(invalid("set at most one of duration or requests")),
            (Some(d), None) => self.stop = StopCondition::Duration(seconds(d, "duration")?),
            (None, Some(n)) => self.stop = StopCondition::TotalRequests(n),
            (None, None) => {}
        }
        if let Some(qps) = overrides.qps {
            self.target_qps = Some(qps);
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<(), LoadgenError> {
        if !matches!(self.base_url.scheme(), "http" | "https") || self.base_url.host().is_none() {
            return Err(invalid("base_url must be an http(s) URL with a host"));
        }
        if self.virtual_users == 0 {
            return Err(invalid("users must be at least 1"));
        }
        if self.targets.is_empty() {
            return Err(invalid("at least one [[target]] is required"));
        }
        match self.stop {
            StopCondition::Duration(d) if d.is_zero() => return Err(invalid("duration must be positive")),
            StopCondition::TotalRequests(0) => return Err(invalid("requests must be at least 1")),
            _ => {}
        }
        if let Some(qps) = self.target_qps {
            if !(qps.is_finite() && qps > 0.0) {
                return Err(invalid("qps must be a positive number"));
            }
        }
        if self.request_timeout.is_zero() {
            return Err(invalid("timeout_ms must be positive"));
        }
        for t in &self.targets {
            if t.route.is_empty() {
                return Err(invalid("target route is empty"));
            }
            if t.method != t.payload.method() {
                return Err(invalid(format!(
                    "target {:?}: {} requests carry {}",
                    t.route,
                    t.method.as_str(),
                    match t.method {
                        HttpMethod::Get => "an id",
                        HttpMethod::Post => "imgraw or imgurl",
                    }
                )));
            }
        }
        Ok(())
    }

    /// Distinct target routes in first-appearance order: the report's rows.
    pub fn routes(&self) -> Vec<&str> {
        let mut routes: Vec<&str> = Vec::new();
        for t in &self.targets {
            if !routes.contains(&t.route.as_str()) {
                routes.push(&t.route);
            }
        }
        routes
    }
}
