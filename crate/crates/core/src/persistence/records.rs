use std::fmt;

use chrono::{DateTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};

use super::PersistenceError;

pub const USERNAME_MAX: usize = 16;
pub const API_NAME_MAX: usize = 20;
pub const IMG_PATH_MAX: usize = 100;
pub const ORGANIZATION_MAX: usize = 100;
pub const EMAIL_MAX: usize = 50;
pub const USERKEY_MAX: usize = 20;
pub const CREDENTIAL_MAX: usize = 12;

/// Client platform a call came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TerminalType {
    Web = 0,
    Android = 1,
    Ios = 2,
    MiniProgram = 3,
    Api = 4,
}

impl TerminalType {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: i64) -> Option<Self> {
        Some(match code {
            0 => Self::Web,
            1 => Self::Android,
            2 => Self::Ios,
            3 => Self::MiniProgram,
            4 => Self::Api,
            _ => return None,
        })
    }
}

/// How an account came to exist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegisterType {
    WebForm = 0,
    Imported = 1,
    AdminCreated = 2,
}

impl RegisterType {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: i64) -> Option<Self> {
        Some(match code {
            0 => Self::WebForm,
            1 => Self::Imported,
            2 => Self::AdminCreated,
            _ => return None,
        })
    }
}

/// Milliseconds since the Unix epoch, UTC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Timestamp(i64);

impl Timestamp {
    pub fn now() -> Self {
        Self(Utc::now().timestamp_millis())
    }

    pub fn from_millis(ms: i64) -> Self {
        Self(ms)
    }

    pub fn millis(self) -> i64 {
        self.0
    }

    pub fn to_datetime(self) -> DateTime<Utc> {
        Utc.timestamp_millis_opt(self.0)
            .single()
            .unwrap_or(DateTime::<Utc>::MIN_UTC)
    }
}

impl From<DateTime<Utc>> for Timestamp {
    fn from(dt: DateTime<Utc>) -> Self {
        Self(dt.timestamp_millis())
    }
}

impl fmt::Display for Timestamp {
    /// RFC 3339 with millisecond precision, e.g. `2026-10-18T09:30:00.125Z`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}",
            self.to_datetime()
                .to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
        )
    }
}

/// One row of the API call log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiCallRecord {
    pub username: String,
    pub api_name: String,
    /// Milliseconds.
    pub api_elapse: f64,
    pub api_call_datetime: Timestamp,
    pub terminal_type: TerminalType,
    pub img_path: String,
}

impl ApiCallRecord {
    pub fn validate(&self) -> Result<(), PersistenceError> {
        check_nonempty("username", &self.username)?;
        check_len("username", &self.username, USERNAME_MAX)?;
        check_nonempty("api_name", &self.api_name)?;
        check_len("api_name", &self.api_name, API_NAME_MAX)?;
        check_len("img_path", &self.img_path, IMG_PATH_MAX)?;
        if !self.api_elapse.is_finite() || self.api_elapse < 0.0 {
            return Err(PersistenceError::InvalidField {
                field: "api_elapse",
                reason: format!("{} is not a non-negative duration", self.api_elapse),
            });
        }
        Ok(())
    }
}

/// A stored account. The credential is only ever held as a salted digest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserRecord {
    pub username: String,
    pub register_datetime: Timestamp,
    pub register_type: RegisterType,
    pub user_organization: String,
    pub email: String,
    pub userkey: String,
    #[serde(skip_serializing)]
    pub credential_digest: String,
}

/// Input to [`Store::create_user`](super::Store::create_user).
#[derive(Debug, Clone)]
pub struct NewUser {
    pub username: String,
    pub register_type: RegisterType,
    pub user_organization: String,
    pub email: String,
    pub userkey: String,
    pub credential: String,
}

impl NewUser {
    pub fn validate(&self) -> Result<(), PersistenceError> {
        check_nonempty("username", &self.username)?;
        check_len("username", &self.username, USERNAME_MAX)?;
        check_len("user_organization", &self.user_organization, ORGANIZATION_MAX)?;
        check_len("email", &self.email, EMAIL_MAX)?;
        if !self.email.contains('@') {
            return Err(PersistenceError::InvalidField {
                field: "email",
                reason: "missing '@'".into(),
            });
        }
        check_nonempty("userkey", &self.userkey)?;
        check_len("userkey", &self.userkey, USERKEY_MAX)?;
        check_nonempty("credential", &self.credential)?;
        check_len("credential", &self.credential, CREDENTIAL_MAX)?;
        Ok(())
    }
}

fn check_len(field: &'static str, value: &str, max: usize) -> Result<(), PersistenceError> {
    let len = value.chars().count();
    if len > max {
        return Err(PersistenceError::FieldTooLong { field, max, len });
    }
    Ok(())
}

fn check_nonempty(field: &'static str, value: &str) -> Result<(), PersistenceError> {
    if value.is_empty() {
        return Err(PersistenceError::InvalidField {
            field,
            reason: "must not be empty".into(),
        });
    }
    Ok(())
}

/// Cuts `value` to at most `max` characters.
pub fn truncate_chars(value: &str, max: usize) -> String {
    value.chars().take(max).collect()
}
