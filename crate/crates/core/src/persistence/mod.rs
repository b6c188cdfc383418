//! Durable storage for user accounts and the API call log.
//!
//! Backed by SQLite in WAL mode. One writer connection serializes inserts;
//! a small pool of reader connections serves queries concurrently, and a
//! query never observes a half-written row.

mod records;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use parking_lot::Mutex;
use rand::RngCore;
use rusqlite::{params, Connection, ErrorCode, OpenFlags, OptionalExtension, Row};
use sha2::{Digest, Sha256};
use subtle::ConstantTimeEq;
use thiserror::Error;

pub use records::{
    truncate_chars, ApiCallRecord, NewUser, RegisterType, TerminalType, Timestamp, UserRecord,
    API_NAME_MAX, CREDENTIAL_MAX, EMAIL_MAX, IMG_PATH_MAX, ORGANIZATION_MAX, USERKEY_MAX,
    USERNAME_MAX,
};

pub const DATABASE_FILE: &str = "infergate.sqlite3";
pub const CALLS_CSV_HEADER: [&str; 6] = [
    "username",
    "api_name",
    "api_elapse",
    "api_call_datetime",
    "terminal_type",
    "img_path",
];
pub const USERS_CSV_HEADER: [&str; 6] = [
    "username",
    "register_datetime",
    "register_type",
    "user_organization",
    "email",
    "userkey",
];

const READERS: usize = 4;

#[derive(Debug, Error)]
pub enum PersistenceError {
    #[error("unknown user {0:?}")]
    UnknownUser(String),
    #[error("{field} is {len} characters, limit is {max}")]
    FieldTooLong {
        field: &'static str,
        max: usize,
        len: usize,
    },
    #[error("invalid {field}: {reason}")]
    InvalidField { field: &'static str, reason: String },
    #[error("username {0:?} already exists")]
    DuplicateUsername(String),
    #[error("userkey already registered")]
    DuplicateUserkey,
    #[error("not found")]
    NotFound,
    #[error("storage failure: {0}")]
    Storage(#[from] rusqlite::Error),
    #[error("io failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv failure: {0}")]
    Csv(#[from] csv::Error),
}

/// Optional constraints for [`Store::query_calls`]. Bounds are inclusive.
#[derive(Debug, Clone)]
pub struct CallFilter {
    pub username: Option<String>,
    pub api_name: Option<String>,
    pub since: Option<Timestamp>,
    pub until: Option<Timestamp>,
    pub limit: usize,
}

impl CallFilter {
    pub fn latest(limit: usize) -> Self {
        Self {
            username: None,
            api_name: None,
            since: None,
            until: None,
            limit,
        }
    }

    pub fn for_user(username: impl Into<String>, limit: usize) -> Self {
        Self {
            username: Some(username.into()),
            ..Self::latest(limit)
        }
    }
}

const SCHEMA: &str = "
CREATE TABLE IF NOT EXISTS users (
    username          TEXT    NOT NULL PRIMARY KEY,
    register_datetime INTEGER NOT NULL,
    register_type     INTEGER NOT NULL,
    user_organization TEXT    NOT NULL,
    email             TEXT    NOT NULL,
    userkey           TEXT    NOT NULL UNIQUE,
    credential_digest TEXT    NOT NULL
);
CREATE TABLE IF NOT EXISTS api_calls (
    id                INTEGER PRIMARY KEY AUTOINCREMENT,
    username          TEXT    NOT NULL REFERENCES users(username),
    api_name          TEXT    NOT NULL,
    api_elapse        REAL    NOT NULL,
    api_call_datetime INTEGER NOT NULL,
    terminal_type     INTEGER NOT NULL,
    img_path          TEXT    NOT NULL
);
CREATE INDEX IF NOT EXISTS api_calls_by_time ON api_calls(api_call_datetime, id);
CREATE INDEX IF NOT EXISTS api_calls_by_user ON api_calls(username, api_call_datetime);
";

fn configure(conn: &Connection) -> rusqlite::Result<()> {
    conn.busy_timeout(std::time::Duration::from_secs(10))?;
    conn.pragma_update(None, "foreign_keys", "ON")?;
    conn.pragma_update(None, "synchronous", "FULL")?;
    Ok(())
}

pub struct Store {
    path: PathBuf,
    writer: Mutex<Connection>,
    readers: Vec<Mutex<Connection>>,
    next_reader: AtomicUsize,
}

impl std::fmt::Debug for Store {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Store").field("path", &self.path).finish()
    }
}

impl Store {
    /// Opens (creating if needed) the database inside `data_dir`.
    pub fn open(data_dir: impl AsRef<Path>) -> Result<Self, PersistenceError> {
        std::fs::create_dir_all(data_dir.as_ref())?;
        let path = data_dir.as_ref().join(DATABASE_FILE);
        let writer = Connection::open(&path)?;
        writer.pragma_update(None, "journal_mode", "WAL")?;
        configure(&writer)?;
        writer.execute_batch(SCHEMA)?;

        let readers = (0..READERS)
            .map(|_| {
                let conn = Connection::open_with_flags(
                    &path,
                    OpenFlags::SQLITE_OPEN_READ_ONLY | OpenFlags::SQLITE_OPEN_NO_MUTEX,
                )?;
                configure(&conn)?;
                Ok(Mutex::new(conn))
            })
            .collect::<rusqlite::Result<Vec<_>>>()?;

        Ok(Self {
            path,
            writer: Mutex::new(writer),
            readers,
            next_reader: AtomicUsize::new(0),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn with_reader<T>(&self, f: impl FnOnce(&Connection) -> Result<T, PersistenceError>) -> Result<T, PersistenceError> {
        let start = self.next_reader.fetch_add(1, Ordering::Relaxed);
        for i in 0..self.readers.len() {
            if let Some(conn) = self.readers[(start + i) % self.readers.len()].try_lock() {
                return f(&conn);
            }
        }
        let conn = self.readers[start % self.readers.len()].lock();
        f(&conn)
    }

    pub fn create_user(&self, user: &NewUser) -> Result<UserRecord, PersistenceError> {
        user.validate()?;
        let record = UserRecord {
            username: user.username.clone(),
            register_datetime: Timestamp::now(),
            register_type: user.register_type,
            user_organization: user.user_organization.clone(),
            email: user.email.clone(),
            userkey: user.userkey.clone(),
            credential_digest: digest_credential(&user.credential),
        };
        let conn = self.writer.lock();
        let inserted = conn.execute(
            "INSERT INTO users (username, register_datetime, register_type, user_organization, email, userkey, credential_digest)
             VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7)",
            params![
                record.username,
                record.register_datetime.millis(),
                record.register_type.code(),
                record.user_organization,
                record.email,
                record.userkey,
                record.credential_digest,
            ],
        );
        match inserted {
            Ok(_) => Ok(record),
            Err(e) if is_constraint(&e) => {
                let msg = e.to_string();
                if msg.contains("users.userkey") {
                    Err(PersistenceError::DuplicateUserkey)
                } else {
                    Err(PersistenceError::DuplicateUsername(record.username))
                }
            }
            Err(e) => Err(e.into()),
        }
    }

    /// Exact, case-sensitive match on the user key.
    pub fn lookup_user_by_key(&self, userkey: &str) -> Result<UserRecord, PersistenceError> {
        self.with_reader(|conn| {
            conn.query_row(
                &format!("SELECT {USER_COLUMNS} FROM users WHERE userkey = ?1"),
                params![userkey],
                user_from_row,
            )
            .optional()?
            .ok_or(PersistenceError::NotFound)
        })
    }

    pub fn lookup_user(&self, username: &str) -> Result<UserRecord, PersistenceError> {
        self.with_reader(|conn| {
            conn.query_row(
                &format!("SELECT {USER_COLUMNS} FROM users WHERE username = ?1"),
                params![username],
                user_from_row,
            )
            .optional()?
            .ok_or(PersistenceError::NotFound)
        })
    }

    pub fn verify_credential(&self, username: &str, credential: &str) -> Result<bool, PersistenceError> {
        let user = self.lookup_user(username)?;
        Ok(verify_digest(&user.credential_digest, credential))
    }

    /// Every user, ordered by username.
    pub fn users(&self) -> Result<Vec<UserRecord>, PersistenceError> {
        self.with_reader(|conn| {
            let mut stmt = conn.prepare(&format!("SELECT {USER_COLUMNS} FROM users ORDER BY username"))?;
            let rows = stmt.query_map([], user_from_row)?;
            Ok(rows.collect::<rusqlite::Result<Vec<_>>>()?)
        })
    }

    pub fn record_api_call(&self, record: &ApiCallRecord) -> Result<(), PersistenceError> {
        self.record_api_calls(std::slice::from_ref(record))
    }

    /// Appends `records` in one transaction: all are stored or none.
    pub fn record_api_calls(&self, records: &[ApiCallRecord]) -> Result<(), PersistenceError> {
        for record in records {
            record.validate()?;
        }
        let mut conn = self.writer.lock();
        let tx = conn.transaction()?;
        {
            let mut stmt = tx.prepare_cached(
                "INSERT INTO api_calls (username, api_name, api_elapse, api_call_datetime, terminal_type, img_path)
                 VALUES (?1, ?2, ?3, ?4, ?5, ?6)",
            )?;
            for r in records {
                let res = stmt.execute(params![
                    r.username,
                    r.api_name,
                    r.api_elapse,
                    r.api_call_datetime.millis(),
                    r.terminal_type.code(),
                    r.img_path,
                ]);
                match res {
                    Ok(_) => {}
                    Err(e) if is_constraint(&e) => {
                        return Err(PersistenceError::UnknownUser(r.username.clone()))
                    }
                    Err(e) => return Err(e.into()),
                }
            }
        }
        tx.commit()?;
        Ok(())
    }

    /// Matching calls, newest first.
    pub fn query_calls(&self, filter: &CallFilter) -> Result<Vec<ApiCallRecord>, PersistenceError> {
        if filter.limit == 0 {
            return Err(PersistenceError::InvalidField {
                field: "limit",
                reason: "must be at least 1".into(),
            });
        }
        self.with_reader(|conn| {
            let mut stmt = conn.prepare_cached(&format!(
                "SELECT {CALL_COLUMNS} FROM api_calls
                 WHERE (?1 IS NULL OR username = ?1)
                   AND (?2 IS NULL OR api_name = ?2)
                   AND (?3 IS NULL OR api_call_datetime >= ?3)
                   AND (?4 IS NULL OR api_call_datetime <= ?4)
                 ORDER BY api_call_datetime DESC, id DESC
                 LIMIT ?5"
            ))?;
            let rows = stmt.query_map(
                params![
                    filter.username,
                    filter.api_name,
                    filter.since.map(Timestamp::millis),
                    filter.until.map(Timestamp::millis),
                    i64::try_from(filter.limit).unwrap_or(i64::MAX),
                ],
                call_from_row,
            )?;
            Ok(rows.collect::<rusqlite::Result<Vec<_>>>()?)
        })
    }

    pub fn count_calls(&self) -> Result<u64, PersistenceError> {
        self.with_reader(|conn| {
            Ok(conn.query_row("SELECT COUNT(*) FROM api_calls", [], |r| r.get::<_, i64>(0))? as u64)
        })
    }

    /// Every call in insertion order, as CSV with [`CALLS_CSV_HEADER`].
    pub fn export_calls_csv<W: Write>(&self, out: W) -> Result<(), PersistenceError> {
        let mut csv = csv::Writer::from_writer(out);
        csv.write_record(CALLS_CSV_HEADER)?;
        let rows = self.with_reader(|conn| {
            let mut stmt = conn.prepare(&format!("SELECT {CALL_COLUMNS} FROM api_calls ORDER BY id"))?;
            let rows = stmt.query_map([], call_from_row)?;
            Ok(rows.collect::<rusqlite::Result<Vec<_>>>()?)
        })?;
        for r in rows {
            csv.write_record([
                r.username,
                r.api_name,
                r.api_elapse.to_string(),
                r.api_call_datetime.to_string(),
                r.terminal_type.code().to_string(),
                r.img_path,
            ])?;
        }
        csv.flush()?;
        Ok(())
    }

    /// Every user as CSV with [`USERS_CSV_HEADER`]. Credentials are omitted.
    pub fn export_users_csv<W: Write>(&self, out: W) -> Result<(), PersistenceError> {
        let mut csv = csv::Writer::from_writer(out);
        csv.write_record(USERS_CSV_HEADER)?;
        for u in self.users()? {
            csv.write_record([
                u.username,
                u.register_datetime.to_string(),
                u.register_type.code().to_string(),
                u.user_organization,
                u.email,
                u.userkey,
            ])?;
        }
        csv.flush()?;
        Ok(())
    }

    /// Checkpoints the WAL into the main database file and closes.
    pub fn close(self) -> Result<(), PersistenceError> {
        drop(self.readers);
        let writer = self.writer.into_inner();
        writer.pragma_update(None, "wal_checkpoint", "TRUNCATE")?;
        writer.close().map_err(|(_, e)| e)?;
        Ok(())
    }
}

const USER_COLUMNS: &str =
    "username, register_datetime, register_type, user_organization, email, userkey, credential_digest";
const CALL_COLUMNS: &str =
    "username, api_name, api_elapse, api_call_datetime, terminal_type, img_path";

fn user_from_row(row: &Row<'_>) -> rusqlite::Result<UserRecord> {
    let register_type: i64 = row.get(2)?;
    Ok(UserRecord {
        username: row.get(0)?,
        register_datetime: Timestamp::from_millis(row.get(1)?),
        register_type: RegisterType::from_code(register_type)
            .ok_or_else(|| bad_enum(2, register_type))?,
        user_organization: row.get(3)?,
        email: row.get(4)?,
        userkey: row.get(5)?,
        credential_digest: row.get(6)?,
    })
}

fn call_from_row(row: &Row<'_>) -> rusqlite::Result<ApiCallRecord> {
    let terminal: i64 = row.get(4)?;
    Ok(ApiCallRecord {
        username: row.get(0)?,
        api_name: row.get(1)?,
        api_elapse: row.get(2)?,
        api_call_datetime: Timestamp::from_millis(row.get(3)?),
        terminal_type: TerminalType::from_code(terminal).ok_or_else(|| bad_enum(4, terminal))?,
        img_path: row.get(5)?,
    })
}

fn bad_enum(column: usize, value: i64) -> rusqlite::Error {
    rusqlite::Error::IntegralValueOutOfRange(column, value)
}

fn is_constraint(e: &rusqlite::Error) -> bool {
    matches!(e, rusqlite::Error::SqliteFailure(f, _) if f.code == ErrorCode::ConstraintViolation)
}

/// `sha256$<salt hex>$<hex(sha256(salt ‖ credential))>` with a random 16-byte salt.
pub fn digest_credential(credential: &str) -> String {
    let mut salt = [0u8; 16];
    rand::rng().fill_bytes(&mut salt);
    format!("sha256${}${}", hex(&salt), hex(&salted_hash(&salt, credential)))
}

pub fn verify_digest(stored: &str, credential: &str) -> bool {
    let mut parts = stored.split('$');
    let (Some("sha256"), Some(salt), Some(expected), None) =
        (parts.next(), parts.next(), parts.next(), parts.next())
    else {
        return false;
    };
    let Some(salt) = unhex(salt) else {
        return false;
    };
    let actual = hex(&salted_hash(&salt, credential));
    actual.as_bytes().ct_eq(expected.as_bytes()).into()
}

fn salted_hash(salt: &[u8], credential: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(salt);
    h.update(credential.as_bytes());
    h.finalize().into()
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn unhex(s: &str) -> Option<Vec<u8>> {
    if !s.len().is_multiple_of(2) {
        return None;
    }
    (0..s.len())
        .step_by(2)
        .map(|i| u8::from_str_radix(s.get(i..i + 2)?, 16).ok())
        .collect()
}
