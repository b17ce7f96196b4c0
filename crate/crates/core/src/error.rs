use std::path::PathBuf;

use crate::env::UserId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("user {user} chose RB {choice}, but only {n_rbs} RBs exist")]
    InvalidChoice { user: UserId, choice: usize, n_rbs: usize },

    #[error("slot {t} is beyond the materialized horizon {horizon}")]
    Horizon { t: u64, horizon: u64 },

    #[error("{path}:{line}: {msg}")]
    TraceParse { path: PathBuf, line: usize, msg: String },

    #[error("trace for user {user} is missing slot {slot}")]
    TraceGap { user: UserId, slot: u64 },

    #[error("no position for user {user} at slot {slot}")]
    Trajectory { user: UserId, slot: u64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("window of {window} slots exceeds k_max = {k_max}")]
    Schedule { window: usize, k_max: usize },

    #[error("observation of length {len} does not fit k_max = {k_max}")]
    Encoding { len: usize, k_max: usize },

    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    Shape { context: &'static str, expected: usize, got: usize },

    #[error("config key `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("malformed weight snapshot: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config { key: key.into(), msg: msg.into() }
    }
}
