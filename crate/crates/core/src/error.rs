//! Error type shared by every module of the engine.

use chrono::NaiveDate;
use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate account id `{account}` in snapshot as of {as_of}")]
    DuplicateAccount { account: String, as_of: NaiveDate },

    #[error("field `{field}` out of range for account `{account}`{}: {reason}", fmt_row(.row))]
    FieldOutOfRange {
        account: String,
        field: &'static str,
        reason: String,
        row: Option<u64>,
    },

    #[error("non-performing account `{account}` has no default date")]
    MissingDefaultDate { account: String },

    #[error("inconsistent dates for account `{account}`: {detail}")]
    InconsistentDates { account: String, detail: String },

    #[error("snapshot dates are not strictly increasing: {left} !< {right}")]
    NonMonotoneDates { left: NaiveDate, right: NaiveDate },

    #[error("record row {row} has as_of {found}, expected {expected}")]
    InconsistentAsOf {
        expected: NaiveDate,
        found: NaiveDate,
        row: u64,
    },

    #[error("invalid period event for account `{account}`: {reason}")]
    InvalidEvent { account: String, reason: String },

    #[error("account `{account}` is a new default without at-default EAD/LGD observations")]
    MissingAtDefaultData { account: String },

    #[error("zero exposure: {what} has no denominator")]
    ZeroExposure { what: &'static str },

    #[error(
        "identity breach in {identity}: lhs {lhs} vs rhs {rhs} \
         (|diff| {diff} exceeds tolerance {tolerance} at scale {scale})",
        diff = (lhs - rhs).abs()
    )]
    IdentityBreach {
        identity: &'static str,
        lhs: f64,
        rhs: f64,
        tolerance: f64,
        scale: f64,
    },

    #[error("unknown segmentation dimension `{dimension}`")]
    UnknownDimension { dimension: String },

    #[error("invalid configuration: {reason}")]
    ConfigInvalid { reason: String },

    #[error("invalid record at row {row}: {reason}")]
    InvalidRecord { row: u64, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn fmt_row(row: &Option<u64>) -> String {
    match row {
        Some(r) => format!(" (row {r})"),
        None => String::new(),
    }
}

impl Error {
    /// True for the class of failures that signal inconsistent inputs
    /// rather than malformed ones (CLI maps these to exit code 2).
    pub fn is_identity_breach(&self) -> bool {
        matches!(self, Error::IdentityBreach { .. })
    }
}
