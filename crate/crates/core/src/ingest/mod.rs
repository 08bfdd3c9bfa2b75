//! Block timestamps from CSV exports or a Tendermint-compatible RPC
//! endpoint, and their conversion into inter-block interval series.
//!
//! Times are proposer header times, kept at nanosecond resolution.
//! Intervals are emitted as `f64` seconds.

mod csv_io;
mod rpc;
mod series;

use chrono::{DateTime, Utc};
use thiserror::Error;

pub use csv_io::{
    parse_csv, read_interval_seconds, write_csv, write_drop_log, write_intervals, CsvSchema, ParsedCsv,
    RowError, TimeFormat,
};
pub use rpc::{fetch_blocks, FetchOptions, TlsOptions};
pub use series::{compute_intervals, BlockTimeSeries, DropEntry, DropReason, Interval};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BlockRecord {
    pub height: u64,
    pub time: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IngestError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("line {line}: {message}")]
    Format { line: u64, message: String },
    #[error("{} malformed row(s); first at line {}: {}", .0.len(), .0[0].line, .0[0].message)]
    MalformedRows(Vec<RowError>),
    #[error("csv: {0}")]
    Csv(String),
    #[error("io: {0}")]
    Io(String),
    #[error("transport error for {endpoint}: {message}{}", status.map(|s| format!(" (last status {s})")).unwrap_or_default())]
    Transport {
        endpoint: String,
        status: Option<u16>,
        message: String,
    },
    #[error("protocol error at `{path}`: {message}")]
    Protocol { path: String, message: String },
    #[error("integrity error: {0}")]
    Integrity(String),
    #[error("domain error: {0}")]
    Domain(String),
}

impl From<csv::Error> for IngestError {
    fn from(e: csv::Error) -> Self {
        match e.kind() {
            csv::ErrorKind::Io(io) => IngestError::Io(io.to_string()),
            _ => IngestError::Csv(e.to_string()),
        }
    }
}

impl From<std::io::Error> for IngestError {
    fn from(e: std::io::Error) -> Self {
        IngestError::Io(e.to_string())
    }
}

pub type Result<T, E = IngestError> = std::result::Result<T, E>;
