//! On-disk formats. CSV numbers use Rust's shortest round-trip float
//! rendering, which is locale-independent and parses back bit-exactly.

pub mod config;
pub mod demographics;
pub mod log;
pub mod meta;
pub mod trace;

use neurofeed_core::session::SessionError;
use neurofeed_core::signal::SignalError;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("unexpected header: expected `{expected}`, found `{found}`")]
    Header { expected: String, found: String },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Session(#[from] SessionError),
}

pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

pub(crate) fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub(crate) fn parse_field<T: std::str::FromStr>(
    line: u64,
    column: &str,
    raw: &str,
) -> Result<T, FormatError>
where
    T::Err: std::fmt::Display,
{
    raw.parse().map_err(|e: T::Err| FormatError::Parse {
        line,
        message: format!("column `{column}`: {e} (`{raw}`)"),
    })
}

pub(crate) fn parse_opt_f64(line: u64, column: &str, raw: &str) -> Result<Option<f64>, FormatError> {
    if raw.is_empty() {
        Ok(None)
    } else {
        parse_field(line, column, raw).map(Some)
    }
}

pub(crate) fn check_header(found: &csv::StringRecord, expected: &[&str]) -> Result<(), FormatError> {
    if found.iter().eq(expected.iter().copied()) {
        Ok(())
    } else {
        Err(FormatError::Header {
            expected: expected.join(","),
            found: found.iter().collect::<Vec<_>>().join(","),
        })
    }
}
