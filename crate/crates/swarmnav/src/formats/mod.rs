//! Versioned text and binary artifact formats.

pub mod checkpoint;
pub mod map;
pub mod report;
pub mod run;
pub mod scenario;
pub mod telemetry;
pub mod trajectory;

use std::path::Path;

use crate::error::{CliError, Result};

/// Splits off the first line and checks it is exactly `expected`
/// (e.g. `swarmnav-map v1`). A known kind with another version is refused
/// as incompatible.
pub(crate) fn strip_header<'a>(text: &'a str, expected: &str, path: &Path) -> Result<&'a str> {
    let (first, rest) = text.split_once('\n').unwrap_or((text, ""));
    let first = first.trim_end_matches('\r');
    if first == expected {
        return Ok(rest);
    }
    let kind = expected.split(' ').next().unwrap_or(expected);
    match first.split_once(' ') {
        Some((k, version)) if k == kind => Err(CliError::Incompatible(format!(
            "{}: unsupported {kind} version {version:?}, this build reads {}",
            path.display(),
            &expected[kind.len() + 1..]
        ))),
        _ => Err(CliError::parse(path, 1, format!("expected header {expected:?}, found {first:?}"))),
    }
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(CliError::io(path))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(CliError::io(path))
}

/// Shortest decimal form that parses back to the same bits.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

pub(crate) fn parse_f64(s: &str, path: &Path, line: usize, what: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| CliError::parse(path, line, format!("{what}: {s:?} is not a number")))
}

/// Parses a TOML body that follows a one-line header, reporting errors with
/// file line numbers.
pub(crate) fn parse_toml<T: serde::de::DeserializeOwned>(body: &str, path: &Path) -> Result<T> {
    toml::from_str(body).map_err(|e| {
        let line = e.span().map_or(1, |s| body[..s.start].matches('\n').count() + 2);
        CliError::parse(path, line, e.message().to_string())
    })
}
