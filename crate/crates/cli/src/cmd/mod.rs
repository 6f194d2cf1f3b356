pub mod data;
pub mod memory;
pub mod replay;
pub mod session;
pub mod text;

use std::fs;
use std::io::Write;
use std::path::Path;

use serde_json::Value;

use crate::error::{CliError, CliResult};

/// Sentences from a file holding a JSON array (of strings or objects with a
/// `text` field) or, failing that, one sentence per non-empty line.
pub fn read_sentences(path: &Path) -> CliResult<Vec<String>> {
    let src = fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    parse_sentences(&src).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

pub fn parse_sentences(src: &str) -> Result<Vec<String>, String> {
    let trimmed = src.trim_start();
    if !trimmed.starts_with('[') {
        return Ok(src.lines().map(str::trim).filter(|l| !l.is_empty()).map(str::to_owned).collect());
    }
    let value: Value = serde_json::from_str(src).map_err(|e| e.to_string())?;
    let Value::Array(items) = value else { unreachable!() };
    items
        .into_iter()
        .enumerate()
        .map(|(i, item)| match item {
            Value::String(s) => Ok(s),
            Value::Object(ref o) => o
                .get("text")
                .and_then(Value::as_str)
                .map(str::to_owned)
                .ok_or_else(|| format!("item {i} has no text")),
            other => Err(format!("item {i}: unexpected {other}")),
        })
        .collect()
}

pub fn read_lines(path: &Path) -> CliResult<Vec<String>> {
    let src = fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    Ok(src.lines().map(str::to_owned).collect())
}

/// Writes `body` to `out`, or to stdout when no path is given.
pub fn emit(out: Option<&Path>, body: &str) -> CliResult {
    match out {
        Some(p) => fs::write(p, body).map_err(|e| CliError::input(format!("{}: {e}", p.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(body.as_bytes())?;
            if !body.ends_with('\n') {
                stdout.write_all(b"\n")?;
            }
            Ok(())
        }
    }
}

pub fn to_json<T: serde::Serialize>(value: &T) -> CliResult<String> {
    Ok(serde_json::to_string_pretty(value)?)
}
