use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::CliError;

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::data(path.display(), e))?;
    text.push('\n');
    write_text(path, &text)
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::data(path.display(), e))
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), CliError> {
    let err = |e: &dyn std::fmt::Display| CliError::data(path.display(), e);
    let mut out = BufWriter::new(File::create(path).map_err(|e| err(&e))?);
    for it in items {
        serde_json::to_writer(&mut out, it).map_err(|e| err(&e))?;
        out.write_all(b"\n").map_err(|e| err(&e))?;
    }
    out.flush().map_err(|e| err(&e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::data(path.display(), e))?;
    serde_json::from_str(&text).map_err(|e| CliError::data(path.display(), e))
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    let file = File::open(path).map_err(|e| CliError::data(path.display(), e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CliError::data(path.display(), e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| CliError::data(format!("{}:{}", path.display(), i + 1), e))?);
    }
    Ok(out)
}

/// A prerequisite artifact; missing ones are data errors naming the step that makes them.
pub fn require(path: &Path, made_by: &str) -> Result<(), CliError> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::Data(format!("{} not found (run `{made_by}` first or set it in the config)", path.display())))
    }
}
