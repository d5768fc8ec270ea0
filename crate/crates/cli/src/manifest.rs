use std::fs::File;
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Serialize)]
pub struct FileEntry {
    /// File name only, so manifests do not depend on where a run lives.
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub tool_version: String,
    pub seed: Option<u64>,
    pub params: Value,
    pub inputs: Vec<FileEntry>,
    pub outputs: Vec<FileEntry>,
}

pub fn sha256_file(path: &Path) -> Result<(String, u64), CliError> {
    let mut r = BufReader::new(File::open(path).map_err(|e| CliError::data(path.display(), e))?);
    let mut h = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    let mut total = 0u64;
    loop {
        let n = r.read(&mut buf).map_err(|e| CliError::data(path.display(), e))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
        total += n as u64;
    }
    Ok((format!("{:x}", h.finalize()), total))
}

fn entry(path: &Path) -> Result<FileEntry, CliError> {
    let (sha256, bytes) = sha256_file(path)?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    Ok(FileEntry { name, sha256, bytes })
}

/// Records what one command read and wrote; saved as `<command>.manifest.json`.
pub struct ManifestBuilder {
    command: String,
    seed: Option<u64>,
    params: Value,
    inputs: Vec<FileEntry>,
    outputs: Vec<PathBuf>,
}

impl ManifestBuilder {
    pub fn new(command: &str, seed: Option<u64>, params: Value) -> Self {
        Self { command: command.to_string(), seed, params, inputs: Vec::new(), outputs: Vec::new() }
    }

    /// Hashed right away, since a command may later overwrite its input.
    pub fn input(&mut self, p: &Path) -> Result<(), CliError> {
        self.inputs.push(entry(p)?);
        Ok(())
    }

    pub fn output(&mut self, p: impl Into<PathBuf>) {
        self.outputs.push(p.into());
    }

    pub fn write(self, out_dir: &Path) -> Result<PathBuf, CliError> {
        let m = Manifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            inputs: self.inputs,
            outputs: self.outputs.iter().map(|p| entry(p)).collect::<Result<_, _>>()?,
            command: self.command,
            seed: self.seed,
            params: self.params,
        };
        let path = out_dir.join(format!("{}.manifest.json", m.command));
        crate::io::write_json(&path, &m)?;
        Ok(path)
    }
}
