//! Reproducibility records. Every output `<path>` gets a `<path>.run.json`
//! holding the resolved settings and a SHA-256 digest of each input, with no
//! timestamps, so identical runs write identical records.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufReader, Read};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: BTreeMap<String, serde_json::Value>,
    pub inputs: Vec<InputDigest>,
}

/// Hex SHA-256 of a file's contents and its length.
pub fn sha256_file(path: &Path) -> io::Result<(String, u64)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    let mut total = 0u64;
    loop {
        let n = r.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
        total += n as u64;
    }
    Ok((hex::encode(hasher.finalize()), total))
}

impl RunInfo {
    pub fn new(command: &str, config: BTreeMap<String, serde_json::Value>, inputs: &[PathBuf]) -> Result<Self> {
        let inputs = inputs
            .iter()
            .map(|p| {
                let (sha256, bytes) = sha256_file(p).with_context(|| format!("hashing {}", p.display()))?;
                Ok(InputDigest {
                    path: p.display().to_string(),
                    bytes,
                    sha256,
                })
            })
            .collect::<Result<_>>()?;
        Ok(RunInfo {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config,
            inputs,
        })
    }

    /// Writes the record next to `output`.
    pub fn write_for(&self, output: &Path) -> Result<PathBuf> {
        let path = run_info_path(output);
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

pub fn run_info_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".run.json");
    PathBuf::from(s)
}
