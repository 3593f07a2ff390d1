//! Append-only JSON-lines results ledger.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{DsmError, Result};

/// One `(model, dataset)` score.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub model: String,
    pub dataset: String,
    pub task: String,
    pub metric: String,
    pub score: f64,
    pub coverage: f64,
}

pub fn read_records<R: BufRead>(reader: R, source_name: &str) -> Result<Vec<EvalResult>> {
    let mut out = Vec::new();
    for (ln, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| DsmError::parse(source_name, ln + 1, e.to_string()))?;
        out.push(rec);
    }
    Ok(out)
}

/// Reads a ledger; a missing file is an empty ledger.
pub fn read_ledger(path: impl AsRef<Path>) -> Result<Vec<EvalResult>> {
    let path = path.as_ref();
    if !path.exists() {
        return Ok(Vec::new());
    }
    read_records(BufReader::new(File::open(path)?), &path.display().to_string())
}

pub fn write_records<W: Write>(mut w: W, records: &[EvalResult]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Appends records, creating the file if needed.
pub fn append_ledger(path: impl AsRef<Path>, records: &[EvalResult]) -> Result<()> {
    let f = OpenOptions::new().create(true).append(true).open(path)?;
    let mut w = BufWriter::new(f);
    write_records(&mut w, records)?;
    w.flush()?;
    Ok(())
}
