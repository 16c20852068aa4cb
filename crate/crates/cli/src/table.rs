//! CSV and JSON emission with the provenance header every output carries.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};

/// A CSV file of plain (unquoted) fields preceded by `#` comment lines.
pub struct Table {
    out: BufWriter<File>,
    path: PathBuf,
    width: usize,
}

impl Table {
    pub fn create(path: &Path, preamble: &[String], header: &[String]) -> Result<Table> {
        let file = File::create(path).map_err(Error::io(path))?;
        let mut t = Table {
            out: BufWriter::new(file),
            path: path.to_path_buf(),
            width: header.len(),
        };
        for line in preamble {
            writeln!(t.out, "# {line}").map_err(Error::io(path))?;
        }
        t.line(header)?;
        Ok(t)
    }

    fn line(&mut self, fields: &[String]) -> Result<()> {
        debug_assert_eq!(fields.len(), self.width);
        writeln!(self.out, "{}", fields.join(",")).map_err(Error::io(&self.path))
    }

    pub fn row(&mut self, fields: Vec<String>) -> Result<()> {
        self.line(&fields)
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush().map_err(Error::io(&self.path))
    }
}

/// Shortest representation that reads back to the same value.
pub fn num(v: f64) -> String {
    v.to_string()
}

/// Column label for a probability: `0.16 → q16`, `0.025 → q2.5`.
pub fn quantile_label(p: f64) -> String {
    let pct = p * 100.0;
    let rounded = pct.round();
    if (pct - rounded).abs() < 1e-9 {
        format!("q{}", rounded as i64)
    } else {
        format!("q{}", (pct * 1e6).round() / 1e6)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct Meta {
    pub version: String,
    pub config_sha256: String,
}

impl Meta {
    pub fn new(checksum: &str) -> Meta {
        Meta {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_sha256: checksum.to_string(),
        }
    }
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    std::fs::write(path, text).map_err(Error::io(path))
}
