//! File output shared by every analysis: 17-digit decimal CSV, JSON
//! sidecars and content hashes of potentials.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::fields::FieldSpec;
use crate::num::Real;

/// Decimal with 17 significant digits; parses back to the same `f64`.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// SHA-256 of the canonical JSON of `spec`, hex encoded.
pub fn spec_hash<T: Real>(spec: &FieldSpec<T>) -> String {
    content_hash(&spec.to_json())
}

/// SHA-256 of arbitrary text, hex encoded.
pub fn content_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Writes a CSV whose data cells are already formatted.
pub fn write_csv(path: &Path, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    ensure_parent(path)?;
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()?;
    Ok(())
}

/// CSV of numeric rows, every cell through [`fmt17`].
pub fn write_numeric_csv(path: &Path, header: &[String], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
    write_csv(
        path,
        header,
        rows.into_iter().map(|r| r.into_iter().map(fmt17).collect()),
    )
}

/// Pretty-printed JSON sidecar.
pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    ensure_parent(path)?;
    let text = serde_json::to_string_pretty(value).map_err(|e| crate::Error::Parse(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(())
}
