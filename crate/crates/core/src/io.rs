//! Deterministic output formats: 17-significant-digit CSV floats and flat
//! little-endian `f64` binaries with JSON sidecars.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{de::DeserializeOwned, Serialize};

/// Scientific notation with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".to_string() } else { "-inf".to_string() }
    } else {
        format!("{:.16e}", v)
    }
}

/// Render rows of cells as CSV text with `\n` line endings.
pub fn csv_string(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out
}

pub fn sidecar_path(bin: &Path) -> PathBuf {
    let mut s = bin.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn write_f64_bin(path: &Path, values: &[f64]) -> io::Result<()> {
    let mut bytes = Vec::with_capacity(values.len() * 8);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes)
}

pub fn read_f64_bin(path: &Path) -> io::Result<Vec<f64>> {
    let bytes = fs::read(path)?;
    if bytes.len() % 8 != 0 {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "length is not a multiple of 8"));
    }
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

/// Binary payload plus `<path>.json` metadata.
pub fn write_with_sidecar<M: Serialize>(path: &Path, values: &[f64], meta: &M) -> io::Result<()> {
    write_f64_bin(path, values)?;
    let json = serde_json::to_string_pretty(meta).map_err(io::Error::other)?;
    fs::write(sidecar_path(path), json + "\n")
}

pub fn read_with_sidecar<M: DeserializeOwned>(path: &Path) -> io::Result<(Vec<f64>, M)> {
    let values = read_f64_bin(path)?;
    let text = fs::read_to_string(sidecar_path(path))?;
    let meta = serde_json::from_str(&text).map_err(io::Error::other)?;
    Ok((values, meta))
}
