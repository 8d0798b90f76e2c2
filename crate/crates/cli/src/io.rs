//! Deterministic output helpers: full-precision CSV, stable JSON, manifests.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

/// 17 significant digits, enough to round-trip any f64.
pub fn g17(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn out_dir(cli_out: Option<&str>, cfg_out: Option<&str>) -> PathBuf {
    let dir = std::env::var("BURSTER_OUTPUT_DIR")
        .ok()
        .or_else(|| cli_out.map(str::to_string))
        .or_else(|| cfg_out.map(str::to_string))
        .unwrap_or_else(|| "out".to_string());
    PathBuf::from(dir)
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "{}", header.join(","))?;
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| g17(*v)).collect();
        writeln!(f, "{}", cells.join(","))?;
    }
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

pub fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

/// FNV-1a over the canonical config serialization; stable across runs.
pub fn fnv64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

#[derive(Serialize)]
pub struct Manifest {
    pub command: String,
    pub config_hash: String,
    pub version: String,
}

pub fn write_manifest(dir: &Path, command: &str, config_json: &str) -> Result<()> {
    let manifest = Manifest {
        command: command.to_string(),
        config_hash: format!("{:016x}", fnv64(config_json.as_bytes())),
        version: env!("CARGO_PKG_VERSION").to_string(),
    };
    write_json(&dir.join("manifest.json"), &manifest).context("writing manifest")
}

pub fn read_csv_columns(path: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {path}"))?;
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .context("empty csv")?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let mut cols: Vec<Vec<f64>> = vec![vec![]; header.len()];
    for (ln, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        for (i, cell) in line.split(',').enumerate() {
            let v: f64 = cell
                .trim()
                .parse()
                .with_context(|| format!("line {} column {i}", ln + 2))?;
            if i < cols.len() {
                cols[i].push(v);
            }
        }
    }
    Ok((header, cols))
}
