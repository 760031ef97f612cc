//! On-disk formats: the leaf-table CSV, binned heatmap CSV, spectrum JSON,
//! benchmark report CSV, and the manifest sidecar written next to outputs.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a
//! write/parse/write cycle of a leaf table is byte-identical.

use std::fmt::Write as _;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::CascadeConfig;
use crate::error::{Error, Result};
use crate::measure::{ScaleMatrix, ScaleRow};
use crate::num::Real;
use crate::tree::Realization;

/// One parsed leaf-table record.
#[derive(Clone, Debug, PartialEq)]
pub struct LeafRecord<T> {
    pub depth: usize,
    pub leaf_index: usize,
    pub left: T,
    pub right: T,
    pub diameter: T,
    /// Empty mass column parses to None.
    pub mass: Option<T>,
}

pub const LEAF_TABLE_HEADER: &str = "depth,leaf_index,left,right,diameter,mass";

/// Render the frontier leaves of every depth as CSV. `masses` rows must
/// align with `real.leaves_by_depth`; pass None to leave the column blank.
pub fn leaf_table_csv<T: Real>(real: &Realization<T>, masses: Option<&[Vec<T>]>) -> String {
    let mut out = String::new();
    out.push_str(LEAF_TABLE_HEADER);
    out.push('\n');
    for (depth, row) in real.leaves_by_depth.iter().enumerate() {
        if let Some(mass_rows) = masses {
            if depth >= mass_rows.len() {
                break;
            }
        }
        for (i, &id) in row.iter().enumerate() {
            let node = &real.nodes[id];
            let _ = write!(
                out,
                "{depth},{i},{},{},{}",
                node.left,
                node.right(),
                node.diameter
            );
            match masses {
                Some(mass_rows) => {
                    let _ = writeln!(out, ",{}", mass_rows[depth][i]);
                }
                None => out.push_str(",\n"),
            }
        }
    }
    out
}

/// Parse a leaf-table CSV back into records.
pub fn parse_leaf_table<T: Real>(text: &str) -> Result<Vec<LeafRecord<T>>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == LEAF_TABLE_HEADER => {}
        other => {
            return Err(Error::Parse(format!(
                "bad leaf table header: {:?}",
                other.unwrap_or("")
            )))
        }
    }
    let field = |s: &str, name: &str, lineno: usize| -> Result<T> {
        s.parse::<T>()
            .map_err(|_| Error::Parse(format!("line {lineno}: bad {name} `{s}`")))
    };
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 6 {
            return Err(Error::Parse(format!(
                "line {lineno}: expected 6 columns, got {}",
                cols.len()
            )));
        }
        records.push(LeafRecord {
            depth: cols[0]
                .parse()
                .map_err(|_| Error::Parse(format!("line {lineno}: bad depth `{}`", cols[0])))?,
            leaf_index: cols[1]
                .parse()
                .map_err(|_| Error::Parse(format!("line {lineno}: bad leaf_index")))?,
            left: field(cols[2], "left", lineno)?,
            right: field(cols[3], "right", lineno)?,
            diameter: field(cols[4], "diameter", lineno)?,
            mass: if cols[5].is_empty() {
                None
            } else {
                Some(field(cols[5], "mass", lineno)?)
            },
        });
    }
    if records.is_empty() {
        return Err(Error::Parse("leaf table has no records".into()));
    }
    Ok(records)
}

/// Rebuild a scale matrix from parsed records; every record needs a mass.
pub fn scale_matrix_from_records<T: Real>(records: &[LeafRecord<T>]) -> Result<ScaleMatrix<T>> {
    let max_depth = records.iter().map(|r| r.depth).max().unwrap_or(0);
    let mut rows: Vec<ScaleRow<T>> = (0..=max_depth)
        .map(|_| ScaleRow {
            diameters: Vec::new(),
            masses: Vec::new(),
        })
        .collect();
    for r in records {
        let mass = r.mass.ok_or_else(|| {
            Error::InsufficientData(format!(
                "record at depth {} has no mass; re-export with masses",
                r.depth
            ))
        })?;
        rows[r.depth].diameters.push(r.diameter);
        rows[r.depth].masses.push(mass);
    }
    if let Some(depth) = rows.iter().position(|r| r.diameters.is_empty()) {
        return Err(Error::ExtinctDepth { depth });
    }
    Ok(ScaleMatrix { rows })
}

/// Binned heatmap as `depth,bin,mass` CSV.
pub fn heatmap_csv<T: Real>(heatmap: &[Vec<T>]) -> String {
    let mut out = String::from("depth,bin,mass\n");
    for (depth, row) in heatmap.iter().enumerate() {
        for (bin, &mass) in row.iter().enumerate() {
            let _ = writeln!(out, "{depth},{bin},{mass}");
        }
    }
    out
}

/// Spectrum estimate as a pretty-printed JSON document.
pub fn spectrum_json<E: Serialize>(estimate: &E) -> Result<String> {
    Ok(serde_json::to_string_pretty(estimate)?)
}

/// One row of the benchmark comparison table.
#[derive(Clone, Debug)]
pub struct BenchmarkRow<T> {
    pub q: T,
    pub kappa_closed_form: Option<T>,
    pub kappa_exact: Option<T>,
    pub kappa_monte_carlo: T,
    pub kappa_monte_carlo_se: T,
    pub kappa_simulated: Option<T>,
}

pub fn benchmark_csv<T: Real>(rows: &[BenchmarkRow<T>]) -> String {
    let mut out =
        String::from("q,kappa_closed_form,kappa_exact,kappa_mc,kappa_mc_se,kappa_simulated\n");
    let opt = |x: Option<T>| x.map(|v| v.to_string()).unwrap_or_default();
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.q,
            opt(r.kappa_closed_form),
            opt(r.kappa_exact),
            r.kappa_monte_carlo,
            r.kappa_monte_carlo_se,
            opt(r.kappa_simulated)
        );
    }
    out
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for b in digest {
        let _ = write!(hex, "{b:02x}");
    }
    hex
}

/// Manifest sidecar: tool identity, creation time, the full config echo, and
/// a sha256 digest per produced artifact. Flat `key = value` lines.
pub fn manifest<T: Real>(config: &CascadeConfig<T>, outputs: &[(&str, &[u8])]) -> String {
    let created = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let mut out = String::new();
    let _ = writeln!(out, "tool = rifsim");
    let _ = writeln!(out, "version = {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(out, "created_unix = {created}");
    let _ = writeln!(out, "master_seed = {}", config.master_seed);
    for line in config.to_key_values().lines() {
        let _ = writeln!(out, "config.{line}");
    }
    for (name, bytes) in outputs {
        let _ = writeln!(out, "sha256.{name} = {}", sha256_hex(bytes));
        let _ = writeln!(out, "bytes.{name} = {}", bytes.len());
    }
    out
}
