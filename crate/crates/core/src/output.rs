//! CSV/JSON writers and the run manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::dn_map::BoundaryFunction;
use crate::error::Result;
use crate::forward::Field;
use crate::geometry::Grid;
use crate::reconstruction::FourierSamples;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes a CSV with a header row. Numbers use Rust's shortest round-trip
/// formatting, so identical values give identical bytes.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// `node, x, y, value` per grid node.
pub fn write_field_csv(path: &Path, grid: &Grid, field: &Field) -> Result<()> {
    let rows: Vec<Vec<f64>> = field
        .values
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            let p = grid.position(k);
            vec![k as f64, p[0], p[1], v]
        })
        .collect();
    write_csv(path, &["node", "x", "y", "value"], &rows)
}

/// `arc, f, lambda` per trace node of a measurement.
pub fn write_measurement_csv(
    path: &Path,
    f: &BoundaryFunction,
    lambda: &BoundaryFunction,
) -> Result<()> {
    let arc = &f.trace().arc;
    let rows: Vec<Vec<f64>> = (0..f.len())
        .map(|k| vec![arc[k], f.re()[k], lambda.re()[k]])
        .collect();
    write_csv(path, &["arc", "f", "lambda"], &rows)
}

/// `arc, value` of a boundary function.
pub fn write_boundary_csv(path: &Path, g: &BoundaryFunction) -> Result<()> {
    let arc = &g.trace().arc;
    let rows: Vec<Vec<f64>> = (0..g.len()).map(|k| vec![arc[k], g.re()[k]]).collect();
    write_csv(path, &["arc", "value"], &rows)
}

/// `x, y, q_true, q_rec, abs_err` per grid node.
pub fn write_recovery_csv(path: &Path, grid: &Grid, truth: &Field, rec: &Field) -> Result<()> {
    let rows: Vec<Vec<f64>> = (0..grid.node_count())
        .map(|k| {
            let p = grid.position(k);
            let (t, r) = (truth.values[k], rec.values[k]);
            vec![p[0], p[1], t, r, (t - r).abs()]
        })
        .collect();
    write_csv(path, &["x", "y", "q_true", "q_rec", "abs_err"], &rows)
}

/// `xi1, xi2, re, im` per Fourier sample.
pub fn write_samples_csv(path: &Path, s: &FourierSamples) -> Result<()> {
    let rows: Vec<Vec<f64>> = s
        .samples
        .iter()
        .map(|x| vec![x.xi[0], x.xi[1], x.value.re, x.value.im])
        .collect();
    write_csv(path, &["xi1", "xi2", "re", "im"], &rows)
}

/// Pretty JSON; struct fields keep declaration order and maps are ordered.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct ManifestFile {
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub config_sha256: String,
    pub crate_version: String,
    pub runtime_s: f64,
    pub files: Vec<ManifestFile>,
}

/// Collects written files and writes `manifest.json` last.
pub struct Bundle {
    dir: PathBuf,
    files: Vec<String>,
}

impl Bundle {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Bundle {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    /// Path for a new output file, recorded for the manifest.
    pub fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }

    pub fn finish(self, command: &str, config_bytes: &[u8], runtime_s: f64) -> Result<PathBuf> {
        let mut files = Vec::with_capacity(self.files.len());
        for name in &self.files {
            let bytes = fs::read(self.dir.join(name))?;
            files.push(ManifestFile {
                name: name.clone(),
                sha256: sha256_hex(&bytes),
            });
        }
        let manifest = Manifest {
            command: command.to_string(),
            config_sha256: sha256_hex(config_bytes),
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            runtime_s,
            files,
        };
        let path = self.dir.join("manifest.json");
        write_json(&path, &manifest)?;
        Ok(path)
    }
}

/// Writes a JSON diagnostic line to standard error.
pub fn emit_diagnostic(kind: &str, message: &str, exit_code: i32) {
    let line = serde_json::json!({
        "error": kind,
        "message": message,
        "exit_code": exit_code,
    });
    let _ = writeln!(std::io::stderr(), "{line}");
}
