//! Artifact writing. Every experiment writes CSV files plus a
//! `manifest.json` naming each artifact with its SHA-256 hash, so a rerun
//! can be checked for byte-identical output. Nothing here depends on the
//! clock: reruns of the same config and seed reproduce every byte.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Collects artifacts for one experiment run and writes the manifest last.
pub struct OutputWriter {
    dir: PathBuf,
    experiment: String,
    seed: u64,
    scenarios: usize,
    hashes: BTreeMap<String, String>,
    extra: BTreeMap<String, String>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    spec_version: u32,
    experiment: &'a str,
    seed: u64,
    scenarios: usize,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    parameters: &'a BTreeMap<String, String>,
    files: &'a BTreeMap<String, String>,
}

impl OutputWriter {
    pub fn new(dir: &Path, experiment: &str, seed: u64, scenarios: usize) -> Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            experiment: experiment.to_string(),
            seed,
            scenarios,
            hashes: BTreeMap::new(),
            extra: BTreeMap::new(),
        })
    }

    /// Record a derived parameter (for example a solved contribution rate)
    /// in the manifest.
    pub fn note(&mut self, key: &str, value: impl ToString) {
        self.extra.insert(key.to_string(), value.to_string());
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).with_context(|| format!("cannot write {}", path.display()))?;
        self.hashes.insert(name.to_string(), hex::encode(Sha256::digest(bytes)));
        Ok(())
    }

    /// Write a CSV artifact: a header row plus one formatted row per record.
    pub fn write_csv<T>(&mut self, name: &str, header: &str, rows: &[T], format: impl Fn(&T) -> String) -> Result<()> {
        let mut body = String::with_capacity(64 * (rows.len() + 1));
        body.push_str(header);
        body.push('\n');
        for row in rows {
            let _ = writeln!(body, "{}", format(row));
        }
        self.write_bytes(name, body.as_bytes())
    }

    /// Write the manifest and finish. Consumes the writer so nothing can be
    /// added after the hashes are sealed.
    pub fn finish(self) -> Result<()> {
        let manifest = Manifest {
            spec_version: crate::config::SUPPORTED_SPEC_VERSION,
            experiment: &self.experiment,
            seed: self.seed,
            scenarios: self.scenarios,
            parameters: &self.extra,
            files: &self.hashes,
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        let path = self.dir.join("manifest.json");
        std::fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
        Ok(())
    }
}

/// Join float columns with the shortest representation that round-trips,
/// so equal values always print identically.
pub fn float_row(values: &[f64]) -> String {
    let mut out = String::new();
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let _ = write!(out, "{v}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_hashes_match_file_contents() {
        let dir = tempfile::tempdir().unwrap();
        let mut writer = OutputWriter::new(dir.path(), "demo", 7, 10).unwrap();
        writer.write_csv("numbers.csv", "x,y", &[(1.0, 2.5)], |r| float_row(&[r.0, r.1])).unwrap();
        writer.finish().unwrap();

        let body = std::fs::read(dir.path().join("numbers.csv")).unwrap();
        assert_eq!(String::from_utf8_lossy(&body), "x,y\n1,2.5\n");

        let manifest: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
        let recorded = manifest["files"]["numbers.csv"].as_str().unwrap();
        assert_eq!(recorded, hex::encode(Sha256::digest(&body)));
        assert_eq!(manifest["seed"], 7);
    }

    #[test]
    fn float_rows_round_trip() {
        let row = float_row(&[0.1 + 0.2, 1.0, -3.5e-9]);
        let parsed: Vec<f64> = row.split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(parsed, vec![0.1 + 0.2, 1.0, -3.5e-9]);
    }
}
