//! CSV tables and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{IoError, Result};

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Cell of a CSV row.
pub enum Cell<'a> {
    F(f64),
    I(u64),
    S(&'a str),
}

impl Cell<'_> {
    fn render(&self) -> String {
        match self {
            Cell::F(v) => fmt_f64(*v),
            Cell::I(v) => v.to_string(),
            Cell::S(s) => s.to_string(),
        }
    }
}

/// Collects the files a run writes so the manifest can list them.
pub struct OutputDir {
    root: PathBuf,
    written: Vec<String>,
    started: Instant,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).map_err(|e| IoError::io(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
            started: Instant::now(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn files(&self) -> &[String] {
        &self.written
    }

    fn record(&mut self, name: &str) {
        if !self.written.iter().any(|w| w == name) {
            self.written.push(name.to_string());
        }
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.path(name);
        fs::write(&path, bytes).map_err(|e| IoError::io(&path, e))?;
        self.record(name);
        Ok(path)
    }

    pub fn write_csv(&mut self, name: &str, header: &[&str], rows: &[Vec<Cell<'_>>]) -> Result<PathBuf> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let csv_err = |e: csv::Error| IoError::Config(format!("csv: {e}"));
        w.write_record(header).map_err(csv_err)?;
        for row in rows {
            w.write_record(row.iter().map(Cell::render)).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| IoError::Config(format!("csv: {e}")))?;
        self.write_bytes(name, &bytes)
    }

    pub fn write_json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write_bytes(name, &bytes)
    }

    /// Writes `manifest.json`. Everything that varies between identical runs
    /// sits under `"timing"`.
    pub fn write_manifest(&mut self, subcommand: &str, config: &Value, seed: u64, threads: usize) -> Result<PathBuf> {
        let mut outputs = self.written.clone();
        outputs.push(MANIFEST.to_string());
        let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        let manifest = json!({
            "tool": "grwlab",
            "subcommand": subcommand,
            "versions": {
                "grwlab": env!("CARGO_PKG_VERSION"),
                "grwlab-core": grwlab_core::VERSION,
            },
            "seed": seed,
            "threads": threads,
            "config": config,
            "outputs": outputs,
            "timing": {
                "wall_time_s": self.started.elapsed().as_secs_f64(),
                "unix_timestamp": timestamp,
            },
        });
        self.write_json(MANIFEST, &manifest)
    }
}

pub const MANIFEST: &str = "manifest.json";

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_through_text() {
        for v in [0.1, 1.0 / 3.0, 6.02214076e23, -1e-300, 0.0] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_f64(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn csv_and_manifest_listing() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(dir.path()).unwrap();
        out.write_csv("t.csv", &["a", "b"], &[vec![Cell::F(0.5), Cell::S("x")]]).unwrap();
        let text = fs::read_to_string(dir.path().join("t.csv")).unwrap();
        assert_eq!(text, "a,b\n5.0000000000000000e-1,x\n");
        out.write_manifest("rates", &json!({}), 3, 1).unwrap();
        let m: Value = serde_json::from_slice(&fs::read(dir.path().join(MANIFEST)).unwrap()).unwrap();
        assert_eq!(m["outputs"], json!(["t.csv", "manifest.json"]));
        assert_eq!(m["seed"], 3);
    }
}
