//! CSV schemas and run manifests.
//!
//! Column orders are fixed:
//!
//! | file             | columns |
//! |------------------|---------|
//! | `metrics.csv`    | `episode,return,safe,avg_return,avg_safety,lambda` |
//! | `evaluation.csv` | `episode,return,safe` |
//! | `sweep.csv`      | `method,weight,run,eval_return,eval_safety,lambda_final,bound_upper` |
//!
//! `safe` is `0` or `1`; an empty `bound_upper` means the row is not a
//! cumulative-formulation run.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::episode::Metrics;
use crate::trainers::SweepRow;
use crate::{Error, Result};

pub const METRICS_COLUMNS: [&str; 6] = ["episode", "return", "safe", "avg_return", "avg_safety", "lambda"];
pub const EVALUATION_COLUMNS: [&str; 3] = ["episode", "return", "safe"];
pub const SWEEP_COLUMNS: [&str; 7] = ["method", "weight", "run", "eval_return", "eval_safety", "lambda_final", "bound_upper"];

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

pub struct MetricsWriter {
    inner: csv::Writer<BufWriter<File>>,
}

impl MetricsWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
        inner.write_record(METRICS_COLUMNS).map_err(csv_err)?;
        Ok(Self { inner })
    }

    pub fn write(&mut self, m: &Metrics) -> Result<()> {
        self.inner
            .serialize((m.episode, m.episode_return, m.safe as u8, m.avg_return, m.avg_safety, m.lambda))
            .map_err(csv_err)
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}

pub fn write_evaluation_csv(path: &Path, rows: &[(f64, bool)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(EVALUATION_COLUMNS).map_err(csv_err)?;
    for (i, (ret, safe)) in rows.iter().enumerate() {
        w.serialize((i, ret, *safe as u8)).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(SWEEP_COLUMNS).map_err(csv_err)?;
    for r in rows {
        w.serialize((r.method.as_str(), r.weight, r.run, r.eval_return, r.eval_safety, r.lambda_final, r.bound_upper))
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Parsed `metrics.csv` row.
#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
pub struct MetricsRow {
    pub episode: u64,
    #[serde(rename = "return")]
    pub episode_return: f64,
    pub safe: u8,
    pub avg_return: f64,
    pub avg_safety: f64,
    pub lambda: f64,
}

pub fn read_metrics_csv(path: &Path) -> Result<Vec<MetricsRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    if r.headers().map_err(csv_err)?.iter().ne(METRICS_COLUMNS) {
        return Err(Error::InvalidInput(format!("{}: unexpected metrics header", path.display())));
    }
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

/// Parsed `sweep.csv` row.
#[derive(Clone, Debug, PartialEq, Deserialize)]
pub struct SweepCsvRow {
    pub method: String,
    pub weight: f64,
    pub run: usize,
    pub eval_return: f64,
    pub eval_safety: f64,
    pub lambda_final: f64,
    pub bound_upper: Option<f64>,
}

pub fn read_sweep_csv(path: &Path) -> Result<Vec<SweepCsvRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    if r.headers().map_err(csv_err)?.iter().ne(SWEEP_COLUMNS) {
        return Err(Error::InvalidInput(format!("{}: unexpected sweep header", path.display())));
    }
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub outputs: Vec<PathBuf>,
    pub seconds: f64,
}

/// Written as `manifest.json` next to the files it lists.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    /// SHA-256 of the effective configuration (after overrides).
    pub config_hash: String,
    pub seeds: Vec<u64>,
    /// Files shared by all runs, relative to the manifest's directory.
    pub outputs: Vec<PathBuf>,
    pub runs: Vec<RunRecord>,
    pub total_seconds: f64,
}

impl RunManifest {
    pub fn new(command: &str, config_text: &str) -> Self {
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: sha256_hex(config_text.as_bytes()),
            seeds: Vec::new(),
            outputs: Vec::new(),
            runs: Vec::new(),
            total_seconds: 0.0,
        }
    }

    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        let mut f = File::create(&path)?;
        f.write_all(serde_json::to_string_pretty(self).expect("manifest serialises").as_bytes())?;
        f.write_all(b"\n")?;
        Ok(path)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(dir.join(MANIFEST_FILE))?;
        serde_json::from_str(&text).map_err(|e| Error::InvalidInput(format!("manifest: {e}")))
    }

    /// Every file listed, relative to the manifest's directory.
    pub fn all_outputs(&self) -> Vec<PathBuf> {
        self.outputs.iter().chain(self.runs.iter().flat_map(|r| &r.outputs)).cloned().collect()
    }
}

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trainers::Method;

    #[test]
    fn metrics_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let mut w = MetricsWriter::create(&path).unwrap();
        let ms = [
            Metrics { episode: 0, episode_return: -1.5, safe: true, avg_return: -1.5, avg_safety: 1.0, lambda: 0.1 },
            Metrics { episode: 1, episode_return: -0.1, safe: false, avg_return: -0.8, avg_safety: 0.5, lambda: 1.0 / 3.0 },
        ];
        for m in &ms {
            w.write(m).unwrap();
        }
        w.finish().unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("episode,return,safe,avg_return,avg_safety,lambda\n0,-1.5,1,"));
        let rows = read_metrics_csv(&path).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].lambda.to_bits(), (1.0f64 / 3.0).to_bits());
        assert_eq!(rows[1].safe, 0);
    }

    #[test]
    fn sweep_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let rows = [
            SweepRow { method: Method::CumulativeShaped, weight: 40.0, run: 0, eval_return: -3.0, eval_safety: 0.9, lambda_final: 40.0, bound_upper: Some(0.5) },
            SweepRow { method: Method::ProbSpgReinforce, weight: 10.0, run: 1, eval_return: -2.0, eval_safety: 0.8, lambda_final: 10.0, bound_upper: None },
        ];
        write_sweep_csv(&path, &rows).unwrap();
        let back = read_sweep_csv(&path).unwrap();
        assert_eq!(back[0].method, "cumulative-shaped");
        assert_eq!(back[0].bound_upper, Some(0.5));
        assert_eq!(back[1].bound_upper, None);
    }

    #[test]
    fn evaluation_schema() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.csv");
        write_evaluation_csv(&path, &[(-2.0, true)]).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "episode,return,safe\n0,-2.0,1\n");
    }
}
