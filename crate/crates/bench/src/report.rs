//! Run reports: CSV rows per horizon and one JSON object per run.
//!
//! Wall-clock timings live in a separate sidecar file so that the report
//! itself is a pure function of the config.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use flowcast_core::MetricReport;
use serde::{Deserialize, Serialize};

use crate::config::ModelKind;
use crate::error::{BenchError, Result};
use crate::train::EpochRecord;

pub const SCHEMA_VERSION: u32 = 1;

pub const CSV_COLUMNS: [&str; 11] = [
    "model",
    "T",
    "T_p",
    "mae",
    "rmse",
    "mape_100",
    "geh_mean",
    "geh_acceptable_frac",
    "geh_unacceptable_frac",
    "n",
    "n_mape",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonReport {
    pub horizon: usize,
    /// Test windows scored.
    pub windows: usize,
    pub metrics: MetricReport,
    /// Metrics over the configured subset of target timestamps.
    pub subset: Option<MetricReport>,
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
    /// Trees kept by the boosted model.
    pub best_round: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub config_digest: String,
    pub model: ModelKind,
    pub input_len: usize,
    pub seed: u64,
    /// Ordered by horizon.
    pub horizons: Vec<HorizonReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonTiming {
    pub horizon: usize,
    pub train_secs: f64,
    /// Total time spent forecasting the test split.
    pub inference_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub model: String,
    #[serde(rename = "T")]
    pub input_len: usize,
    #[serde(rename = "T_p")]
    pub horizon: usize,
    pub mae: f64,
    pub rmse: f64,
    pub mape_100: Option<f64>,
    pub geh_mean: f64,
    pub geh_acceptable_frac: f64,
    pub geh_unacceptable_frac: f64,
    pub n: usize,
    pub n_mape: usize,
}

impl RunReport {
    pub fn csv_rows(&self) -> Vec<CsvRow> {
        self.horizons
            .iter()
            .map(|h| {
                let m = &h.metrics;
                CsvRow {
                    model: self.model.name().to_string(),
                    input_len: self.input_len,
                    horizon: h.horizon,
                    mae: m.mae,
                    rmse: m.rmse,
                    mape_100: m.mape_100,
                    geh_mean: m.geh_mean,
                    geh_acceptable_frac: m.geh_acceptable_frac,
                    geh_unacceptable_frac: m.geh_unacceptable_frac,
                    n: m.n,
                    n_mape: m.n_mape,
                }
            })
            .collect()
    }

    /// Single-line JSON form.
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| BenchError::Report(e.to_string()))
    }

    pub fn from_json(line: &str) -> Result<Self> {
        let r: Self = serde_json::from_str(line).map_err(|e| BenchError::Report(e.to_string()))?;
        if r.schema_version != SCHEMA_VERSION {
            return Err(BenchError::Report(format!("unsupported schema version {}", r.schema_version)));
        }
        Ok(r)
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| BenchError::io(path, e))?))
}

fn csv_err(path: &Path, e: csv::Error) -> BenchError {
    BenchError::Report(format!("{}: {e}", path.display()))
}

pub fn write_csv(rows: &[CsvRow], path: &Path) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(create(path)?);
    w.write_record(CSV_COLUMNS).map_err(|e| csv_err(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| BenchError::io(path, e))
}

pub fn read_csv(path: &Path) -> Result<Vec<CsvRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = r.headers().map_err(|e| csv_err(path, e))?;
    if header.iter().ne(CSV_COLUMNS) {
        return Err(BenchError::Report(format!("{}: unexpected header {header:?}", path.display())));
    }
    r.deserialize().map(|row| row.map_err(|e| csv_err(path, e))).collect()
}

pub fn write_jsonl(reports: &[RunReport], path: &Path) -> Result<()> {
    let mut w = create(path)?;
    for r in reports {
        writeln!(w, "{}", r.to_json()?).map_err(|e| BenchError::io(path, e))?;
    }
    w.flush().map_err(|e| BenchError::io(path, e))
}

pub fn read_jsonl(path: &Path) -> Result<Vec<RunReport>> {
    let f = File::open(path).map_err(|e| BenchError::io(path, e))?;
    let mut out = Vec::new();
    for line in BufReader::new(f).lines() {
        let line = line.map_err(|e| BenchError::io(path, e))?;
        if !line.trim().is_empty() {
            out.push(RunReport::from_json(&line)?);
        }
    }
    Ok(out)
}

pub fn write_timings(timings: &[HorizonTiming], path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(timings).map_err(|e| BenchError::Report(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| BenchError::io(path, e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportPaths {
    pub csv: PathBuf,
    pub jsonl: PathBuf,
}

/// Writes `<dir>/<stem>.csv` and `<dir>/<stem>.jsonl`.
pub fn emit_report(report: &RunReport, dir: &Path, stem: &str) -> Result<ReportPaths> {
    let paths = ReportPaths { csv: dir.join(format!("{stem}.csv")), jsonl: dir.join(format!("{stem}.jsonl")) };
    write_csv(&report.csv_rows(), &paths.csv)?;
    write_jsonl(std::slice::from_ref(report), &paths.jsonl)?;
    Ok(paths)
}
