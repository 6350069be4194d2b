use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::VarianceReport;
use crate::error::{Error, Result};

/// Column order of the per-epoch CSV.
pub const LOG_COLUMNS: [&str; 4] = ["epoch", "loss", "active_ratio", "grad_norm"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub active_ratio: f64,
    pub grad_norm: f64,
}

/// Variance report taken after `epoch` completed epochs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub epoch: usize,
    pub report: VarianceReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub loss_name: String,
    pub config_hash: String,
    pub seed: u64,
    pub records: Vec<EpochRecord>,
    pub snapshots: Vec<Snapshot>,
}

impl TrainLog {
    pub fn new(loss_name: impl Into<String>, config_hash: impl Into<String>, seed: u64) -> Self {
        TrainLog {
            loss_name: loss_name.into(),
            config_hash: config_hash.into(),
            seed,
            records: Vec::new(),
            snapshots: Vec::new(),
        }
    }

    pub fn push(&mut self, record: EpochRecord) -> Result<()> {
        if record.epoch != self.records.len() {
            return Err(Error::Contract(format!(
                "epoch {} logged after {} records",
                record.epoch,
                self.records.len()
            )));
        }
        if !(0.0..=1.0).contains(&record.active_ratio) {
            return Err(Error::Contract(format!(
                "active ratio {} outside [0, 1]",
                record.active_ratio
            )));
        }
        self.records.push(record);
        Ok(())
    }

    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(LOG_COLUMNS)?;
        for r in &self.records {
            w.write_record([
                r.epoch.to_string(),
                r.loss.to_string(),
                r.active_ratio.to_string(),
                r.grad_norm.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(file)
    }
}

/// Parses a per-epoch CSV; errors name the offending line.
pub fn read_log_csv(path: &Path) -> Result<Vec<EpochRecord>> {
    let malformed = |message: String| Error::Malformed {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = csv::Reader::from_path(path).map_err(|e| malformed(e.to_string()))?;
    let headers = reader.headers().map_err(|e| malformed(format!("line 1: {e}")))?;
    if headers.iter().collect::<Vec<_>>() != LOG_COLUMNS {
        return Err(malformed(format!("line 1: expected header {}", LOG_COLUMNS.join(","))));
    }
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            malformed(format!("line {line}: {e}"))
        })?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != LOG_COLUMNS.len() {
            return Err(malformed(format!("line {line}: expected 4 fields")));
        }
        let num = |k: usize| -> Result<f64> {
            row[k]
                .trim()
                .parse::<f64>()
                .map_err(|e| malformed(format!("line {line}: column {}: {e}", LOG_COLUMNS[k])))
        };
        let epoch = row[0]
            .trim()
            .parse::<usize>()
            .map_err(|e| malformed(format!("line {line}: column epoch: {e}")))?;
        records.push(EpochRecord {
            epoch,
            loss: num(1)?,
            active_ratio: num(2)?,
            grad_norm: num(3)?,
        });
    }
    Ok(records)
}
