//! Report files and the rank statistics used on them.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Algorithm, ResultRecord, SweepOutcome};
use crate::error::{Error, Result};

/// Raw sweep output written by `sweep` and read by `report`.
pub const RECORDS_FILE: &str = "records.json";
pub const SCATTER_FILE: &str = "tau_eps_scatter.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            _ => Err(Error::InvalidConfig(format!("unknown report format `{s}`"))),
        }
    }
}

pub fn write_records(dir: impl AsRef<Path>, outcome: &SweepOutcome) -> Result<PathBuf> {
    std::fs::create_dir_all(dir.as_ref())?;
    let path = dir.as_ref().join(RECORDS_FILE);
    serde_json::to_writer_pretty(BufWriter::new(File::create(&path)?), outcome)?;
    Ok(path)
}

pub fn read_records(dir: impl AsRef<Path>) -> Result<SweepOutcome> {
    let file = File::open(dir.as_ref().join(RECORDS_FILE))?;
    Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
}

/// Writes records as CSV in the fixed column order.
pub fn write_records_csv<W: std::io::Write>(records: &[ResultRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records_csv<R: std::io::Read>(reader: R) -> Result<Vec<ResultRecord>> {
    csv::Reader::from_reader(reader)
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

/// One point of the τ-vs-ε scatter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterRow {
    pub scenario: String,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "T")]
    pub t: f64,
    pub parameter: String,
    pub tau: f64,
    pub eps: f64,
}

/// Two rows (m and d) per BPINN record.
pub fn scatter_rows(records: &[ResultRecord]) -> Vec<ScatterRow> {
    records
        .iter()
        .filter(|r| r.algorithm == Algorithm::Bpinn)
        .flat_map(|r| {
            let row = |parameter: &str, tau: Option<f64>, eps: f64| ScatterRow {
                scenario: r.scenario.clone(),
                k: r.k,
                t: r.t,
                parameter: parameter.into(),
                tau: tau.unwrap_or(f64::NAN),
                eps,
            };
            [row("m", r.tau_m, r.eps_m), row("d", r.tau_d, r.eps_d)]
        })
        .collect()
}

/// Writes the results table and the scatter file into `dir`; returns both paths.
pub fn emit_report(records: &[ResultRecord], dir: impl AsRef<Path>, format: ReportFormat) -> Result<Vec<PathBuf>> {
    if records.is_empty() {
        return Err(Error::InvalidConfig("no records to report".into()));
    }
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let table = match format {
        ReportFormat::Csv => {
            let path = dir.join("report.csv");
            write_records_csv(records, BufWriter::new(File::create(&path)?))?;
            path
        }
        ReportFormat::Json => {
            let path = dir.join("report.json");
            serde_json::to_writer_pretty(BufWriter::new(File::create(&path)?), records)?;
            path
        }
    };
    let scatter = dir.join(SCATTER_FILE);
    let mut w = csv::Writer::from_path(&scatter)?;
    for row in scatter_rows(records) {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(vec![table, scatter])
}

/// Ranks starting at 1, ties sharing their average rank.
fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation; `None` for fewer than two points or a constant input.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len());
    if x.len() < 2 {
        return None;
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let mean = (n + 1.0) / 2.0;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        cov += (a - mean) * (b - mean);
        vx += (a - mean).powi(2);
        vy += (b - mean).powi(2);
    }
    if vx == 0.0 || vy == 0.0 {
        return None;
    }
    Some(cov / (vx * vy).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(algorithm: Algorithm, tau: Option<f64>) -> ResultRecord {
        ResultRecord {
            scenario: "fd1".into(),
            k: 0.01,
            t: 27.0,
            algorithm,
            eps_m: 1.25,
            tau_m: tau,
            eps_d: 0.125,
            tau_d: tau.map(|t| t / 2.0),
            runtime_s: 0.5,
            seed: 42,
        }
    }

    #[test]
    fn csv_round_trip_and_columns() {
        let recs = vec![record(Algorithm::Bpinn, Some(3.0)), record(Algorithm::Sindy, None)];
        let mut buf = Vec::new();
        write_records_csv(&recs, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "scenario,K,T,algorithm,eps_m,tau_m,eps_d,tau_d,runtime_s,seed"
        );
        lines.next();
        assert_eq!(lines.next().unwrap(), "fd1,0.01,27.0,sindy,1.25,,0.125,,0.5,42");
        assert_eq!(read_records_csv(&buf[..]).unwrap(), recs);
    }

    #[test]
    fn scatter_counts_two_rows_per_bpinn_cell() {
        let recs = vec![
            record(Algorithm::Bpinn, Some(3.0)),
            record(Algorithm::Pinn, None),
            record(Algorithm::Bpinn, Some(1.0)),
        ];
        assert_eq!(scatter_rows(&recs).len(), 4);
    }

    #[test]
    fn emit_writes_files() {
        let dir = tempfile::tempdir().unwrap();
        let recs = vec![record(Algorithm::Bpinn, Some(3.0))];
        let paths = emit_report(&recs, dir.path(), ReportFormat::Json).unwrap();
        assert!(paths.iter().all(|p| p.exists()));
        let back: Vec<ResultRecord> =
            serde_json::from_reader(File::open(&paths[0]).unwrap()).unwrap();
        assert_eq!(back, recs);
        assert!(emit_report(&[], dir.path(), ReportFormat::Csv).is_err());
    }

    #[test]
    fn spearman_basics() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert!((spearman(&x, &[10.0, 20.0, 30.0, 40.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((spearman(&x, &[4.0, 3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
        // Monotone transform leaves it unchanged.
        assert!((spearman(&x, &[1.0, 8.0, 27.0, 64.0]).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(spearman(&x, &[1.0; 4]), None);
        assert_eq!(ranks(&[5.0, 1.0, 5.0]), vec![2.5, 1.0, 2.5]);
    }
}
