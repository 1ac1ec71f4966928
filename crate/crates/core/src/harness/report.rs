use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::config::ScenarioConfig;
use super::sweep::SweepAxis;
use super::trial::{Method, Quantity};

/// How per-UE RMSEs are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Sum,
    Max,
    Avg,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Sum, Metric::Max, Metric::Avg];
}

/// One CSV line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RmseRow {
    /// Sweep value; empty for a single run.
    pub axis: Option<f64>,
    pub method: Method,
    pub metric: Metric,
    pub quantity: Quantity,
    pub rmse: f64,
    pub trials: usize,
    pub seed: u64,
}

pub const CSV_HEADER: [&str; 7] = ["axis", "method", "metric", "quantity", "rmse", "trials", "seed"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmseReport {
    /// Swept parameter; `None` for a single run.
    pub axis: Option<SweepAxis>,
    pub config: ScenarioConfig,
    pub rows: Vec<RmseRow>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        if let csv::ErrorKind::Io(source) = e.into_kind() {
            return Error::Io {
                path: path.to_path_buf(),
                source,
            };
        }
        unreachable!("io error kind checked above");
    }
    Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

impl RmseReport {
    /// Looks up one series point.
    pub fn get(&self, axis: Option<f64>, method: Method, metric: Metric, quantity: Quantity) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.axis == axis && r.method == method && r.metric == metric && r.quantity == quantity)
            .map(|r| r.rmse)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> std::result::Result<(), csv::Error> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        w.write_record(CSV_HEADER)?;
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory CSV cannot fail");
        String::from_utf8(buf).expect("CSV output is UTF-8")
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Writes the report; CSV carries the rows only, JSON adds axis and config.
    pub fn emit(&self, format: Format, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(io_err(path))?;
        let mut out = BufWriter::new(file);
        match format {
            Format::Csv => self.write_csv(&mut out).map_err(|e| csv_err(path, e))?,
            Format::Json => {
                out.write_all(self.to_json_string().as_bytes())
                    .map_err(io_err(path))?;
                out.write_all(b"\n").map_err(io_err(path))?;
            }
        }
        out.flush().map_err(io_err(path))
    }
}

pub fn parse_csv(text: &str, path: &Path) -> Result<Vec<RmseRow>> {
    let mut r = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: format!("expected header {}", CSV_HEADER.join(",")),
        });
    }
    r.deserialize()
        .map(|row| row.map_err(|e| csv_err(path, e)))
        .collect()
}

pub fn read_csv(path: &Path) -> Result<Vec<RmseRow>> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    parse_csv(&text, path)
}

pub fn read_json(path: &Path) -> Result<RmseReport> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(values: &[f64]) -> RmseReport {
        let mut rows = Vec::new();
        for &v in values {
            for m in [Method::Nf, Method::Ff] {
                for metric in Metric::ALL {
                    for q in Quantity::ALL {
                        rows.push(RmseRow {
                            axis: Some(v),
                            method: m,
                            metric,
                            quantity: q,
                            rmse: 0.1 / 3.0 * v,
                            trials: 7,
                            seed: u64::MAX,
                        });
                    }
                }
            }
        }
        RmseReport {
            axis: Some(SweepAxis::TxPower),
            config: ScenarioConfig::desk(),
            rows,
        }
    }

    #[test]
    fn empty_report_is_header_only() {
        let r = report(&[]);
        assert_eq!(r.to_csv_string(), "axis,method,metric,quantity,rmse,trials,seed\n");
        assert!(parse_csv(&r.to_csv_string(), Path::new("x")).unwrap().is_empty());
    }

    #[test]
    fn csv_and_json_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let r = report(&[7.0, 27.0]);
        assert_eq!(r.rows.len(), 2 * 2 * 3 * 5);
        let csv_path = dir.path().join("r.csv");
        r.emit(Format::Csv, &csv_path).unwrap();
        assert_eq!(read_csv(&csv_path).unwrap(), r.rows);
        let json_path = dir.path().join("r.json");
        r.emit(Format::Json, &json_path).unwrap();
        assert_eq!(read_json(&json_path).unwrap(), r);
        let text = std::fs::read_to_string(&csv_path).unwrap();
        assert!(text.lines().nth(1).unwrap().starts_with("7.0,nf,sum,omega,"));
    }

    #[test]
    fn run_rows_leave_axis_empty() {
        let mut r = report(&[1.0]);
        for row in &mut r.rows {
            row.axis = None;
        }
        let text = r.to_csv_string();
        assert!(text.lines().nth(1).unwrap().starts_with(",nf,sum,omega,"));
        assert_eq!(parse_csv(&text, Path::new("x")).unwrap(), r.rows);
    }

    #[test]
    fn errors_carry_the_path() {
        let r = report(&[1.0]);
        let bad = Path::new("/nonexistent-dir/out.csv");
        match r.emit(Format::Csv, bad) {
            Err(Error::Io { path, .. }) => assert_eq!(path, bad),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_csv("a,b\n1,2\n", Path::new("f.csv")),
            Err(Error::Format { .. })
        ));
        assert!(matches!(read_csv(bad), Err(Error::Io { .. })));
    }
}
