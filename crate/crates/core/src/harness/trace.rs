//! Closed-loop trace records and their CSV/JSON encodings.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::{Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 15] = [
    "t",
    "w1",
    "w2",
    "w3",
    "th1",
    "th2",
    "th3",
    "u1",
    "u2",
    "u3",
    "kkt_res",
    "grid_steps",
    "corr_iters",
    "solve_ms",
    "delta_final",
];

/// One sampling instant. Rates are in deg/s, angles in deg, torques in N·m.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: f64,
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
    pub th1: f64,
    pub th2: f64,
    pub th3: f64,
    pub u1: f64,
    pub u2: f64,
    pub u3: f64,
    pub kkt_res: f64,
    pub grid_steps: usize,
    pub corr_iters: usize,
    pub solve_ms: f64,
    pub delta_final: f64,
}

impl TraceRecord {
    pub fn xi_deg(&self) -> Vector6<f64> {
        Vector6::new(self.w1, self.w2, self.w3, self.th1, self.th2, self.th3)
    }

    pub fn u(&self) -> Vector3<f64> {
        Vector3::new(self.u1, self.u2, self.u3)
    }

    pub fn set_xi_deg(&mut self, xi: &Vector6<f64>) {
        [self.w1, self.w2, self.w3, self.th1, self.th2, self.th3] = [xi[0], xi[1], xi[2], xi[3], xi[4], xi[5]];
    }

    pub fn set_u(&mut self, u: &Vector3<f64>) {
        [self.u1, self.u2, self.u3] = [u[0], u[1], u[2]];
    }

    fn csv_fields(&self) -> [String; 15] {
        let e = |v: f64| format!("{v:e}");
        [
            e(self.t),
            e(self.w1),
            e(self.w2),
            e(self.w3),
            e(self.th1),
            e(self.th2),
            e(self.th3),
            e(self.u1),
            e(self.u2),
            e(self.u3),
            e(self.kkt_res),
            self.grid_steps.to_string(),
            self.corr_iters.to_string(),
            e(self.solve_ms),
            e(self.delta_final),
        ]
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TraceFormat {
    #[default]
    Csv,
    Json,
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(source) => io_err(path, source),
            _ => unreachable!("checked is_io_error"),
        }
    } else {
        Error::Format(format!("{}: {e}", path.display()))
    }
}

/// Writes the records as CSV (header included, floats in shortest
/// round-trip scientific notation) or as a JSON array.
pub fn write_trace(records: &[TraceRecord], path: &Path, format: TraceFormat) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    match format {
        TraceFormat::Csv => {
            let mut w = csv::Writer::from_writer(BufWriter::new(file));
            w.write_record(CSV_HEADER).map_err(|e| csv_err(path, e))?;
            for r in records {
                w.write_record(r.csv_fields()).map_err(|e| csv_err(path, e))?;
            }
            w.flush().map_err(|e| io_err(path, e))?;
        }
        TraceFormat::Json => {
            let mut w = BufWriter::new(file);
            serde_json::to_writer_pretty(&mut w, records).map_err(|e| Error::Format(e.to_string()))?;
            w.write_all(b"\n").map_err(|e| io_err(path, e))?;
            w.flush().map_err(|e| io_err(path, e))?;
        }
    }
    Ok(())
}

/// Reads a trace written by [`write_trace`].
pub fn read_trace(path: &Path, format: TraceFormat) -> Result<Vec<TraceRecord>> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    match format {
        TraceFormat::Csv => {
            let mut r = csv::Reader::from_reader(BufReader::new(file));
            let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
            if header.iter().ne(CSV_HEADER.iter().copied()) {
                return Err(Error::Format(format!("{}: unexpected header {header:?}", path.display())));
            }
            r.deserialize()
                .map(|row| row.map_err(|e| csv_err(path, e)))
                .collect()
        }
        TraceFormat::Json => {
            serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(t: f64) -> TraceRecord {
        TraceRecord {
            t,
            w1: 0.1,
            w2: -1.0 / 3.0,
            w3: 1e-300,
            th1: 15.000000000000002,
            th2: -0.0,
            th3: 6.02e23,
            u1: 2.0,
            u2: -2.0,
            u3: f64::MIN_POSITIVE,
            kkt_res: 9.99e-6,
            grid_steps: 3,
            corr_iters: 7,
            solve_ms: 12.5,
            delta_final: 1e-8,
        }
    }

    #[test]
    fn empty_trace_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_trace(&[], &path, TraceFormat::Csv).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, format!("{}\n", CSV_HEADER.join(",")));
        assert!(read_trace(&path, TraceFormat::Csv).unwrap().is_empty());
    }

    #[test]
    fn equilibrium_row() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let rec = TraceRecord {
            t: 3.0,
            solve_ms: 0.25,
            delta_final: 1e-8,
            ..TraceRecord::default()
        };
        write_trace(&[rec], &path, TraceFormat::Csv).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let row = text.lines().nth(1).unwrap();
        assert_eq!(row, "3e0,0e0,0e0,0e0,0e0,0e0,0e0,0e0,0e0,0e0,0e0,0,0,2.5e-1,1e-8");
    }

    #[test]
    fn both_formats_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let records: Vec<_> = (0..5).map(|k| sample(3.0 * k as f64)).collect();
        for (name, fmt) in [("t.csv", TraceFormat::Csv), ("t.json", TraceFormat::Json)] {
            let path = dir.path().join(name);
            write_trace(&records, &path, fmt).unwrap();
            let back = read_trace(&path, fmt).unwrap();
            assert_eq!(back.len(), records.len());
            for (a, b) in back.iter().zip(&records) {
                assert_eq!(a.th2.to_bits(), b.th2.to_bits());
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn unwritable_path_reports_path() {
        let err = write_trace(&[], Path::new("/nonexistent-dir/x.csv"), TraceFormat::Csv).unwrap_err();
        assert!(matches!(&err, Error::Io { path, .. } if path.contains("nonexistent-dir")));
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_bit_exact(vals in proptest::collection::vec(proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO, 12)) {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("p.csv");
            let rec = TraceRecord {
                t: vals[0], w1: vals[1], w2: vals[2], w3: vals[3], th1: vals[4], th2: vals[5], th3: vals[6],
                u1: vals[7], u2: vals[8], u3: vals[9], kkt_res: vals[10], grid_steps: 2, corr_iters: 5,
                solve_ms: vals[11], delta_final: vals[0].abs(),
            };
            write_trace(std::slice::from_ref(&rec), &path, TraceFormat::Csv).unwrap();
            let back = read_trace(&path, TraceFormat::Csv).unwrap();
            let bits = |r: &TraceRecord| [r.t, r.w1, r.w2, r.w3, r.th1, r.th2, r.th3, r.u1, r.u2, r.u3, r.kkt_res, r.solve_ms].map(f64::to_bits);
            prop_assert_eq!(bits(&back[0]), bits(&rec));
        }
    }
}
