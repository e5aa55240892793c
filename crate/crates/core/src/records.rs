//! Experiment records and their CSV / JSON-lines emission.
//!
//! CSV columns, in order:
//!
//! `command,s,p,alpha,sigma,N,lambda,seminorm_term,penalty_term,iterations,el_residual,design_checksum,seed,wall_time_ms`
//!
//! Floats are written in scientific notation with 17 significant digits, so
//! parsing a field gives back the exact `f64`. Absent `alpha` / `sigma` are
//! empty fields in CSV and `null` in JSON lines.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const HEADER: [&str; 14] = [
    "command",
    "s",
    "p",
    "alpha",
    "sigma",
    "N",
    "lambda",
    "seminorm_term",
    "penalty_term",
    "iterations",
    "el_residual",
    "design_checksum",
    "seed",
    "wall_time_ms",
];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordFormat {
    #[default]
    Csv,
    Jsonlines,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub command: String,
    pub s: f64,
    pub p: f64,
    pub alpha: Option<f64>,
    pub sigma: Option<f64>,
    #[serde(rename = "N")]
    pub n: usize,
    pub lambda: f64,
    pub seminorm_term: f64,
    pub penalty_term: f64,
    pub iterations: usize,
    pub el_residual: f64,
    pub design_checksum: String,
    pub seed: u64,
    pub wall_time_ms: u64,
}

/// First 16 hex digits of SHA-256 over `round(v · 10¹²)` as little-endian i64.
pub fn design_checksum(values: &[f64]) -> String {
    let mut hasher = Sha256::new();
    for &v in values {
        let q = (v * 1e12).round() as i64;
        hasher.update(q.to_le_bytes());
    }
    let digest = hasher.finalize();
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

fn float(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt_float(x: Option<f64>) -> String {
    x.map(float).unwrap_or_default()
}

impl ExperimentRecord {
    fn csv_fields(&self) -> [String; 14] {
        [
            self.command.clone(),
            float(self.s),
            float(self.p),
            opt_float(self.alpha),
            opt_float(self.sigma),
            self.n.to_string(),
            float(self.lambda),
            float(self.seminorm_term),
            float(self.penalty_term),
            self.iterations.to_string(),
            float(self.el_residual),
            self.design_checksum.clone(),
            self.seed.to_string(),
            self.wall_time_ms.to_string(),
        ]
    }
}

/// Writes `records` to `path`. An empty list gives a header-only CSV or an
/// empty JSON-lines file.
pub fn emit_records(records: &[ExperimentRecord], path: &Path, format: RecordFormat) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_records(records, BufWriter::new(file), format).map_err(|e| Error::io(path, e))
}

/// [`emit_records`] into any writer.
pub fn write_records<W: Write>(records: &[ExperimentRecord], writer: W, format: RecordFormat) -> std::io::Result<()> {
    match format {
        RecordFormat::Csv => {
            let mut w = csv::Writer::from_writer(writer);
            w.write_record(HEADER)?;
            for r in records {
                w.write_record(r.csv_fields())?;
            }
            w.flush()
        }
        RecordFormat::Jsonlines => {
            let mut w = writer;
            for r in records {
                serde_json::to_writer(&mut w, r)?;
                w.write_all(b"\n")?;
            }
            w.flush()
        }
    }
}

/// Reads a CSV written by [`emit_records`].
pub fn read_csv(path: &Path) -> Result<Vec<ExperimentRecord>> {
    let bad = |message: String| Error::Records {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => bad(format!("{other:?}")),
    })?;
    let header = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    if header.iter().ne(HEADER) {
        return Err(bad(format!("unexpected header {:?}", header.iter().collect::<Vec<_>>())));
    }
    reader
        .records()
        .enumerate()
        .map(|(line, row)| {
            let row = row.map_err(|e| bad(e.to_string()))?;
            let field = |i: usize| row.get(i).unwrap_or("");
            let ctx = |i: usize| bad(format!("row {}: cannot parse `{}` as {}", line + 1, field(i), HEADER[i]));
            let f = |i: usize| field(i).parse::<f64>().map_err(|_| ctx(i));
            let of = |i: usize| if field(i).is_empty() { Ok(None) } else { f(i).map(Some) };
            Ok(ExperimentRecord {
                command: field(0).to_string(),
                s: f(1)?,
                p: f(2)?,
                alpha: of(3)?,
                sigma: of(4)?,
                n: field(5).parse().map_err(|_| ctx(5))?,
                lambda: f(6)?,
                seminorm_term: f(7)?,
                penalty_term: f(8)?,
                iterations: field(9).parse().map_err(|_| ctx(9))?,
                el_residual: f(10)?,
                design_checksum: field(11).to_string(),
                seed: field(12).parse().map_err(|_| ctx(12))?,
                wall_time_ms: field(13).parse().map_err(|_| ctx(13))?,
            })
        })
        .collect()
}
