//! CSV and JSON input/output. Matrices are headerless CSV of numbers, one
//! row per line. Every file is written to a temporary sibling and renamed,
//! so a failed command never leaves partial output behind.

use crate::error::{MuselError, Result};
use crate::matrix::DenseMatrix;
use crate::sim::TableRow;
use serde::Serialize;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .flexible(true)
        .from_path(path)
        .map_err(|e| MuselError::Parse(format!("{}: {e}", path.display())))
}

/// Parses a numeric CSV; errors name the 1-based row and column of the
/// first bad cell.
pub fn parse_matrix_csv(text: &str, origin: &str) -> Result<DenseMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(text.as_bytes());
    collect_rows(rdr.records(), origin)
}

pub fn read_matrix_csv(path: &Path) -> Result<DenseMatrix> {
    collect_rows(reader(path)?.records(), &path.display().to_string())
}

fn collect_rows<R: std::io::Read>(records: csv::StringRecordsIter<'_, R>, origin: &str) -> Result<DenseMatrix> {
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (r, rec) in records.enumerate() {
        let rec = rec.map_err(|e| MuselError::Parse(format!("{origin}: row {}: {e}", r + 1)))?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        match cols {
            None => cols = Some(rec.len()),
            Some(c) if c != rec.len() => {
                return Err(MuselError::Parse(format!(
                    "{origin}: row {} has {} columns, expected {c}",
                    rows + 1,
                    rec.len()
                )))
            }
            _ => {}
        }
        for (c, cell) in rec.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                MuselError::Parse(format!("{origin}: row {}, column {}: cannot parse {cell:?}", rows + 1, c + 1))
            })?;
            if !v.is_finite() {
                return Err(MuselError::Parse(format!(
                    "{origin}: row {}, column {}: non-finite value",
                    rows + 1,
                    c + 1
                )));
            }
            data.push(v);
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| MuselError::Parse(format!("{origin}: no data")))?;
    DenseMatrix::new(rows, cols, data)
}

/// A vector stored as a single column or a single row.
pub fn read_vector_csv(path: &Path) -> Result<Vec<f64>> {
    let m = read_matrix_csv(path)?;
    if m.cols() == 1 || m.rows() == 1 {
        Ok(m.into_vec())
    } else {
        Err(MuselError::Parse(format!(
            "{}: expected a single row or column, got {}x{}",
            path.display(),
            m.rows(),
            m.cols()
        )))
    }
}

pub fn matrix_to_csv(m: &DenseMatrix) -> String {
    let mut out = String::new();
    for i in 0..m.rows() {
        let line: Vec<String> = m.row(i).iter().map(|v| format!("{v:e}")).collect();
        let _ = writeln!(out, "{}", line.join(","));
    }
    out
}

pub fn vector_to_csv(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:e}\n")).collect()
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable value");
    s.push('\n');
    s
}

const TABLE_HEADER: [&str; 18] = [
    "s",
    "estimator",
    "delta",
    "mu",
    "reps_ok",
    "reps_failed",
    "tau_mean",
    "err1_mean",
    "err1_sd",
    "err2_mean",
    "err2_sd",
    "err2_over_n_mean",
    "err2_over_n_sd",
    "nb1_mean",
    "nb1_sd",
    "nb2_mean",
    "nb2_sd",
    "exact",
];

/// One line per table row; floats in exponent form with 16 significant
/// digits after the point so the bytes are a pure function of the values.
pub fn table_rows_to_csv(rows: &[TableRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TABLE_HEADER).expect("in-memory write");
    let f = |v: f64| format!("{v:.16e}");
    for r in rows {
        w.write_record([
            r.s.to_string(),
            r.estimator.label().to_string(),
            f(r.delta),
            f(r.mu),
            r.reps_ok.to_string(),
            r.reps_failed.to_string(),
            f(r.tau_mean),
            f(r.err1.mean),
            f(r.err1.sd),
            f(r.err2.mean),
            f(r.err2.sd),
            f(r.err2_over_n.mean),
            f(r.err2_over_n.sd),
            f(r.nb1.mean),
            f(r.nb1.sd),
            f(r.nb2.mean),
            f(r.nb2.sd),
            r.exact.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}
