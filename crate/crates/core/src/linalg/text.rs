//! Plain CSV text format for matrices and vectors: one matrix row per line,
//! comma separated, `.` decimal separator, no header.

use std::io::{Read, Write};
use std::path::Path;

use super::{Matrix, Vector};
use crate::error::{Error, Result};

pub fn parse_matrix<R: Read>(reader: R) -> Result<Matrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let row = record
            .iter()
            .enumerate()
            .map(|(col, field)| {
                let v: f64 = field.parse().map_err(|_| {
                    Error::Parse(format!("row {line}, column {col}: cannot parse {field:?}"))
                })?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::NonFinite { row: line, col })
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    let cols = rows.first().map(Vec::len).unwrap_or(0);
    if rows.is_empty() || cols == 0 {
        return Err(Error::Parse("empty matrix".into()));
    }
    if let Some(bad) = rows.iter().position(|r| r.len() != cols) {
        return Err(Error::Parse(format!(
            "row {bad} has {} entries, expected {cols}",
            rows[bad].len()
        )));
    }
    Ok(Matrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

/// Reads a vector stored either as a single row or as a single column.
pub fn parse_vector<R: Read>(reader: R) -> Result<Vector> {
    let m = parse_matrix(reader)?;
    match m.shape() {
        (1, _) => Ok(m.row(0).transpose()),
        (_, 1) => Ok(m.column(0).into_owned()),
        (r, c) => Err(Error::Parse(format!(
            "expected a single row or column, found a {r}x{c} matrix"
        ))),
    }
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<Matrix> {
    parse_matrix(std::fs::File::open(path)?)
}

pub fn read_vector(path: impl AsRef<Path>) -> Result<Vector> {
    parse_vector(std::fs::File::open(path)?)
}

pub fn write_matrix<W: Write>(writer: W, m: &Matrix) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(writer);
    for row in m.row_iter() {
        wtr.write_record(row.iter().map(|v| v.to_string()))?;
    }
    wtr.flush()?;
    Ok(())
}

/// Writes a vector as a single column.
pub fn write_vector<W: Write>(writer: W, v: &Vector) -> Result<()> {
    write_matrix(writer, &Matrix::from_column_slice(v.len(), 1, v.as_slice()))
}
