//! CSV plumbing shared by the artifact writers.

use std::fs::File;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};

/// Round-trip formatting with 17 significant digits.
pub fn fmt(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub fn parse(s: &str) -> Option<f64> {
    match s.trim() {
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        t => t.parse().ok(),
    }
}

pub fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::InvalidInput(format!("{}: {other:?}", path.display())),
    }
}

pub fn writer(path: &Path) -> Result<csv::Writer<File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(f))
}

/// Writes rows of numbers under a header.
pub fn write_table(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for row in rows {
        w.write_record(row.iter().map(|v| fmt(*v))).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes a field as `x,value` (1D) or `x,y,value` (2D) in index order.
pub fn write_field(path: &Path, name: &str, f: &ScalarField) -> Result<()> {
    let g = *f.grid();
    let header: Vec<&str> = if g.dim() == 1 { vec!["x", name] } else { vec!["x", "y", name] };
    write_table(
        path,
        &header,
        (0..g.len()).map(|k| {
            let c = g.center(k);
            if g.dim() == 1 {
                vec![c[0], f[k]]
            } else {
                vec![c[0], c[1], f[k]]
            }
        }),
    )
}

/// Reads a table of numbers with a header row.
pub fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = r
        .headers()
        .map_err(|e| csv_err(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let row = rec
            .iter()
            .map(|s| {
                parse(s).ok_or_else(|| {
                    Error::InvalidInput(format!("{} row {}: bad number `{s}`", path.display(), line + 2))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

/// Inverse of [`write_field`]: rebuilds the grid from the cell centres.
pub fn read_field(path: &Path) -> Result<ScalarField> {
    let (header, rows) = read_table(path)?;
    let bad = |m: &str| Error::InvalidInput(format!("{}: {m}", path.display()));
    let dim = match header.len() {
        2 => 1,
        3 => 2,
        _ => return Err(bad("expected columns x,value or x,y,value")),
    };
    let len = rows.len();
    let n = if dim == 1 { len } else { (len as f64).sqrt().round() as usize };
    if n < 2 || (dim == 2 && n * n != len) {
        return Err(bad("row count does not form a square grid"));
    }
    let h = rows[1][0] - rows[0][0];
    let origin = [rows[0][0] - h / 2.0, if dim == 2 { rows[0][1] - h / 2.0 } else { 0.0 }];
    let grid = Grid::new(dim, n, origin, h * n as f64)?;
    ScalarField::from_values(grid, rows.iter().map(|r| r[dim]).collect())
}
