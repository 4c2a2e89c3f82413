//! File formats: headerless numeric CSV panels (rows = time, columns =
//! assets, `.` decimal, UTF-8), dense coefficient CSV sidecars, and tidy CSV
//! result tables. Malformed input is reported with 1-based line numbers.

use crate::design::ReturnPanel;
use crate::error::{BekkError, Result};
use nalgebra::DMatrix;
use std::io::Write;
use std::path::Path;

/// Reads a headerless numeric CSV into a matrix, validating that every row
/// has the same number of columns and every cell parses as a float.
pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| BekkError::data(format!("{}: {e}", path.display())))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = 0usize;
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 1;
        let record =
            record.map_err(|e| BekkError::data(format!("{}: line {line}: {e}", path.display())))?;
        if record.is_empty() || (record.len() == 1 && record[0].is_empty()) {
            continue;
        }
        if width == 0 {
            width = record.len();
        } else if record.len() != width {
            return Err(BekkError::data(format!(
                "{}: line {line}: expected {width} columns, found {}",
                path.display(),
                record.len()
            )));
        }
        let mut row = Vec::with_capacity(width);
        for (col, cell) in record.iter().enumerate() {
            let value: f64 = cell.parse().map_err(|_| {
                BekkError::data(format!(
                    "{}: line {line}, column {}: not a number: {cell:?}",
                    path.display(),
                    col + 1
                ))
            })?;
            row.push(value);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(BekkError::data(format!("{}: no data rows", path.display())));
    }
    let t = rows.len();
    Ok(DMatrix::from_fn(t, width, |i, j| rows[i][j]))
}

/// Reads a return panel from headerless CSV.
pub fn read_panel_csv(path: &Path) -> Result<ReturnPanel> {
    let m = read_matrix_csv(path)?;
    ReturnPanel::new(m).map_err(|e| match e {
        BekkError::Data(msg) => BekkError::data(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Formats a float for CSV output; infinities use the `inf` spelling the
/// parsers accept back.
pub fn fmt_f64(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".to_string() } else { "-inf".to_string() }
    } else {
        format!("{v}")
    }
}

/// Writes a matrix as headerless CSV.
pub fn write_matrix_csv(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| fmt_f64(m[(i, j)])).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Writes a return panel as headerless CSV.
pub fn write_panel_csv(path: &Path, panel: &ReturnPanel) -> Result<()> {
    write_matrix_csv(path, panel.as_matrix())
}

/// Writes a tidy CSV with a header row.
pub fn write_tidy_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn round_trip_panel() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("panel.csv");
        let m = DMatrix::from_row_slice(3, 2, &[0.1, -0.2, 1.5, 2.25, -0.75, 0.0]);
        let panel = ReturnPanel::new(m.clone()).unwrap();
        write_panel_csv(&path, &panel).unwrap();
        let back = read_panel_csv(&path).unwrap();
        assert_eq!(back.as_matrix(), &m);
    }

    #[test]
    fn ragged_rows_report_line() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "1,2\n3,4,5\n").unwrap();
        let err = read_panel_csv(&path).unwrap_err().to_string();
        assert!(err.contains("line 2"), "got: {err}");
    }

    #[test]
    fn non_numeric_cell_reports_position() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "1,2\n3,oops\n").unwrap();
        let err = read_panel_csv(&path).unwrap_err().to_string();
        assert!(err.contains("line 2") && err.contains("column 2"), "got: {err}");
    }

    #[test]
    fn infinity_round_trip() {
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
        let parsed: f64 = "inf".parse().unwrap();
        assert!(parsed.is_infinite());
    }
}
