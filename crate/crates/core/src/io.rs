//! Plain-text matrix I/O shared by datasets, checkpoints and outputs.
//!
//! Floats are written with Rust's shortest round-trip representation, so a
//! written value parses back to the identical `f64`.

use std::fmt::Write as _;
use std::path::Path;

use crate::autodiff::Matrix;
use crate::error::{Error, Result};

pub fn format_float(v: f64) -> String {
    format!("{v}")
}

/// Dense comma-separated rows, LF line endings, no header.
pub fn matrix_to_csv(m: &Matrix) -> String {
    let mut out = String::new();
    for i in 0..m.rows() {
        for (j, v) in m.row(i).iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            write!(out, "{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// Parses [`matrix_to_csv`] output. `what` names the source in errors.
pub fn matrix_from_csv(text: &str, what: &str) -> Result<Matrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|cell| cell.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Format(format!("{what}: malformed row {}: {e}", line_no + 1)))?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Format(format!(
                    "{what}: malformed row {}: expected {} columns, found {}",
                    line_no + 1,
                    first.len(),
                    row.len()
                )));
            }
        }
        rows.push(row);
    }
    Matrix::from_rows(&rows).ok_or_else(|| Error::Format(format!("{what}: ragged rows")))
}

pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn csv_round_trip_is_bit_exact(data in proptest::collection::vec(proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO, 12)) {
            let m = Matrix::from_vec(3, 4, data);
            let back = matrix_from_csv(&matrix_to_csv(&m), "test").unwrap();
            for (a, b) in m.as_slice().iter().zip(back.as_slice()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn malformed_cell_reports_row() {
        let err = matrix_from_csv("0,1\n1,x\n", "f.csv").unwrap_err();
        assert!(err.to_string().contains("malformed row 2"), "{err}");
    }
}
