//! Delimiter-separated numeric text blocks.
//!
//! Fields are separated by commas and/or whitespace. Lines starting with `#`
//! are comments and blank lines are ignored. Values are written with the
//! shortest representation that parses back to the identical float.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

pub fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn split_fields(line: &str) -> impl Iterator<Item = &str> {
    line.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
}

pub(crate) fn parse_scalar<T: Scalar>(token: &str, context: &str, line: usize) -> Result<T> {
    token.parse::<T>().map_err(|_| Error::Parse {
        context: context.to_string(),
        line,
        message: format!("non-numeric token `{token}`"),
    })
}

/// Parses the data lines of a numeric block. Line numbers in errors are
/// 1-based and refer to the original text.
pub fn parse_matrix<T: Scalar>(text: &str, context: &str) -> Result<Matrix<T>> {
    let mut rows: Vec<Vec<T>> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let row = split_fields(trimmed)
            .map(|tok| parse_scalar(tok, context, idx + 1))
            .collect::<Result<Vec<T>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse {
                    context: context.to_string(),
                    line: idx + 1,
                    message: format!("expected {} fields, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Empty {
            context: context.to_string(),
        });
    }
    Matrix::from_rows(&rows)
}

pub fn format_row<T: Scalar>(row: &[T], out: &mut String) {
    for (j, v) in row.iter().enumerate() {
        if j > 0 {
            out.push(',');
        }
        let _ = write!(out, "{v}");
    }
    out.push('\n');
}

/// One line per row, comma separated, full precision.
pub fn format_matrix<T: Scalar>(m: &Matrix<T>) -> String {
    let mut out = String::with_capacity(m.nrows() * m.ncols() * 8);
    for row in m.rows_iter() {
        format_row(row, &mut out);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mixed_delimiters_and_comments() {
        let m: Matrix<f64> = parse_matrix("# header\n1, 2  3\n\n4\t5,6\n", "t").unwrap();
        assert_eq!(m.shape(), (2, 3));
        assert_eq!(m.row(1), &[4.0, 5.0, 6.0]);
    }

    #[test]
    fn ragged_rows_rejected() {
        let err = parse_matrix::<f64>("1 2\n3\n", "t").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn full_precision_round_trip() {
        let m = Matrix::from_rows(&[vec![0.1f64, 1.0 / 3.0, -2.5e-300]]).unwrap();
        let back: Matrix<f64> = parse_matrix(&format_matrix(&m), "t").unwrap();
        assert_eq!(m, back);
        let m32 = m.cast::<f32>();
        let back32: Matrix<f32> = parse_matrix(&format_matrix(&m32), "t").unwrap();
        assert_eq!(m32, back32);
    }
}
