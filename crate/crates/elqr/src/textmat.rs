//! Plain-text matrices: one row per line, entries separated by whitespace
//! or commas, `#` starts a comment.

use std::path::Path;

use elqr_core::{Matrix, Vector};

use crate::error::{read_file, write_file, CliError, Result};

fn parse_row(line: &str, what: &str, line_no: usize) -> Result<Vec<f64>> {
    line.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| CliError::field(what, format!("line {line_no}: `{t}` is not a finite number")))
        })
        .collect()
}

fn from_rows(rows: Vec<Vec<f64>>, what: &str) -> Result<Matrix> {
    let cols = rows.first().map_or(0, Vec::len);
    if cols == 0 {
        return Err(CliError::field(what, "matrix is empty"));
    }
    if let Some(i) = rows.iter().position(|r| r.len() != cols) {
        return Err(CliError::field(
            what,
            format!("ragged matrix: row {} has {} entries, row 1 has {cols}", i + 1, rows[i].len()),
        ));
    }
    Ok(Matrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

pub fn parse_matrix_text(text: &str, what: &str) -> Result<Matrix> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("");
        let row = parse_row(body, what, i + 1)?;
        if !row.is_empty() {
            rows.push(row);
        }
    }
    from_rows(rows, what)
}

pub fn read_matrix(path: &Path) -> Result<Matrix> {
    let what = path.display().to_string();
    parse_matrix_text(&read_file(path)?, &what)
}

/// Entries use the shortest text that parses back to the same `f64`.
pub fn format_matrix_text(m: &Matrix) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{}", m[(i, j)])).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn write_matrix(path: &Path, m: &Matrix) -> Result<()> {
    write_file(path, &format_matrix_text(m))
}

/// `1,2,3` (commas or whitespace).
pub fn parse_vector(text: &str, what: &str) -> Result<Vector> {
    let v = parse_row(text, what, 1)?;
    if v.is_empty() {
        return Err(CliError::field(what, "vector is empty"));
    }
    Ok(Vector::from_vec(v))
}

/// Inline matrix argument of size `rows x cols`: `I`, `-I`, `0.5I` (scaled
/// rectangular identity) or explicit rows `a,b;c,d`.
pub fn parse_inline_matrix(text: &str, rows: usize, cols: usize, what: &str) -> Result<Matrix> {
    let t = text.trim();
    if let Some(scale) = t.strip_suffix('I') {
        let s = match scale.trim() {
            "" | "+" => 1.0,
            "-" => -1.0,
            other => other
                .trim_end_matches('*')
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| CliError::field(what, format!("`{text}` is not a multiple of I")))?,
        };
        return Ok(Matrix::identity(rows, cols) * s);
    }
    let parsed: Result<Vec<Vec<f64>>> = t.split(';').map(|r| parse_row(r, what, 1)).collect();
    let m = from_rows(parsed?, what)?;
    if m.nrows() != rows || m.ncols() != cols {
        return Err(CliError::field(
            what,
            format!("expected {rows}x{cols}, got {}x{}", m.nrows(), m.ncols()),
        ));
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip_is_exact() {
        let m = Matrix::from_row_slice(2, 3, &[0.1, -2.5e-17, 3.0, 1.0 / 3.0, 7e300, -0.0]);
        let back = parse_matrix_text(&format_matrix_text(&m), "m").unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn comments_commas_and_blank_lines() {
        let m = parse_matrix_text("# P\n1, 0\n\n0 2 # second row\n", "p").unwrap();
        assert_eq!(m, Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]));
    }

    #[test]
    fn ragged_text_is_rejected() {
        let err = parse_matrix_text("1 2\n3\n", "p.txt").unwrap_err();
        assert!(err.to_string().contains("p.txt"));
    }

    #[test]
    fn inline_forms() {
        assert_eq!(parse_inline_matrix("-I", 2, 2, "L").unwrap(), -Matrix::identity(2, 2));
        assert_eq!(parse_inline_matrix("0.5I", 1, 2, "L").unwrap(), Matrix::identity(1, 2) * 0.5);
        assert_eq!(
            parse_inline_matrix("1,2;3,4", 2, 2, "L").unwrap(),
            Matrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0])
        );
        assert!(parse_inline_matrix("1,2", 2, 2, "L").is_err());
        assert!(parse_inline_matrix("xI", 2, 2, "L").is_err());
    }
}
