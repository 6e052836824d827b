//! Matrix Market and CSV readers and writers.

use crate::error::{invalid, Error, Result};
use crate::linalg::Matrix;
use crate::solver::fmt17;
use std::path::Path;

fn parse_err(file: &str, line: usize, column: usize, msg: impl Into<String>) -> Error {
    Error::Parse { file: file.to_string(), line, column, msg: msg.into() }
}

fn number(tok: &str, file: &str, line: usize, column: usize) -> Result<f64> {
    let v: f64 = tok
        .trim()
        .parse()
        .map_err(|_| parse_err(file, line, column, format!("expected a number, found {:?}", tok.trim())))?;
    if !v.is_finite() {
        return Err(parse_err(file, line, column, "non-finite value"));
    }
    Ok(v)
}

/// Comma-separated rows of numbers; blank lines and `#` comments are skipped.
pub fn parse_csv(text: &str, file: &str) -> Result<Vec<Vec<f64>>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let mut row = Vec::new();
        let mut col = 1;
        for tok in line.split(',') {
            let lead = tok.len() - tok.trim_start().len();
            row.push(number(tok, file, ln + 1, col + lead)?);
            col += tok.len() + 1;
        }
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(parse_err(
                    file,
                    ln + 1,
                    1,
                    format!("row has {} fields, expected {}", row.len(), first.len()),
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_err(file, 1, 1, "no data rows"));
    }
    Ok(rows)
}

fn tokens(line: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in line.char_indices() {
        match (ch.is_whitespace(), start) {
            (false, None) => start = Some(i),
            (true, Some(s)) => {
                out.push((s + 1, &line[s..i]));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s + 1, &line[s..]));
    }
    out
}

fn index(tok: &str, bound: usize, file: &str, line: usize, column: usize) -> Result<usize> {
    let v: usize = tok.parse().map_err(|_| parse_err(file, line, column, format!("expected an index, found {tok:?}")))?;
    if v == 0 || v > bound {
        return Err(parse_err(file, line, column, format!("index {v} outside 1..={bound}")));
    }
    Ok(v - 1)
}

/// Real `coordinate` or `array` Matrix Market, `general` or `symmetric`.
pub fn parse_matrix_market(text: &str, file: &str) -> Result<Matrix> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| parse_err(file, 1, 1, "empty file"))?;
    let h: Vec<String> = header.split_whitespace().map(|s| s.to_ascii_lowercase()).collect();
    if h.len() != 5 || h[0] != "%%matrixmarket" || h[1] != "matrix" {
        return Err(parse_err(file, 1, 1, "expected '%%MatrixMarket matrix <format> real <symmetry>'"));
    }
    let coordinate = match h[2].as_str() {
        "coordinate" => true,
        "array" => false,
        other => return Err(parse_err(file, 1, 1, format!("unsupported format {other}"))),
    };
    if h[3] != "real" && h[3] != "integer" {
        return Err(parse_err(file, 1, 1, format!("unsupported field {}", h[3])));
    }
    let symmetric = match h[4].as_str() {
        "general" => false,
        "symmetric" => true,
        other => return Err(parse_err(file, 1, 1, format!("unsupported symmetry {other}"))),
    };
    let mut body = lines.filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('%'));
    let (sl, size_line) = body.next().ok_or_else(|| parse_err(file, 2, 1, "missing size line"))?;
    let size = tokens(size_line);
    let want = if coordinate { 3 } else { 2 };
    if size.len() != want {
        return Err(parse_err(file, sl + 1, 1, format!("size line needs {want} integers")));
    }
    let dim = |k: usize| -> Result<usize> {
        size[k].1.parse().map_err(|_| parse_err(file, sl + 1, size[k].0, "expected an integer"))
    };
    let (rows, cols) = (dim(0)?, dim(1)?);
    let mut m = Matrix::zeros(rows, cols);
    if coordinate {
        let nnz = dim(2)?;
        let mut seen = 0;
        for (ln, l) in body {
            let t = tokens(l);
            if t.len() != 3 {
                return Err(parse_err(file, ln + 1, 1, "entry needs row, column and value"));
            }
            let i = index(t[0].1, rows, file, ln + 1, t[0].0)?;
            let j = index(t[1].1, cols, file, ln + 1, t[1].0)?;
            let v = number(t[2].1, file, ln + 1, t[2].0)?;
            m.set(i, j, v);
            if symmetric && i != j {
                m.set(j, i, v);
            }
            seen += 1;
        }
        if seen != nnz {
            return Err(parse_err(file, sl + 1, 1, format!("declared {nnz} entries, found {seen}")));
        }
    } else {
        // Column-major; symmetric arrays list the lower triangle only.
        let mut slots: Vec<(usize, usize)> = Vec::new();
        for j in 0..cols {
            for i in 0..rows {
                if !symmetric || i >= j {
                    slots.push((i, j));
                }
            }
        }
        let mut k = 0;
        for (ln, l) in body {
            for (c, tok) in tokens(l) {
                let &(i, j) = slots.get(k).ok_or_else(|| parse_err(file, ln + 1, c, "more values than the declared size"))?;
                let v = number(tok, file, ln + 1, c)?;
                m.set(i, j, v);
                if symmetric {
                    m.set(j, i, v);
                }
                k += 1;
            }
        }
        if k != slots.len() {
            return Err(parse_err(file, sl + 1, 1, format!("expected {} values, found {k}", slots.len())));
        }
    }
    Ok(m)
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn is_mtx(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("mtx"))
}

pub fn load_matrix(path: &Path) -> Result<Matrix> {
    let text = read(path)?;
    let name = path.display().to_string();
    if is_mtx(path) {
        parse_matrix_market(&text, &name)
    } else {
        Matrix::from_rows(&parse_csv(&text, &name)?)
    }
}

/// A single row or a single column.
pub fn load_vector(path: &Path) -> Result<Vec<f64>> {
    let m = load_matrix(path)?;
    if m.rows == 1 || m.cols == 1 {
        Ok(m.data)
    } else {
        Err(invalid(format!("{}: expected a vector, found a {}x{} matrix", path.display(), m.rows, m.cols)))
    }
}

pub fn matrix_to_csv(m: &Matrix) -> String {
    let mut s = String::new();
    for i in 0..m.rows {
        let row: Vec<String> = m.row(i).iter().map(|v| fmt17(*v)).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

pub fn matrix_to_mtx(m: &Matrix) -> String {
    let mut s = format!("%%MatrixMarket matrix array real general\n{} {}\n", m.rows, m.cols);
    for j in 0..m.cols {
        for i in 0..m.rows {
            s.push_str(&fmt17(m.get(i, j)));
            s.push('\n');
        }
    }
    s
}
