//! Text formats.
//!
//! Symmetric tensors:
//!
//! ```text
//! symtensor v1 order=<m> dim=<n>
//! <i_1> ... <i_m> <value> <0|1>
//! ```
//!
//! one line per sorted index. Lines may be omitted, which leaves the entry
//! absent. Matrices are CSV whose first line holds `<rows>,<cols>`.

use std::io::{BufRead, Write};

use nalgebra::DMatrix;

use super::symtensor::SymmetricTensor;
use crate::completion::ObservationMask;
use crate::error::{Error, Result};

const TENSOR_MAGIC: &str = "symtensor v1";

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

pub fn write_symtensor<W: Write>(t: &SymmetricTensor, mut out: W) -> Result<()> {
    writeln!(out, "{TENSOR_MAGIC} order={} dim={}", t.order(), t.dim())?;
    for (idx, value) in t.entries() {
        for s in &idx {
            write!(out, "{s} ")?;
        }
        match value {
            Some(v) => writeln!(out, "{v:?} 1")?,
            None => writeln!(out, "0.0 0")?,
        }
    }
    Ok(())
}

fn header_field(token: Option<&str>, key: &str) -> Option<usize> {
    token?.strip_prefix(key)?.strip_prefix('=')?.parse().ok()
}

pub fn read_symtensor<R: BufRead>(input: R) -> Result<SymmetricTensor> {
    let mut lines = input.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty input"))?;
    let header = header?;
    let rest = header
        .trim()
        .strip_prefix(TENSOR_MAGIC)
        .ok_or_else(|| parse_err(1, format!("expected header starting with `{TENSOR_MAGIC}`")))?;
    let mut fields = rest.split_whitespace();
    let order = header_field(fields.next(), "order").ok_or_else(|| parse_err(1, "missing order="))?;
    let dim = header_field(fields.next(), "dim").ok_or_else(|| parse_err(1, "missing dim="))?;
    let mut t = SymmetricTensor::empty(order, dim);
    for (i, line) in lines {
        let lineno = i + 1;
        let line = line?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        if tokens.len() != order + 2 {
            return Err(parse_err(lineno, format!("expected {} fields, got {}", order + 2, tokens.len())));
        }
        let idx = tokens[..order]
            .iter()
            .map(|s| s.parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| parse_err(lineno, e.to_string()))?;
        if idx.iter().any(|&s| s >= dim) {
            return Err(parse_err(lineno, "index out of range"));
        }
        let value: f64 = tokens[order].parse().map_err(|_| parse_err(lineno, "bad value"))?;
        match tokens[order + 1] {
            "1" => {
                if !value.is_finite() {
                    return Err(parse_err(lineno, "non-finite value"));
                }
                t.set(&idx, value)?;
            }
            "0" => t.set_absent(&idx),
            other => return Err(parse_err(lineno, format!("presence flag must be 0 or 1, got `{other}`"))),
        }
    }
    Ok(t)
}

pub fn write_matrix_csv<W: Write>(m: &DMatrix<f64>, mut out: W) -> Result<()> {
    writeln!(out, "{},{}", m.nrows(), m.ncols())?;
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:?}", m[(i, j)])).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn read_matrix_csv<R: BufRead>(input: R) -> Result<DMatrix<f64>> {
    let mut lines = input.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty input"))?;
    let header = header?;
    let dims: Vec<usize> = header
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| parse_err(1, "header must be `<rows>,<cols>`"))?;
    let [rows, cols] = dims[..] else {
        return Err(parse_err(1, "header must be `<rows>,<cols>`"));
    };
    let mut m = DMatrix::zeros(rows, cols);
    let mut r = 0;
    for (i, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if r >= rows {
            return Err(parse_err(i + 1, "more rows than the header declares"));
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| parse_err(i + 1, e.to_string()))?;
        if vals.len() != cols {
            return Err(parse_err(i + 1, format!("expected {cols} values, got {}", vals.len())));
        }
        for (j, v) in vals.into_iter().enumerate() {
            m[(r, j)] = v;
        }
        r += 1;
    }
    if r != rows {
        return Err(parse_err(0, format!("expected {rows} rows, got {r}")));
    }
    Ok(m)
}

/// Reads a 0/1 CSV (same layout as matrices) where 1 marks a revealed entry.
pub fn read_mask_csv<R: BufRead>(input: R) -> Result<ObservationMask> {
    let m = read_matrix_csv(input)?;
    let mut revealed = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let v = m[(i, j)];
            if v != 0.0 && v != 1.0 {
                return Err(parse_err(i + 2, format!("mask entries must be 0 or 1, got {v}")));
            }
            revealed.push(v == 1.0);
        }
    }
    ObservationMask::from_revealed(m.nrows(), m.ncols(), revealed)
}

pub fn write_mask_csv<W: Write>(mask: &ObservationMask, mut out: W) -> Result<()> {
    writeln!(out, "{},{}", mask.rows(), mask.cols())?;
    for i in 0..mask.rows() {
        let row: Vec<&str> = (0..mask.cols())
            .map(|j| if mask.is_revealed(i, j) { "1" } else { "0" })
            .collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn tensor_file_layout() {
        let mut t = SymmetricTensor::empty(2, 2);
        t.set(&[1, 0], 0.25).unwrap();
        let mut buf = Vec::new();
        write_symtensor(&t, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "symtensor v1 order=2 dim=2\n0 0 0.0 0\n0 1 0.25 1\n1 1 0.0 0\n"
        );
        let back = read_symtensor(text.as_bytes()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn tensor_parse_errors() {
        assert!(read_symtensor("tensor v1 order=2 dim=2\n".as_bytes()).is_err());
        assert!(read_symtensor("symtensor v1 order=2 dim=2\n0 5 1.0 1\n".as_bytes()).is_err());
        assert!(read_symtensor("symtensor v1 order=2 dim=2\n0 1 1.0 2\n".as_bytes()).is_err());
        assert!(read_symtensor("symtensor v1 order=2 dim=2\n0 1 1.0\n".as_bytes()).is_err());
    }

    #[test]
    fn matrix_and_mask_csv() {
        let text = "2,3\n1,2,3\n4,5.5,-6\n";
        let m = read_matrix_csv(text.as_bytes()).unwrap();
        assert_eq!(m[(1, 1)], 5.5);
        let mask = read_mask_csv("2,2\n1,0\n1,1\n".as_bytes()).unwrap();
        assert!(!mask.is_revealed(0, 1));
        assert_eq!(mask.hidden_count(), 1);
        let mut buf = Vec::new();
        write_mask_csv(&mask, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "2,2\n1,0\n1,1\n");
        assert!(read_matrix_csv("2,2\n1,2\n".as_bytes()).is_err());
        assert!(read_mask_csv("1,2\n1,0.5\n".as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn tensor_text_round_trip(values in prop::collection::vec(prop::option::of(-1e6f64..1e6), 20)) {
            // order 3, dim 4 has 20 canonical entries
            let mut t = SymmetricTensor::empty(3, 4);
            let indices: Vec<_> = t.canonical_indices().collect();
            for (idx, v) in indices.iter().zip(&values) {
                if let Some(v) = v {
                    t.set(idx, *v).unwrap();
                }
            }
            let mut buf = Vec::new();
            write_symtensor(&t, &mut buf).unwrap();
            prop_assert_eq!(read_symtensor(buf.as_slice()).unwrap(), t);
        }

        #[test]
        fn matrix_text_round_trip(values in prop::collection::vec(-1e3f64..1e3, 12)) {
            let m = DMatrix::from_row_slice(3, 4, &values);
            let mut buf = Vec::new();
            write_matrix_csv(&m, &mut buf).unwrap();
            prop_assert_eq!(read_matrix_csv(buf.as_slice()).unwrap(), m);
        }
    }
}
