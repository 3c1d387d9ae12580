//! Matrix and vector files.
//!
//! Matrix CSV: a header line `m,d` followed by `m` lines of `d` comma-separated
//! numbers. Vector CSV: one number per line. Blank lines and lines starting
//! with `#` are ignored. The JSON forms are `{"m","d","entries"}` with `entries`
//! a list of rows, and `{"values"}`.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{Observation, SenseMatrix};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixJson {
    m: usize,
    d: usize,
    entries: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct VectorJson {
    values: Vec<f64>,
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_num<T: std::str::FromStr>(s: &str, line: usize) -> Result<T> {
    s.trim().parse().map_err(|_| Error::Parse {
        line,
        msg: format!("cannot parse {:?} as a number", s.trim()),
    })
}

fn json_error(e: serde_json::Error) -> Error {
    Error::Parse {
        line: e.line(),
        msg: e.to_string(),
    }
}

fn is_json(text: &str) -> bool {
    text.trim_start().starts_with('{')
}

pub fn parse_matrix_csv(text: &str) -> Result<DMatrix<f64>> {
    let mut lines = content_lines(text);
    let (hline, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "empty matrix file".into(),
    })?;
    let dims: Vec<&str> = header.split(',').collect();
    if dims.len() != 2 {
        return Err(Error::Parse {
            line: hline,
            msg: format!("expected header \"m,d\", found {header:?}"),
        });
    }
    let m: usize = parse_num(dims[0], hline)?;
    let d: usize = parse_num(dims[1], hline)?;
    let mut flat = Vec::with_capacity(m * d);
    let mut rows = 0;
    let mut last = hline;
    for (line, l) in lines {
        last = line;
        if rows == m {
            return Err(Error::Parse {
                line,
                msg: format!("more than the declared {m} rows"),
            });
        }
        let fields: Vec<&str> = l.split(',').collect();
        if fields.len() != d {
            return Err(Error::Parse {
                line,
                msg: format!("expected {d} values, found {}", fields.len()),
            });
        }
        for f in fields {
            flat.push(parse_num::<f64>(f, line)?);
        }
        rows += 1;
    }
    if rows != m {
        return Err(Error::Parse {
            line: last + 1,
            msg: format!("expected {m} rows, found {rows}"),
        });
    }
    Ok(DMatrix::from_row_slice(m, d, &flat))
}

pub fn parse_matrix_json(text: &str) -> Result<DMatrix<f64>> {
    let mj: MatrixJson = serde_json::from_str(text).map_err(json_error)?;
    if mj.entries.len() != mj.m || mj.entries.iter().any(|r| r.len() != mj.d) {
        return Err(Error::Parse {
            line: 1,
            msg: format!("entries do not form a {}x{} matrix", mj.m, mj.d),
        });
    }
    let flat: Vec<f64> = mj.entries.into_iter().flatten().collect();
    Ok(DMatrix::from_row_slice(mj.m, mj.d, &flat))
}

/// Parses either format, chosen by whether the text starts with `{`.
pub fn parse_matrix(text: &str) -> Result<SenseMatrix> {
    let mat = if is_json(text) {
        parse_matrix_json(text)?
    } else {
        parse_matrix_csv(text)?
    };
    SenseMatrix::new(mat)
}

pub fn parse_vector_csv(text: &str) -> Result<DVector<f64>> {
    let mut values = Vec::new();
    for (line, l) in content_lines(text) {
        values.push(parse_num::<f64>(l, line)?);
    }
    if values.is_empty() {
        return Err(Error::Parse {
            line: 1,
            msg: "empty vector file".into(),
        });
    }
    Ok(DVector::from_vec(values))
}

pub fn parse_vector_json(text: &str) -> Result<DVector<f64>> {
    let vj: VectorJson = serde_json::from_str(text).map_err(json_error)?;
    Ok(DVector::from_vec(vj.values))
}

pub fn parse_vector(text: &str) -> Result<DVector<f64>> {
    if is_json(text) {
        parse_vector_json(text)
    } else {
        parse_vector_csv(text)
    }
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<SenseMatrix> {
    parse_matrix(&fs::read_to_string(path)?)
}

pub fn read_vector(path: impl AsRef<Path>) -> Result<DVector<f64>> {
    parse_vector(&fs::read_to_string(path)?)
}

pub fn read_observation(path: impl AsRef<Path>) -> Result<Observation> {
    Observation::new(read_vector(path)?)
}

fn fmt_f64(v: f64) -> String {
    // shortest representation that parses back to the same value
    format!("{v:?}")
}

pub fn matrix_to_csv(a: &DMatrix<f64>) -> String {
    let mut out = format!("{},{}\n", a.nrows(), a.ncols());
    for row in a.row_iter() {
        let fields: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn matrix_to_json(a: &DMatrix<f64>) -> String {
    let mj = MatrixJson {
        m: a.nrows(),
        d: a.ncols(),
        entries: a.row_iter().map(|r| r.iter().copied().collect()).collect(),
    };
    serde_json::to_string(&mj).expect("plain data serializes")
}

pub fn vector_to_csv(v: &DVector<f64>) -> String {
    v.iter().map(|&x| fmt_f64(x) + "\n").collect()
}

pub fn vector_to_json(v: &DVector<f64>) -> String {
    serde_json::to_string(&VectorJson {
        values: v.iter().copied().collect(),
    })
    .expect("plain data serializes")
}
