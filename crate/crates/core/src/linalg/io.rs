//! Matrix serialization: headerless CSV and the `PHNM` binary form.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::Matrix;

const MAGIC: &[u8; 4] = b"PHNM";

/// One row per line, comma separated, shortest round-trip decimal form.
pub fn write_csv<T: Scalar, W: Write>(m: &Matrix<T>, mut out: W) -> std::io::Result<()> {
    let mut line = String::new();
    for row in m.rows_iter() {
        line.clear();
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                line.push(',');
            }
            line.push_str(&v.widen().to_string());
        }
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    out.flush()
}

pub fn read_csv<T: Scalar, R: Read>(input: R, source_name: &str) -> Result<Matrix<T>> {
    let reader = BufReader::new(input);
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (ln, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(source_name, e))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let before = data.len();
        for tok in line.split(',') {
            let v: f64 = tok.trim().parse().map_err(|_| Error::Parse {
                source_name: source_name.to_string(),
                line: ln + 1,
                detail: format!("not a number: {tok:?}"),
            })?;
            data.push(T::narrow(v));
        }
        let width = data.len() - before;
        match cols {
            None => cols = Some(width),
            Some(c) if c != width => {
                return Err(Error::Parse {
                    source_name: source_name.to_string(),
                    line: ln + 1,
                    detail: format!("expected {c} fields, found {width}"),
                })
            }
            _ => {}
        }
        rows += 1;
    }
    Matrix::new(rows, cols.unwrap_or(0), data)
}

pub fn save_csv<T: Scalar>(m: &Matrix<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(m, BufWriter::new(f)).map_err(|e| Error::io(path, e))
}

pub fn load_csv<T: Scalar>(path: impl AsRef<Path>) -> Result<Matrix<T>> {
    let path = path.as_ref();
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(f, &path.display().to_string())
}

/// `PHNM`, u64 rows, u64 cols, then little-endian f64 entries.
pub fn write_binary<T: Scalar, W: Write>(m: &Matrix<T>, mut out: W) -> std::io::Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&(m.n_rows() as u64).to_le_bytes())?;
    out.write_all(&(m.n_cols() as u64).to_le_bytes())?;
    for v in m.as_slice() {
        out.write_all(&v.widen().to_le_bytes())?;
    }
    out.flush()
}

pub fn read_binary<T: Scalar, R: Read>(mut input: R) -> Result<Matrix<T>> {
    let io = |e| Error::io("<binary matrix>", e);
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic).map_err(io)?;
    if &magic != MAGIC {
        return Err(Error::Validation("bad magic bytes, expected PHNM".into()));
    }
    let mut word = [0u8; 8];
    input.read_exact(&mut word).map_err(io)?;
    let rows = u64::from_le_bytes(word) as usize;
    input.read_exact(&mut word).map_err(io)?;
    let cols = u64::from_le_bytes(word) as usize;
    let len = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::Validation("matrix dimensions overflow".into()))?;
    let mut data = Vec::with_capacity(len);
    for _ in 0..len {
        input.read_exact(&mut word).map_err(io)?;
        data.push(T::narrow(f64::from_le_bytes(word)));
    }
    Matrix::new(rows, cols, data)
}

pub fn save_binary<T: Scalar>(m: &Matrix<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_binary(m, BufWriter::new(f)).map_err(|e| Error::io(path, e))
}

pub fn load_binary<T: Scalar>(path: impl AsRef<Path>) -> Result<Matrix<T>> {
    let path = path.as_ref();
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_binary(BufReader::new(f))
}

/// Loads either format, sniffing the magic bytes.
pub fn load_matrix<T: Scalar>(path: impl AsRef<Path>) -> Result<Matrix<T>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(MAGIC) {
        read_binary(&bytes[..])
    } else {
        read_csv(&bytes[..], &path.display().to_string())
    }
}
