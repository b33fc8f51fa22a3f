//! Self-describing binary matrix files.
//!
//! Layout, all integers little-endian:
//!
//! | offset | size | field                                   |
//! |--------|------|-----------------------------------------|
//! | 0      | 8    | magic `HPALMTRX`                        |
//! | 8      | 4    | version, `u32` = 1                      |
//! | 12     | 1    | dtype: 0 = `f32`, 1 = `u32`             |
//! | 13     | 4    | rows, `u32`                             |
//! | 17     | 4    | cols, `u32`                             |
//! | 21     | ...  | `rows * cols` values, row-major         |

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"HPALMTRX";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 21;

#[derive(Clone, Debug, PartialEq)]
pub enum MatrixData {
    F32(Vec<f32>),
    U32(Vec<u32>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: MatrixData,
}

fn err(msg: impl Into<String>) -> Error {
    Error::Matrix(msg.into())
}

impl Matrix {
    pub fn f32(rows: usize, cols: usize, values: Vec<f32>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(err(format!("{} values for a {rows}x{cols} matrix", values.len())));
        }
        Ok(Matrix {
            rows,
            cols,
            data: MatrixData::F32(values),
        })
    }

    pub fn u32(rows: usize, cols: usize, values: Vec<u32>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(err(format!("{} values for a {rows}x{cols} matrix", values.len())));
        }
        Ok(Matrix {
            rows,
            cols,
            data: MatrixData::U32(values),
        })
    }

    /// Narrows `values` to `f32`.
    pub fn from_f64(rows: usize, cols: usize, values: &[f64]) -> Result<Self> {
        Matrix::f32(rows, cols, values.iter().map(|&v| v as f32).collect())
    }

    /// Values widened to `f64`, whatever the stored dtype.
    pub fn to_f64(&self) -> Vec<f64> {
        match &self.data {
            MatrixData::F32(v) => v.iter().map(|&x| f64::from(x)).collect(),
            MatrixData::U32(v) => v.iter().map(|&x| f64::from(x)).collect(),
        }
    }

    fn dtype(&self) -> u8 {
        match self.data {
            MatrixData::F32(_) => 0,
            MatrixData::U32(_) => 1,
        }
    }
}

pub fn encode_matrix(m: &Matrix) -> Result<Vec<u8>> {
    let rows = u32::try_from(m.rows).map_err(|_| err("row count exceeds u32"))?;
    let cols = u32::try_from(m.cols).map_err(|_| err("column count exceeds u32"))?;
    let mut out = Vec::with_capacity(HEADER_LEN + m.rows * m.cols * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(m.dtype());
    out.extend_from_slice(&rows.to_le_bytes());
    out.extend_from_slice(&cols.to_le_bytes());
    match &m.data {
        MatrixData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        MatrixData::U32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
    }
    Ok(out)
}

pub fn decode_matrix(bytes: &[u8]) -> Result<Matrix> {
    if bytes.len() < 8 || &bytes[..8] != MAGIC {
        return Err(err("bad magic"));
    }
    if bytes.len() < HEADER_LEN {
        return Err(err("truncated header"));
    }
    let word = |at: usize| u32::from_le_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]]);
    let version = word(8);
    if version != VERSION {
        return Err(err(format!("unsupported version {version}")));
    }
    let dtype = bytes[12];
    if dtype > 1 {
        return Err(err(format!("unsupported dtype {dtype}")));
    }
    let rows = word(13) as usize;
    let cols = word(17) as usize;
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| err("declared shape overflows"))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() < expected {
        return Err(err(format!(
            "truncated payload: {rows}x{cols} needs {expected} bytes, found {}",
            payload.len()
        )));
    }
    if payload.len() > expected {
        return Err(err(format!("{} trailing bytes after payload", payload.len() - expected)));
    }
    let words = payload.chunks_exact(4).map(|c| [c[0], c[1], c[2], c[3]]);
    let data = if dtype == 0 {
        MatrixData::F32(words.map(f32::from_le_bytes).collect())
    } else {
        MatrixData::U32(words.map(u32::from_le_bytes).collect())
    };
    Ok(Matrix { rows, cols, data })
}

pub fn save_matrix(m: &Matrix, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_matrix(m)?)?;
    Ok(())
}

pub fn load_matrix(path: impl AsRef<Path>) -> Result<Matrix> {
    decode_matrix(&fs::read(path)?)
}
