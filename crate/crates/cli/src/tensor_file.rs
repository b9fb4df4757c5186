//! On-disk matrix formats.
//!
//! MX tensor (`MXT1`), all integers little-endian:
//!
//! | offset | size | field |
//! |---|---|---|
//! | 0 | 4 | magic `MXT1` |
//! | 4 | 1 | element format (0 = E5M2, 1 = E4M3) |
//! | 5 | 1 | block size |
//! | 6 | 4 | rows |
//! | 10 | 4 | cols |
//! | 14 | rows * cols / block_size | E8M0 scales, row-major |
//! | ... | rows * cols | FP8 elements, row-major |
//!
//! Raw FP32 matrix: rows (u32), cols (u32), then row-major `f32` values.

use std::path::Path;

use mxdotp::formats::{Fp8Format, MxTensor, ScaleE8M0};
use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"MXT1";
pub const MX_HEADER_LEN: usize = 14;

#[derive(Debug, Error)]
pub enum FileError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("bad magic, not an MXT1 file")]
    BadMagic,
    #[error("unknown element format code {0}")]
    UnknownFormat(u8),
    #[error("block size must be positive")]
    ZeroBlockSize,
    #[error("block misalignment: {cols} columns is not a multiple of block size {block_size}")]
    BlockMisalignment { cols: usize, block_size: usize },
    #[error("expected {expected} bytes, found {actual}")]
    Length { expected: usize, actual: usize },
    #[error("matrix holds {actual} values, expected {rows}x{cols}")]
    Shape {
        rows: usize,
        cols: usize,
        actual: usize,
    },
}

fn u32_at(bytes: &[u8], at: usize) -> usize {
    u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize
}

fn dim(v: usize) -> u32 {
    u32::try_from(v).expect("matrix dimension exceeds u32")
}

pub fn encode_mx(t: &MxTensor) -> Vec<u8> {
    let mut out = Vec::with_capacity(MX_HEADER_LEN + t.scales.len() + t.elements.len());
    out.extend_from_slice(MAGIC);
    out.push(t.format.code());
    out.push(u8::try_from(t.block_size).expect("block size exceeds u8"));
    out.extend_from_slice(&dim(t.rows).to_le_bytes());
    out.extend_from_slice(&dim(t.cols).to_le_bytes());
    out.extend(t.scales.iter().map(|s| s.bits()));
    out.extend_from_slice(&t.elements);
    out
}

pub fn decode_mx(bytes: &[u8]) -> Result<MxTensor, FileError> {
    if bytes.len() < MX_HEADER_LEN {
        return Err(FileError::Length {
            expected: MX_HEADER_LEN,
            actual: bytes.len(),
        });
    }
    if &bytes[..4] != MAGIC {
        return Err(FileError::BadMagic);
    }
    let format = Fp8Format::from_code(bytes[4]).ok_or(FileError::UnknownFormat(bytes[4]))?;
    let block_size = bytes[5] as usize;
    if block_size == 0 {
        return Err(FileError::ZeroBlockSize);
    }
    let rows = u32_at(bytes, 6);
    let cols = u32_at(bytes, 10);
    if !cols.is_multiple_of(block_size) {
        return Err(FileError::BlockMisalignment { cols, block_size });
    }
    let n_scales = rows * (cols / block_size);
    let n_elems = rows * cols;
    let expected = MX_HEADER_LEN + n_scales + n_elems;
    if bytes.len() != expected {
        return Err(FileError::Length {
            expected,
            actual: bytes.len(),
        });
    }
    let scales_end = MX_HEADER_LEN + n_scales;
    Ok(MxTensor {
        rows,
        cols,
        format,
        block_size,
        scales: bytes[MX_HEADER_LEN..scales_end]
            .iter()
            .map(|&b| ScaleE8M0(b))
            .collect(),
        elements: bytes[scales_end..].to_vec(),
    })
}

/// Row-major FP32 matrix with its dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct F32Matrix {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f32>,
}

impl F32Matrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f32>) -> Result<Self, FileError> {
        if values.len() != rows * cols {
            return Err(FileError::Shape {
                rows,
                cols,
                actual: values.len(),
            });
        }
        Ok(F32Matrix { rows, cols, values })
    }
}

pub fn encode_f32(m: &F32Matrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 4 * m.values.len());
    out.extend_from_slice(&dim(m.rows).to_le_bytes());
    out.extend_from_slice(&dim(m.cols).to_le_bytes());
    for v in &m.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_f32(bytes: &[u8]) -> Result<F32Matrix, FileError> {
    if bytes.len() < 8 {
        return Err(FileError::Length {
            expected: 8,
            actual: bytes.len(),
        });
    }
    let rows = u32_at(bytes, 0);
    let cols = u32_at(bytes, 4);
    let expected = 8 + 4 * rows * cols;
    if bytes.len() != expected {
        return Err(FileError::Length {
            expected,
            actual: bytes.len(),
        });
    }
    let values = bytes[8..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(F32Matrix { rows, cols, values })
}

/// A matrix file of either kind, told apart by the MX magic.
#[derive(Clone, Debug, PartialEq)]
pub enum MatrixFile {
    Mx(MxTensor),
    F32(F32Matrix),
}

impl MatrixFile {
    pub fn decode(bytes: &[u8]) -> Result<Self, FileError> {
        if bytes.starts_with(MAGIC) {
            decode_mx(bytes).map(MatrixFile::Mx)
        } else {
            decode_f32(bytes).map(MatrixFile::F32)
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        match self {
            MatrixFile::Mx(t) => (t.rows, t.cols),
            MatrixFile::F32(m) => (m.rows, m.cols),
        }
    }
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>, FileError> {
    std::fs::read(path).map_err(|source| FileError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), FileError> {
    std::fs::write(path, bytes).map_err(|source| FileError::Io {
        path: path.display().to_string(),
        source,
    })
}
