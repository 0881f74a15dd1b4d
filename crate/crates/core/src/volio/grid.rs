//! Binary container for dense 2D grids (histogram counts, density fields,
//! parameterized grids).
//!
//! Layout, little-endian: magic `TFG1`, `u32` width, `u32` height, `u8` dtype
//! code, three zero bytes, then `width * height` elements row-major with the
//! first axis fastest.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"TFG1";
pub const GRID_HEADER_LEN: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GridDType {
    F64 = 0,
    F32 = 1,
    U64 = 2,
    U32 = 3,
}

impl GridDType {
    fn size(self) -> usize {
        match self {
            GridDType::F64 | GridDType::U64 => 8,
            GridDType::F32 | GridDType::U32 => 4,
        }
    }

    fn from_code(c: u8) -> Result<Self> {
        Ok(match c {
            0 => GridDType::F64,
            1 => GridDType::F32,
            2 => GridDType::U64,
            3 => GridDType::U32,
            _ => return Err(Error::Header(format!("unknown grid dtype code {c}"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum GridData {
    F64(Vec<f64>),
    F32(Vec<f32>),
    U64(Vec<u64>),
    U32(Vec<u32>),
}

impl GridData {
    pub fn len(&self) -> usize {
        match self {
            GridData::F64(v) => v.len(),
            GridData::F32(v) => v.len(),
            GridData::U64(v) => v.len(),
            GridData::U32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dtype(&self) -> GridDType {
        match self {
            GridData::F64(_) => GridDType::F64,
            GridData::F32(_) => GridDType::F32,
            GridData::U64(_) => GridDType::U64,
            GridData::U32(_) => GridDType::U32,
        }
    }
}

pub fn encode_grid(width: usize, height: usize, data: &GridData) -> Result<Vec<u8>> {
    if data.len() != width * height {
        return Err(Error::GridMismatch(format!(
            "{width}x{height} grid needs {} elements, got {}",
            width * height,
            data.len()
        )));
    }
    let mut out = Vec::with_capacity(GRID_HEADER_LEN + data.len() * data.dtype().size());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(width as u32).to_le_bytes());
    out.extend_from_slice(&(height as u32).to_le_bytes());
    out.extend_from_slice(&[data.dtype() as u8, 0, 0, 0]);
    match data {
        GridData::F64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        GridData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        GridData::U64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        GridData::U32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
    }
    Ok(out)
}

pub fn decode_grid(bytes: &[u8]) -> Result<(usize, usize, GridData)> {
    if bytes.len() < GRID_HEADER_LEN || &bytes[..4] != MAGIC {
        return Err(Error::Header("not a grid file".into()));
    }
    let width = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let height = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let dtype = GridDType::from_code(bytes[12])?;
    let body = &bytes[GRID_HEADER_LEN..];
    let expected = width * height * dtype.size();
    if body.len() != expected {
        return Err(Error::SizeMismatch {
            expected,
            found: body.len(),
        });
    }
    let data = match dtype {
        GridDType::F64 => GridData::F64(
            body.chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        ),
        GridDType::F32 => GridData::F32(
            body.chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        ),
        GridDType::U64 => GridData::U64(
            body.chunks_exact(8)
                .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        ),
        GridDType::U32 => GridData::U32(
            body.chunks_exact(4)
                .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        ),
    };
    Ok((width, height, data))
}

pub fn write_grid(path: &Path, width: usize, height: usize, data: &GridData) -> Result<()> {
    let bytes = encode_grid(width, height, data)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_grid(path: &Path) -> Result<(usize, usize, GridData)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_grid(&bytes)
}
