//! Volume and artifact I/O.
//!
//! Two volume formats are supported: the native "raw + meta" pair (a raw
//! payload next to a small `key: value` text sidecar) and a subset of NRRD
//! (attached or detached header, raw or gzip encoding). Artifacts such as
//! graphs, paths and 1D histograms go through schema-versioned JSON, and
//! dense 2D grids through a small binary container.

mod grid;
mod json;
mod nrrd;
mod raw;
mod volume;

use std::fs;
use std::path::{Path, PathBuf};

pub use grid::{decode_grid, encode_grid, read_grid, write_grid, GridData, GridDType, GRID_HEADER_LEN};
pub use json::{export_json, from_json_str, import_json, to_json_string, Artifact, SCHEMA_VERSION};
pub use raw::{DType, Endian, Quantization};
pub use volume::Volume;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VolumeFormat {
    /// `<stem>.raw` payload with a `<stem>.meta` sidecar.
    RawMeta,
    /// `.nrrd` (attached) or `.nhdr` (detached) header.
    Nrrd,
}

impl VolumeFormat {
    pub fn detect(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("nrrd") | Some("nhdr") => VolumeFormat::Nrrd,
            _ => VolumeFormat::RawMeta,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WriteOptions {
    pub dtype: DType,
    pub endian: Endian,
    pub quantization: Option<Quantization>,
    /// NRRD only.
    pub gzip: bool,
}

impl Default for WriteOptions {
    fn default() -> Self {
        Self {
            dtype: DType::F64,
            endian: Endian::Little,
            quantization: None,
            gzip: false,
        }
    }
}

impl WriteOptions {
    pub fn with_dtype(dtype: DType) -> Self {
        Self {
            dtype,
            ..Self::default()
        }
    }
}

pub fn read_volume(path: &Path, format: VolumeFormat) -> Result<Volume> {
    match format {
        VolumeFormat::RawMeta => read_raw_meta(path),
        VolumeFormat::Nrrd => nrrd::read(path),
    }
}

pub fn write_volume(v: &Volume, path: &Path, format: VolumeFormat, opts: &WriteOptions) -> Result<()> {
    match format {
        VolumeFormat::RawMeta => write_raw_meta(v, path, opts),
        VolumeFormat::Nrrd => nrrd::write(v, path, opts),
    }
}

/// Returns `(meta, payload)` paths for a raw+meta volume named by either file.
pub fn raw_meta_paths(path: &Path) -> (PathBuf, PathBuf) {
    match path.extension().and_then(|e| e.to_str()) {
        Some("meta") => (path.to_path_buf(), path.with_extension("raw")),
        Some("raw") => (path.with_extension("meta"), path.to_path_buf()),
        _ => (
            path.with_extension("meta"),
            path.with_extension("raw"),
        ),
    }
}

#[derive(Default)]
struct Meta {
    dims: Option<[usize; 3]>,
    spacing: Option<[f64; 3]>,
    dtype: Option<DType>,
    endian: Option<Endian>,
    range: Option<(f64, f64)>,
    name: Option<String>,
}

fn parse_floats<const N: usize>(key: &str, s: &str) -> Result<[f64; N]> {
    let parts: Vec<f64> = s
        .split_whitespace()
        .map(|p| p.parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Header(format!("{key}: {e}")))?;
    parts
        .try_into()
        .map_err(|p: Vec<f64>| Error::Header(format!("{key}: expected {N} numbers, got {}", p.len())))
}

pub(crate) fn parse_dims(key: &str, s: &str) -> Result<[usize; 3]> {
    let parts: Vec<usize> = s
        .split_whitespace()
        .map(|p| p.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Header(format!("{key}: {e}")))?;
    match parts.as_slice() {
        [x] => Ok([*x, 1, 1]),
        [x, y] => Ok([*x, *y, 1]),
        [x, y, z] => Ok([*x, *y, *z]),
        _ => Err(Error::Header(format!("{key}: expected 1 to 3 sizes"))),
    }
}

fn parse_meta(text: &str) -> Result<Meta> {
    let mut meta = Meta::default();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once(':')
            .ok_or_else(|| Error::Header(format!("line {}: expected `key: value`", lineno + 1)))?;
        let value = value.trim();
        let dup = |set: bool| {
            if set {
                Err(Error::Header(format!("duplicate key {key:?}")))
            } else {
                Ok(())
            }
        };
        match key.trim() {
            "dims" => {
                dup(meta.dims.is_some())?;
                meta.dims = Some(parse_dims("dims", value)?);
            }
            "spacing" => {
                dup(meta.spacing.is_some())?;
                meta.spacing = Some(parse_floats::<3>("spacing", value)?);
            }
            "dtype" => {
                dup(meta.dtype.is_some())?;
                meta.dtype = Some(value.parse()?);
            }
            "endian" => {
                dup(meta.endian.is_some())?;
                meta.endian = Some(value.parse()?);
            }
            "range" => {
                dup(meta.range.is_some())?;
                let [lo, hi] = parse_floats::<2>("range", value)?;
                meta.range = Some((lo, hi));
            }
            "name" => {
                dup(meta.name.is_some())?;
                meta.name = Some(value.to_string());
            }
            other => return Err(Error::Header(format!("unknown key {other:?}"))),
        }
    }
    Ok(meta)
}

fn read_raw_meta(path: &Path) -> Result<Volume> {
    let (meta_path, data_path) = raw_meta_paths(path);
    let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta = parse_meta(&text)?;
    let dims = meta.dims.ok_or_else(|| Error::Header("missing dims".into()))?;
    let dtype = meta.dtype.ok_or_else(|| Error::Header("missing dtype".into()))?;
    let endian = match (meta.endian, dtype.size()) {
        (Some(e), _) => e,
        (None, 1) => Endian::Little,
        (None, _) => return Err(Error::Header("missing endian".into())),
    };
    let bytes = fs::read(&data_path).map_err(|e| Error::io(&data_path, e))?;
    let count = dims.iter().product();
    let values = raw::decode(&bytes, dtype, endian, count)?;
    let mut v = match meta.range {
        Some(r) => Volume::with_range(dims, values, r)?,
        None => Volume::new(dims, values)?,
    };
    if let Some(s) = meta.spacing {
        v = v.with_spacing(s)?;
    }
    if let Some(name) = meta.name {
        v = v.with_name(name);
    }
    Ok(v)
}

/// Range of the values as they will read back after encoding.
pub(crate) fn stored_range(v: &Volume, opts: &WriteOptions) -> (f64, f64) {
    let map = |x: f64| match (opts.dtype, opts.quantization) {
        (d, Some(q)) if d.is_integer() => (x * q.scale + q.offset).round(),
        (DType::F32, _) => x as f32 as f64,
        _ => x,
    };
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &x in v.values() {
        let s = map(x);
        lo = lo.min(s);
        hi = hi.max(s);
    }
    if opts.quantization.is_none() {
        lo = lo.min(map(v.value_range().0));
        hi = hi.max(map(v.value_range().1));
    }
    (lo, hi)
}

fn write_raw_meta(v: &Volume, path: &Path, opts: &WriteOptions) -> Result<()> {
    let (meta_path, data_path) = raw_meta_paths(path);
    let bytes = raw::encode(v.values(), opts.dtype, opts.endian, opts.quantization)?;
    let [nx, ny, nz] = v.dims();
    let [sx, sy, sz] = v.spacing();
    let (lo, hi) = stored_range(v, opts);
    let mut text = format!(
        "dims: {nx} {ny} {nz}\nspacing: {sx:?} {sy:?} {sz:?}\ndtype: {}\nendian: {}\nrange: {lo:?} {hi:?}\n",
        opts.dtype, opts.endian
    );
    if !v.name().is_empty() {
        text.push_str(&format!("name: {}\n", v.name().replace('\n', " ")));
    }
    fs::write(&data_path, bytes).map_err(|e| Error::io(&data_path, e))?;
    fs::write(&meta_path, text).map_err(|e| Error::io(&meta_path, e))?;
    Ok(())
}
