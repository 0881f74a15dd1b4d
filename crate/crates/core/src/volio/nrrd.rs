//! NRRD subset: `raw` and `gzip` encodings, attached (`.nrrd`) or detached
//! (`.nhdr` + `data file:`) payloads, 1 to 3 dimensions.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use super::raw::{self, DType, Endian};
use super::{parse_dims, stored_range, Volume, WriteOptions};
use crate::error::{Error, Result};

fn nrrd_type(s: &str) -> Result<DType> {
    Ok(match s {
        "uchar" | "unsigned char" | "uint8" | "uint8_t" => DType::U8,
        "short" | "short int" | "signed short" | "signed short int" | "int16" | "int16_t" => {
            DType::I16
        }
        "ushort" | "unsigned short" | "unsigned short int" | "uint16" | "uint16_t" => DType::U16,
        "float" => DType::F32,
        "double" => DType::F64,
        other => return Err(Error::Header(format!("unsupported NRRD type {other:?}"))),
    })
}

fn nrrd_type_name(d: DType) -> &'static str {
    match d {
        DType::U8 => "uchar",
        DType::I16 => "short",
        DType::U16 => "ushort",
        DType::F32 => "float",
        DType::F64 => "double",
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Encoding {
    Raw,
    Gzip,
}

pub(super) fn read(path: &Path) -> Result<Volume> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if !bytes.starts_with(b"NRRD") {
        return Err(Error::Header("missing NRRD magic".into()));
    }
    // Header ends at the first empty line.
    let mut pos = 0;
    let mut lines = Vec::new();
    while pos < bytes.len() {
        let end = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .map(|o| pos + o)
            .unwrap_or(bytes.len());
        let line = std::str::from_utf8(&bytes[pos..end])
            .map_err(|_| Error::Header("header is not UTF-8".into()))?
            .trim_end_matches('\r')
            .to_string();
        pos = (end + 1).min(bytes.len());
        if line.is_empty() {
            break;
        }
        lines.push(line);
    }

    let mut dtype = None;
    let mut dimension = None;
    let mut sizes = None;
    let mut spacing = None;
    let mut encoding = None;
    let mut endian = None;
    let mut data_file = None;
    let mut name = None;
    let mut min = None;
    let mut max = None;
    for line in lines.iter().skip(1) {
        if line.starts_with('#') {
            continue;
        }
        // key:=value lines are key/value pairs, not fields
        if line.contains(":=") {
            continue;
        }
        let Some((key, value)) = line.split_once(": ") else {
            return Err(Error::Header(format!("malformed NRRD line {line:?}")));
        };
        let value = value.trim();
        match key.trim() {
            "type" => dtype = Some(nrrd_type(value)?),
            "dimension" => {
                dimension = Some(
                    value
                        .parse::<usize>()
                        .map_err(|e| Error::Header(format!("dimension: {e}")))?,
                )
            }
            "sizes" => sizes = Some(value.to_string()),
            "spacings" => spacing = Some(value.to_string()),
            "encoding" => {
                encoding = Some(match value {
                    "raw" => Encoding::Raw,
                    "gzip" | "gz" => Encoding::Gzip,
                    other => {
                        return Err(Error::Header(format!("unsupported encoding {other:?}")))
                    }
                })
            }
            "endian" => endian = Some(value.parse::<Endian>()?),
            "data file" | "datafile" => data_file = Some(value.to_string()),
            "content" => name = Some(value.to_string()),
            "min" => min = value.parse::<f64>().ok(),
            "max" => max = value.parse::<f64>().ok(),
            // Informational fields we do not interpret.
            _ => {}
        }
    }

    let dtype = dtype.ok_or_else(|| Error::Header("missing type".into()))?;
    let dimension = dimension.ok_or_else(|| Error::Header("missing dimension".into()))?;
    let sizes = sizes.ok_or_else(|| Error::Header("missing sizes".into()))?;
    if sizes.split_whitespace().count() != dimension {
        return Err(Error::Header(format!(
            "dimension {dimension} contradicts sizes {sizes:?}"
        )));
    }
    let dims = parse_dims("sizes", &sizes)?;
    let encoding = encoding.ok_or_else(|| Error::Header("missing encoding".into()))?;
    let endian = match (endian, dtype.size()) {
        (Some(e), _) => e,
        (None, 1) => Endian::Little,
        (None, _) => return Err(Error::Header("missing endian".into())),
    };

    let payload = match data_file {
        Some(f) => {
            let p = path.parent().unwrap_or(Path::new(".")).join(f);
            fs::read(&p).map_err(|e| Error::io(&p, e))?
        }
        None => bytes[pos..].to_vec(),
    };
    let payload = match encoding {
        Encoding::Raw => payload,
        Encoding::Gzip => {
            let mut out = Vec::new();
            GzDecoder::new(payload.as_slice())
                .read_to_end(&mut out)
                .map_err(|e| Error::io(path, e))?;
            out
        }
    };
    let values = raw::decode(&payload, dtype, endian, dims.iter().product())?;
    let mut v = match (min, max) {
        (Some(lo), Some(hi)) => Volume::with_range(dims, values, (lo, hi))?,
        _ => Volume::new(dims, values)?,
    };
    if let Some(s) = spacing {
        let mut sp = [1.0; 3];
        for (slot, tok) in sp.iter_mut().zip(s.split_whitespace()) {
            *slot = tok
                .parse()
                .map_err(|e| Error::Header(format!("spacings: {e}")))?;
        }
        v = v.with_spacing(sp)?;
    }
    if let Some(n) = name {
        v = v.with_name(n);
    }
    Ok(v)
}

/// Writes an attached `.nrrd`, or a `.nhdr` header plus `.raw` payload when
/// the path ends in `.nhdr`.
pub(super) fn write(v: &Volume, path: &Path, opts: &WriteOptions) -> Result<()> {
    let mut payload = raw::encode(v.values(), opts.dtype, opts.endian, opts.quantization)?;
    if opts.gzip {
        let mut enc = GzEncoder::new(Vec::new(), Compression::default());
        enc.write_all(&payload).map_err(|e| Error::io(path, e))?;
        payload = enc.finish().map_err(|e| Error::io(path, e))?;
    }
    let [nx, ny, nz] = v.dims();
    let [sx, sy, sz] = v.spacing();
    let (lo, hi) = stored_range(v, opts);
    let mut header = format!(
        "NRRD0004\ntype: {}\ndimension: 3\nsizes: {nx} {ny} {nz}\nspacings: {sx:?} {sy:?} {sz:?}\nencoding: {}\nendian: {}\nmin: {lo:?}\nmax: {hi:?}\n",
        nrrd_type_name(opts.dtype),
        if opts.gzip { "gzip" } else { "raw" },
        opts.endian,
    );
    if !v.name().is_empty() {
        header.push_str(&format!("content: {}\n", v.name().replace('\n', " ")));
    }
    let detached = path.extension().and_then(|e| e.to_str()) == Some("nhdr");
    if detached {
        let data_path = path.with_extension(if opts.gzip { "raw.gz" } else { "raw" });
        let file_name = data_path.file_name().unwrap().to_string_lossy().into_owned();
        header.push_str(&format!("data file: {file_name}\n\n"));
        fs::write(&data_path, payload).map_err(|e| Error::io(&data_path, e))?;
        fs::write(path, header).map_err(|e| Error::io(path, e))?;
    } else {
        header.push('\n');
        let mut out = header.into_bytes();
        out.extend_from_slice(&payload);
        fs::write(path, out).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}
