//! Element types, byte order and the lossless/quantized encoding rules shared
//! by the meta and NRRD formats.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DType {
    U8,
    I16,
    U16,
    F32,
    F64,
}

impl DType {
    pub fn size(self) -> usize {
        match self {
            DType::U8 => 1,
            DType::I16 | DType::U16 => 2,
            DType::F32 => 4,
            DType::F64 => 8,
        }
    }

    pub fn is_integer(self) -> bool {
        matches!(self, DType::U8 | DType::I16 | DType::U16)
    }

    fn int_bounds(self) -> (f64, f64) {
        match self {
            DType::U8 => (0.0, u8::MAX as f64),
            DType::I16 => (i16::MIN as f64, i16::MAX as f64),
            DType::U16 => (0.0, u16::MAX as f64),
            DType::F32 => (f32::MIN as f64, f32::MAX as f64),
            DType::F64 => (f64::MIN, f64::MAX),
        }
    }
}

impl fmt::Display for DType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DType::U8 => "u8",
            DType::I16 => "i16",
            DType::U16 => "u16",
            DType::F32 => "f32",
            DType::F64 => "f64",
        })
    }
}

impl FromStr for DType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "u8" => DType::U8,
            "i16" => DType::I16,
            "u16" => DType::U16,
            "f32" => DType::F32,
            "f64" => DType::F64,
            other => return Err(Error::Header(format!("unknown dtype {other:?}"))),
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Endian {
    #[default]
    Little,
    Big,
}

impl fmt::Display for Endian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Endian::Little => "little",
            Endian::Big => "big",
        })
    }
}

impl FromStr for Endian {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "little" => Ok(Endian::Little),
            "big" => Ok(Endian::Big),
            other => Err(Error::Header(format!("unknown endian {other:?}"))),
        }
    }
}

/// Affine quantization applied before narrowing to an integer type:
/// `stored = round(value * scale + offset)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quantization {
    pub scale: f64,
    #[serde(default)]
    pub offset: f64,
}

pub(crate) fn decode(bytes: &[u8], dtype: DType, endian: Endian, count: usize) -> Result<Vec<f64>> {
    let expected = count * dtype.size();
    if bytes.len() != expected {
        return Err(Error::SizeMismatch {
            expected,
            found: bytes.len(),
        });
    }
    macro_rules! read_as {
        ($t:ty) => {{
            const N: usize = std::mem::size_of::<$t>();
            bytes
                .chunks_exact(N)
                .map(|c| {
                    let arr: [u8; N] = c.try_into().unwrap();
                    (match endian {
                        Endian::Little => <$t>::from_le_bytes(arr),
                        Endian::Big => <$t>::from_be_bytes(arr),
                    }) as f64
                })
                .collect::<Vec<f64>>()
        }};
    }
    let values = match dtype {
        DType::U8 => bytes.iter().map(|&b| b as f64).collect(),
        DType::I16 => read_as!(i16),
        DType::U16 => read_as!(u16),
        DType::F32 => read_as!(f32),
        DType::F64 => read_as!(f64),
    };
    if let Some(i) = values.iter().position(|v: &f64| !v.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    Ok(values)
}

/// Encodes values, refusing integer narrowing that would lose information
/// unless a quantization policy is supplied.
pub(crate) fn encode(
    values: &[f64],
    dtype: DType,
    endian: Endian,
    quant: Option<Quantization>,
) -> Result<Vec<u8>> {
    let (lo, hi) = dtype.int_bounds();
    let stored: Vec<f64> = match (dtype.is_integer(), quant) {
        (true, Some(q)) => {
            if !(q.scale.is_finite() && q.offset.is_finite()) {
                return Err(Error::InvalidArgument(format!("bad quantization {q:?}")));
            }
            values
                .iter()
                .map(|v| {
                    let s = (v * q.scale + q.offset).round();
                    if s < lo || s > hi {
                        Err(Error::LossyWrite(format!(
                            "quantized value {s} does not fit {dtype}"
                        )))
                    } else {
                        Ok(s)
                    }
                })
                .collect::<Result<_>>()?
        }
        (true, None) => {
            if let Some(v) = values
                .iter()
                .find(|v| v.fract() != 0.0 || **v < lo || **v > hi)
            {
                return Err(Error::LossyWrite(format!(
                    "value {v} is not representable as {dtype}; supply a quantization policy"
                )));
            }
            values.to_vec()
        }
        (false, Some(_)) => {
            return Err(Error::InvalidArgument(format!(
                "quantization only applies to integer types, not {dtype}"
            )))
        }
        (false, None) => {
            if dtype == DType::F32 {
                if let Some(v) = values.iter().find(|v| v.abs() > f32::MAX as f64) {
                    return Err(Error::LossyWrite(format!("value {v} overflows f32")));
                }
            }
            values.to_vec()
        }
    };

    let mut out = Vec::with_capacity(values.len() * dtype.size());
    macro_rules! write_as {
        ($t:ty) => {
            for v in &stored {
                let x = *v as $t;
                match endian {
                    Endian::Little => out.extend_from_slice(&x.to_le_bytes()),
                    Endian::Big => out.extend_from_slice(&x.to_be_bytes()),
                }
            }
        };
    }
    match dtype {
        DType::U8 => out.extend(stored.iter().map(|v| *v as u8)),
        DType::I16 => write_as!(i16),
        DType::U16 => write_as!(u16),
        DType::F32 => write_as!(f32),
        DType::F64 => write_as!(f64),
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn big_endian_roundtrip() {
        let vals = [-3.0, 0.0, 1234.0];
        let bytes = encode(&vals, DType::I16, Endian::Big, None).unwrap();
        assert_eq!(&bytes[..2], &(-3i16).to_be_bytes());
        assert_eq!(decode(&bytes, DType::I16, Endian::Big, 3).unwrap(), vals);
    }

    #[test]
    fn integer_narrowing_needs_policy() {
        assert!(matches!(
            encode(&[0.5], DType::U8, Endian::Little, None),
            Err(Error::LossyWrite(_))
        ));
        assert!(matches!(
            encode(&[300.0], DType::U8, Endian::Little, None),
            Err(Error::LossyWrite(_))
        ));
        let q = Quantization {
            scale: 65535.0,
            offset: 0.0,
        };
        let bytes = encode(&[0.0, 0.5, 1.0], DType::U16, Endian::Little, Some(q)).unwrap();
        let back = decode(&bytes, DType::U16, Endian::Little, 3).unwrap();
        assert_eq!(back, vec![0.0, (65535.0f64 * 0.5).round(), 65535.0]);
    }
}
