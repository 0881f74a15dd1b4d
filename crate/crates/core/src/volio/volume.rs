use crate::error::{Error, Result};

/// A 3D scalar grid stored x-fastest.
///
/// Values are held as `f64` regardless of on-disk storage. The value range is
/// either declared (and then checked) or computed on construction.
#[derive(Clone, Debug, PartialEq)]
pub struct Volume {
    dims: [usize; 3],
    spacing: [f64; 3],
    values: Vec<f64>,
    value_range: (f64, f64),
    name: String,
}

impl Volume {
    /// Builds a volume, computing the value range from the data.
    pub fn new(dims: [usize; 3], values: Vec<f64>) -> Result<Self> {
        let range = check_values(dims, &values)?;
        Ok(Self {
            dims,
            spacing: [1.0; 3],
            values,
            value_range: range,
            name: String::new(),
        })
    }

    /// Builds a volume with a declared value range that must contain every value.
    pub fn with_range(dims: [usize; 3], values: Vec<f64>, range: (f64, f64)) -> Result<Self> {
        let (lo, hi) = check_values(dims, &values)?;
        if !(range.0.is_finite() && range.1.is_finite()) || range.0 > range.1 {
            return Err(Error::Header(format!(
                "invalid range [{}, {}]",
                range.0, range.1
            )));
        }
        if lo < range.0 {
            return Err(Error::OutOfRange {
                value: lo,
                min: range.0,
                max: range.1,
            });
        }
        if hi > range.1 {
            return Err(Error::OutOfRange {
                value: hi,
                min: range.0,
                max: range.1,
            });
        }
        Ok(Self {
            dims,
            spacing: [1.0; 3],
            values,
            value_range: range,
            name: String::new(),
        })
    }

    pub fn with_spacing(mut self, spacing: [f64; 3]) -> Result<Self> {
        if spacing.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::Header(format!("invalid spacing {spacing:?}")));
        }
        self.spacing = spacing;
        Ok(self)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn value_range(&self) -> (f64, f64) {
        self.value_range
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.index(i, j, k)]
    }
}

fn check_values(dims: [usize; 3], values: &[f64]) -> Result<(f64, f64)> {
    if dims.iter().any(|&d| d == 0) {
        return Err(Error::Header(format!("dims must be positive, got {dims:?}")));
    }
    let expected = dims[0] * dims[1] * dims[2];
    if values.len() != expected {
        return Err(Error::Header(format!(
            "dims {dims:?} need {expected} values, got {}",
            values.len()
        )));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (i, &v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite(i));
        }
        lo = lo.min(v);
        hi = hi.max(v);
    }
    Ok((lo, hi))
}
