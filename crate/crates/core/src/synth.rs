//! Synthetic fixtures: co-registered volume pairs whose joint histogram is a
//! ring of Gaussian blobs, and analytic 2D bump fields.
//!
//! The volume pair is built on a lattice of `levels x levels` intensity
//! pairs spanning a declared attribute range. The Gaussian mixture's
//! expected count per lattice cell is apportioned to whole voxels by the
//! largest-remainder rule, which keeps counts monotone in the mixture
//! density, and each cell's voxels are split among blobs the same way.
//! Block `m` of the spatial domain holds blob `m`'s voxels in an order
//! shuffled by ChaCha8 seeded with `seed + m`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::GridField;
use crate::volio::Volume;

/// An isotropic 2D Gaussian in attribute space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianSpec {
    pub center: [f64; 2],
    pub sigma: f64,
    pub weight: f64,
}

impl GaussianSpec {
    pub fn new(center: [f64; 2], sigma: f64, weight: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
        }
        if !(weight > 0.0 && weight.is_finite()) {
            return Err(Error::InvalidArgument(format!("weight must be positive, got {weight}")));
        }
        if !(center[0].is_finite() && center[1].is_finite()) {
            return Err(Error::InvalidArgument("center must be finite".into()));
        }
        Ok(Self { center, sigma, weight })
    }

    #[inline]
    pub fn eval(&self, p: [f64; 2]) -> f64 {
        let dx = p[0] - self.center[0];
        let dy = p[1] - self.center[1];
        self.weight * (-(dx * dx + dy * dy) / (2.0 * self.sigma * self.sigma)).exp()
    }
}

/// Parameters of the circular-Gaussians volume pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CircularGaussians {
    pub k: usize,
    pub radius: f64,
    pub sigma: f64,
    pub center: [f64; 2],
    /// Declared attribute range `[min, max]`, shared by both volumes.
    pub range: [f64; 2],
    /// Intensity levels per axis across `range`.
    pub levels: usize,
    pub dims: [usize; 3],
    pub seed: u64,
}

impl Default for CircularGaussians {
    fn default() -> Self {
        Self {
            k: 8,
            radius: 100.0,
            sigma: 18.0,
            center: [500.0, 500.0],
            range: [50.0, 950.0],
            levels: 1000,
            dims: [256, 256, 128],
            seed: 42,
        }
    }
}

/// Largest-remainder rounding of non-negative `expected` values to integers
/// summing to `total`. Ties go to the larger expectation, then the lower
/// index, so the result is non-decreasing in the expectation.
fn apportion(expected: &[f64], total: u64) -> Vec<u64> {
    let sum: f64 = expected.iter().sum();
    if total == 0 || !(sum > 0.0) {
        return vec![0; expected.len()];
    }
    let scale = total as f64 / sum;
    let mut out: Vec<u64> = expected.iter().map(|e| (e * scale).floor() as u64).collect();
    let assigned: u64 = out.iter().sum();
    let mut rest = total.saturating_sub(assigned) as usize;
    if rest > 0 {
        let mut order: Vec<usize> = (0..expected.len()).filter(|&i| expected[i] > 0.0).collect();
        let rem = |i: usize| expected[i] * scale - out[i] as f64;
        order.sort_by(|&a, &b| {
            rem(b)
                .total_cmp(&rem(a))
                .then(expected[b].total_cmp(&expected[a]))
                .then(a.cmp(&b))
        });
        for &i in order.iter().cycle() {
            if rest == 0 {
                break;
            }
            out[i] += 1;
            rest -= 1;
        }
    }
    out
}

impl CircularGaussians {
    /// Blob centers at angles `2 pi m / k` on the circle. For `k = 8` the
    /// axis coordinates take five values whose outer pairs are closer than
    /// two sigma at the default width, so each axis projection shows three
    /// peaks.
    pub fn centers(&self) -> Vec<[f64; 2]> {
        (0..self.k)
            .map(|m| {
                let a = std::f64::consts::TAU * m as f64 / self.k as f64;
                [
                    self.center[0] + self.radius * a.cos(),
                    self.center[1] + self.radius * a.sin(),
                ]
            })
            .collect()
    }

    pub fn voxel_count(&self) -> usize {
        self.dims.iter().product()
    }

    /// Sets `dims` to `[64, 64, z]` with `z` chosen so each blob gets about
    /// `voxels` voxels.
    pub fn with_voxels_per_blob(mut self, voxels: usize) -> Self {
        let z = (voxels * self.k).div_ceil(64 * 64).max(1);
        self.dims = [64, 64, z];
        self
    }

    /// Width of one intensity level.
    pub fn level_width(&self) -> f64 {
        (self.range[1] - self.range[0]) / self.levels as f64
    }

    /// Value of level `i`, the center of its interval.
    pub fn level_value(&self, i: usize) -> f64 {
        self.range[0] + (i as f64 + 0.5) * self.level_width()
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::InvalidArgument(format!("k must be at least 2, got {}", self.k)));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::InvalidArgument(format!("radius must be positive, got {}", self.radius)));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!("sigma must be positive, got {}", self.sigma)));
        }
        let [lo, hi] = self.range;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidArgument(format!("range must satisfy min < max, got {:?}", self.range)));
        }
        if self.levels < 2 {
            return Err(Error::InvalidArgument(format!("levels must be at least 2, got {}", self.levels)));
        }
        for c in self.centers() {
            if !(c.iter().all(|v| (lo..=hi).contains(v))) {
                return Err(Error::InvalidArgument(format!(
                    "blob center {c:?} outside the declared range {:?}",
                    self.range
                )));
            }
        }
        if self.dims.contains(&0) || self.voxel_count() < self.k {
            return Err(Error::InvalidArgument(format!(
                "domain {:?} too small for {} blocks",
                self.dims, self.k
            )));
        }
        Ok(())
    }

    /// Advisory messages: blobs too wide to be distinct, or tails clipped by
    /// the declared range.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        let limit = self.radius * (std::f64::consts::PI / self.k as f64).sin();
        if self.sigma >= limit {
            out.push(format!(
                "sigma {} is not below radius*sin(pi/k) = {limit}; blobs may merge",
                self.sigma
            ));
        }
        let reach = self.radius + 4.0 * self.sigma;
        let [lo, hi] = self.range;
        if self.center.iter().any(|c| c - reach < lo || c + reach > hi) {
            out.push("blob tails beyond 4 sigma are clipped by the declared range".into());
        }
        out
    }

    /// Voxel count per lattice cell `(i, j)` (index `i + levels * j`) for
    /// each blob.
    pub fn blob_counts(&self) -> Result<Vec<Vec<u64>>> {
        self.validate()?;
        let l = self.levels;
        let centers = self.centers();
        let s2 = 2.0 * self.sigma * self.sigma;
        // Separable per-blob factors on each axis.
        let axis = |c: f64| -> Vec<f64> {
            (0..l)
                .map(|i| {
                    let d = self.level_value(i) - c;
                    (-d * d / s2).exp()
                })
                .collect()
        };
        let factors: Vec<[Vec<f64>; 2]> = centers.iter().map(|c| [axis(c[0]), axis(c[1])]).collect();
        let norms: Vec<f64> = factors
            .iter()
            .map(|f| f[0].iter().sum::<f64>() * f[1].iter().sum::<f64>())
            .collect();
        let density = |m: usize, cell: usize| factors[m][0][cell % l] * factors[m][1][cell / l] / norms[m];
        let mixture: Vec<f64> = (0..l * l)
            .into_par_iter()
            .map(|c| (0..self.k).map(|m| density(m, c)).sum())
            .collect();
        let totals = apportion(&mixture, self.voxel_count() as u64);
        let split: Vec<Vec<u64>> = totals
            .par_iter()
            .enumerate()
            .map(|(c, &t)| {
                if t == 0 {
                    return Vec::new();
                }
                let shares: Vec<f64> = (0..self.k).map(|m| density(m, c)).collect();
                apportion(&shares, t)
            })
            .collect();
        let mut out = vec![vec![0u64; l * l]; self.k];
        for (c, parts) in split.iter().enumerate() {
            for (m, &v) in parts.iter().enumerate() {
                out[m][c] = v;
            }
        }
        Ok(out)
    }

    /// Builds `(v1, v2)`, both declaring `range` as their value range.
    pub fn generate(&self) -> Result<(Volume, Volume)> {
        let counts = self.blob_counts()?;
        let l = self.levels;
        let blocks: Vec<Vec<(f64, f64)>> = counts
            .par_iter()
            .enumerate()
            .map(|(m, cells)| {
                let mut vals: Vec<(f64, f64)> = Vec::with_capacity(cells.iter().sum::<u64>() as usize);
                for (c, &t) in cells.iter().enumerate() {
                    let v = (self.level_value(c % l), self.level_value(c / l));
                    vals.extend(std::iter::repeat(v).take(t as usize));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed.wrapping_add(m as u64));
                vals.shuffle(&mut rng);
                vals
            })
            .collect();
        let n = self.voxel_count();
        let mut v1 = Vec::with_capacity(n);
        let mut v2 = Vec::with_capacity(n);
        for b in blocks {
            for (x, y) in b {
                v1.push(x);
                v2.push(y);
            }
        }
        let range = (self.range[0], self.range[1]);
        Ok((
            Volume::with_range(self.dims, v1, range)?.with_name("v1"),
            Volume::with_range(self.dims, v2, range)?.with_name("v2"),
        ))
    }

    /// Voxel range `[start, end)` of each block in linear order.
    pub fn block_ranges(&self) -> Result<Vec<(usize, usize)>> {
        let mut start = 0;
        Ok(self
            .blob_counts()?
            .iter()
            .map(|c| {
                let len = c.iter().sum::<u64>() as usize;
                let r = (start, start + len);
                start += len;
                r
            })
            .collect())
    }
}

/// Shorthand for [`CircularGaussians::generate`] with default center and
/// roughly `voxels_per_blob` voxels per blob.
pub fn generate_circular_gaussians(
    k: usize,
    radius: f64,
    sigma: f64,
    voxels_per_blob: usize,
    seed: u64,
) -> Result<(Volume, Volume)> {
    CircularGaussians {
        k,
        radius,
        sigma,
        seed,
        ..CircularGaussians::default()
    }
    .with_voxels_per_blob(voxels_per_blob)
    .generate()
}

/// `sum weight * exp(-|x - c|^2 / 2 sigma^2)` sampled at integer grid points
/// `(i, j)` of an `n x n` grid.
pub fn generate_bump_field(specs: &[GaussianSpec], n: usize) -> Result<GridField> {
    if n < 8 {
        return Err(Error::InvalidArgument(format!("n must be at least 8, got {n}")));
    }
    let values = (0..n * n)
        .map(|v| {
            let p = [(v % n) as f64, (v / n) as f64];
            specs.iter().map(|s| s.eval(p)).sum()
        })
        .collect();
    GridField::new(n, values)
}
