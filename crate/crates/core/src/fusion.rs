//! Arc-length parameterization of the histogram grid, its pullback to the
//! spatial domain, and 1D diagnostic histograms with peak counting.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::histogram::{Binning, DensityField, Histogram2D};
use crate::spline::{project_point_from, Point, ProjectionIndex, SplineSamples};
use crate::volio::{Artifact, Volume};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionMode {
    Single,
    Merged,
}

/// Largest normalized arc length used in merged mode, so that
/// `floor(F) == branch` holds at every cell and the value survives `f32`
/// storage.
pub const MERGED_ELL_MAX: f64 = 1.0 - 1.0 / (1u64 << 20) as f64;

/// A scalar per histogram cell: normalized arc length of the nearest spline
/// sample, offset by the branch index in merged mode.
#[derive(Clone, Debug, PartialEq)]
pub struct FusedField {
    pub n: usize,
    /// `values[i + n * j]`.
    pub values: Vec<f64>,
    pub branch_count: usize,
    pub branch_assignment: Vec<u32>,
    pub mode: FusionMode,
}

impl FusedField {
    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i + self.n * j]
    }

    /// `(0, 1)` in single mode, `(0, k)` in merged mode.
    pub fn value_range(&self) -> (f64, f64) {
        match self.mode {
            FusionMode::Single => (0.0, 1.0),
            FusionMode::Merged => (0.0, self.branch_count as f64),
        }
    }
}

/// Projects every cell center `(i, j)` onto the branches and keeps the
/// closest `(squared distance, branch, sample, ell)`.
fn project_cells(
    n: usize,
    branches: &[SplineSamples],
    idxs: &[ProjectionIndex],
) -> Vec<(u32, f64)> {
    (0..n)
        .into_par_iter()
        .flat_map_iter(|j| {
            let mut hints: Vec<Option<usize>> = vec![None; branches.len()];
            (0..n).map(move |i| {
                let q: Point = [i as f64, j as f64];
                let mut best: Option<(f64, u32, f64)> = None;
                for (b, (s, idx)) in branches.iter().zip(idxs).enumerate() {
                    let p = project_point_from(idx, s, q, hints[b]);
                    hints[b] = Some(p.index);
                    let d2 = p.distance * p.distance;
                    if best.is_none_or(|(bd, _, _)| d2 < bd) {
                        best = Some((d2, b as u32, p.ell));
                    }
                }
                let (_, b, ell) = best.unwrap();
                (b, ell)
            })
        })
        .collect()
}

/// `F(p) = ell_p` for every cell center of the `n x n` grid.
pub fn parameterize_grid(d: &DensityField, samples: &SplineSamples, idx: &ProjectionIndex) -> FusedField {
    let cells = project_cells(d.n(), std::slice::from_ref(samples), std::slice::from_ref(idx));
    FusedField {
        n: d.n(),
        values: cells.iter().map(|c| c.1).collect(),
        branch_count: 1,
        branch_assignment: vec![0; cells.len()],
        mode: FusionMode::Single,
    }
}

/// `F(p) = k + ell_k` with `k` the branch closest to the cell center (the
/// smaller branch id on ties).
///
/// A single branch gives the single-branch field. With two or more
/// branches `ell` is capped at [`MERGED_ELL_MAX`] so values stay in `[0, k)`.
pub fn parameterize_multibranch(
    d: &DensityField,
    branch_samples: &[SplineSamples],
    idxs: &[ProjectionIndex],
) -> Result<FusedField> {
    if branch_samples.is_empty() || branch_samples.len() != idxs.len() {
        return Err(Error::InvalidArgument(format!(
            "{} branches with {} indices",
            branch_samples.len(),
            idxs.len()
        )));
    }
    if branch_samples.len() == 1 {
        return Ok(parameterize_grid(d, &branch_samples[0], &idxs[0]));
    }
    let cells = project_cells(d.n(), branch_samples, idxs);
    Ok(FusedField {
        n: d.n(),
        values: cells
            .iter()
            .map(|&(b, ell)| b as f64 + ell.min(MERGED_ELL_MAX))
            .collect(),
        branch_count: branch_samples.len(),
        branch_assignment: cells.iter().map(|c| c.0).collect(),
        mode: FusionMode::Merged,
    })
}

fn check_pair(v1: &Volume, v2: &Volume) -> Result<()> {
    if v1.dims() != v2.dims() {
        return Err(Error::DimsMismatch(v1.dims(), v2.dims()));
    }
    Ok(())
}

/// `V_f(t) = F(bin(V1(t), V2(t)))` with the histogram's binning rule.
pub fn fuse_volumes(v1: &Volume, v2: &Volume, f: &FusedField, binning: &Binning) -> Result<Volume> {
    check_pair(v1, v2)?;
    if f.n != binning.n {
        return Err(Error::GridMismatch(format!(
            "fused field has n={}, histogram binning n={}",
            f.n, binning.n
        )));
    }
    let values: Vec<f64> = v1
        .values()
        .par_iter()
        .zip(v2.values().par_iter())
        .map(|(&a, &b)| f.values[binning.cell(a, b)])
        .collect();
    let out = Volume::with_range(v1.dims(), values, f.value_range())?;
    let out = out.with_spacing(v1.spacing())?;
    Ok(out.with_name("fused"))
}

/// Like [`fuse_volumes`] with `Histogram2D` input.
pub fn fuse_with_histogram(v1: &Volume, v2: &Volume, f: &FusedField, h: &Histogram2D) -> Result<Volume> {
    fuse_volumes(v1, v2, f, h.binning())
}

/// Projects each voxel's exact value pair, in histogram grid coordinates,
/// instead of looking up its cell.
pub fn fuse_volumes_continuous(
    v1: &Volume,
    v2: &Volume,
    binning: &Binning,
    branch_samples: &[SplineSamples],
    idxs: &[ProjectionIndex],
) -> Result<Volume> {
    check_pair(v1, v2)?;
    if branch_samples.is_empty() || branch_samples.len() != idxs.len() {
        return Err(Error::InvalidArgument("need one index per branch".into()));
    }
    let k = branch_samples.len();
    let values: Vec<f64> = v1
        .values()
        .par_iter()
        .zip(v2.values().par_iter())
        .map(|(&a, &b)| {
            let q = binning.grid_coords(a, b);
            let mut best: Option<(f64, usize, f64)> = None;
            for (bi, (s, idx)) in branch_samples.iter().zip(idxs).enumerate() {
                let p = project_point_from(idx, s, q, None);
                let d2 = p.distance * p.distance;
                if best.is_none_or(|(bd, _, _)| d2 < bd) {
                    best = Some((d2, bi, p.ell));
                }
            }
            let (_, bi, ell) = best.unwrap();
            if k == 1 {
                ell
            } else {
                bi as f64 + ell.min(MERGED_ELL_MAX)
            }
        })
        .collect();
    let range = if k == 1 { (0.0, 1.0) } else { (0.0, k as f64) };
    Ok(Volume::with_range(v1.dims(), values, range)?
        .with_spacing(v1.spacing())?
        .with_name("fused"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram1D {
    pub bins: usize,
    /// `bins + 1` increasing edges.
    pub edges: Vec<f64>,
    pub weights: Vec<f64>,
    pub label: String,
}

impl Artifact for Histogram1D {
    const KIND: &'static str = "histogram1d";
}

impl Histogram1D {
    pub fn new(edges: Vec<f64>, weights: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if weights.is_empty() || edges.len() != weights.len() + 1 {
            return Err(Error::InvalidArgument(format!(
                "{} edges for {} bins",
                edges.len(),
                weights.len()
            )));
        }
        if edges.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("edges must increase".into()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidArgument("weights must be finite and >= 0".into()));
        }
        Ok(Self {
            bins: weights.len(),
            edges,
            weights,
            label: label.into(),
        })
    }

    pub fn uniform(lo: f64, hi: f64, weights: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        let bins = weights.len();
        let edges = (0..=bins)
            .map(|b| lo + (hi - lo) * b as f64 / bins as f64)
            .collect();
        Self::new(edges, weights, label)
    }

    pub fn center(&self, b: usize) -> f64 {
        0.5 * (self.edges[b] + self.edges[b + 1])
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_center,weight\n");
        for (b, w) in self.weights.iter().enumerate() {
            out.push_str(&format!("{:?},{:?}\n", self.center(b), w));
        }
        out
    }
}

pub const DEFAULT_SPLINE_BINS: usize = 256;

/// Histogram counts aggregated by fused value: every cell's count goes to the
/// bin of `F` over `[0, 1]` (or `[0, k]`).
pub fn spline_density_histogram(h: &Histogram2D, f: &FusedField, bins: usize) -> Result<Histogram1D> {
    if f.n != h.n() {
        return Err(Error::GridMismatch(format!("fused n={} vs histogram n={}", f.n, h.n())));
    }
    if bins == 0 {
        return Err(Error::InvalidArgument("bins must be positive".into()));
    }
    let (lo, hi) = f.value_range();
    let mut weights = vec![0.0; bins];
    for (c, &count) in h.counts().iter().enumerate() {
        if count == 0 {
            continue;
        }
        let t = (f.values[c] - lo) / (hi - lo) * bins as f64;
        let b = (t.floor().max(0.0) as usize).min(bins - 1);
        weights[b] += count as f64;
    }
    Histogram1D::uniform(lo, hi, weights, "spline")
}

/// Marginal of the joint histogram along `axis` (1 or 2).
pub fn axis_projection_histogram(h: &Histogram2D, axis: usize) -> Result<Histogram1D> {
    let n = h.n();
    let mut weights = vec![0.0; n];
    match axis {
        1 => {
            for j in 0..n {
                for (i, w) in weights.iter_mut().enumerate() {
                    *w += h.count(i, j) as f64;
                }
            }
        }
        2 => {
            for (j, w) in weights.iter_mut().enumerate() {
                *w = (0..n).map(|i| h.count(i, j) as f64).sum();
            }
        }
        other => return Err(Error::InvalidArgument(format!("axis must be 1 or 2, got {other}"))),
    }
    let r = h.binning().ranges[axis - 1];
    let label = h.axis_names()[axis - 1].clone();
    Histogram1D::uniform(r.min, r.max, weights, if label.is_empty() { format!("axis{axis}") } else { label })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub bin: usize,
    pub center: f64,
    pub weight: f64,
    /// Birth minus merge level; the global peak reports its own weight.
    pub persistence: f64,
    pub global: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeakReport {
    pub count: usize,
    pub min_persistence: f64,
    pub peaks: Vec<Peak>,
}

impl Artifact for PeakReport {
    const KIND: &'static str = "peaks";
}

/// 1D persistence peaks of a histogram.
///
/// Bins are swept from highest to lowest weight (ties: the higher bin index
/// counts as higher). A local peak's persistence is its weight minus the
/// level at which it merges into a higher peak. The global peak is counted
/// whenever any weight is positive; other peaks need persistence strictly
/// above `min_persistence * max_weight`. Peaks are listed by bin.
pub fn count_peaks(h: &Histogram1D, min_persistence: f64) -> Result<PeakReport> {
    if h.bins < 3 {
        return Err(Error::InvalidArgument(format!("need at least 3 bins, got {}", h.bins)));
    }
    if !(min_persistence >= 0.0 && min_persistence.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "min_persistence must be >= 0, got {min_persistence}"
        )));
    }
    let w = &h.weights;
    let max = w.iter().copied().fold(0.0, f64::max);
    let mut peaks = Vec::new();
    if max > 0.0 {
        let higher = |a: usize, b: usize| w[a] > w[b] || (w[a] == w[b] && a > b);
        let mut order: Vec<usize> = (0..h.bins).collect();
        order.sort_by(|&a, &b| w[b].total_cmp(&w[a]).then(b.cmp(&a)));
        // Union-find over bins; each root keeps its peak bin.
        let mut parent: Vec<usize> = vec![usize::MAX; h.bins];
        let mut top = vec![0usize; h.bins];
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        let mut pers = vec![f64::NAN; h.bins];
        for &v in &order {
            parent[v] = v;
            top[v] = v;
            let mut roots: Vec<usize> = Vec::with_capacity(2);
            for u in [v.wrapping_sub(1), v + 1] {
                if u < h.bins && parent[u] != usize::MAX {
                    let r = find(&mut parent, u);
                    if !roots.contains(&r) {
                        roots.push(r);
                    }
                }
            }
            if roots.is_empty() {
                continue;
            }
            roots.sort_by(|&a, &b| if higher(top[a], top[b]) { std::cmp::Ordering::Less } else { std::cmp::Ordering::Greater });
            let keep = roots[0];
            parent[v] = keep;
            for &r in &roots[1..] {
                pers[top[r]] = w[top[r]] - w[v];
                parent[r] = keep;
            }
        }
        let global = order[0];
        let cut = min_persistence * max;
        for b in 0..h.bins {
            let is_global = b == global;
            let p = if is_global { w[b] } else { pers[b] };
            if is_global || p > cut {
                peaks.push(Peak {
                    bin: b,
                    center: h.center(b),
                    weight: w[b],
                    persistence: p,
                    global: is_global,
                });
            }
        }
    }
    Ok(PeakReport {
        count: peaks.len(),
        min_persistence,
        peaks,
    })
}
