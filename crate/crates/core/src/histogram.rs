//! Joint histograms of co-registered volume pairs, their log-normalized
//! density, and correlation-based pair ranking.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volio::{self, GridData, Volume};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisRange {
    pub min: f64,
    pub max: f64,
}

impl AxisRange {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(min.is_finite() && max.is_finite()) || max <= min {
            return Err(Error::DegenerateRange(min, max));
        }
        Ok(Self { min, max })
    }

    pub fn width(&self) -> f64 {
        self.max - self.min
    }
}

/// The binning rule shared by histogram construction and volume pullback.
///
/// Bins are half-open with a closed top: `floor((v - min) / (max - min) * n)`
/// clamped to `[0, n - 1]`, so axis maxima land in the last bin and values
/// outside an explicit range clamp into the edge bins.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Binning {
    pub n: usize,
    pub ranges: [AxisRange; 2],
}

impl Binning {
    pub fn new(n: usize, ranges: [AxisRange; 2]) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 bins, got {n}")));
        }
        Ok(Self { n, ranges })
    }

    #[inline]
    pub fn axis_bin(&self, axis: usize, v: f64) -> usize {
        let r = &self.ranges[axis];
        let t = (v - r.min) / (r.max - r.min) * self.n as f64;
        // `as usize` saturates negatives to 0.
        (t.floor().max(0.0) as usize).min(self.n - 1)
    }

    #[inline]
    pub fn bin(&self, v1: f64, v2: f64) -> (usize, usize) {
        (self.axis_bin(0, v1), self.axis_bin(1, v2))
    }

    #[inline]
    pub fn cell(&self, v1: f64, v2: f64) -> usize {
        let (i, j) = self.bin(v1, v2);
        i + self.n * j
    }

    /// Continuous histogram-grid coordinate of a value pair; bin centers sit
    /// at integer coordinates.
    pub fn grid_coords(&self, v1: f64, v2: f64) -> [f64; 2] {
        let f = |axis: usize, v: f64| {
            let r = &self.ranges[axis];
            (v - r.min) / (r.max - r.min) * self.n as f64 - 0.5
        };
        [f(0, v1), f(1, v2)]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram2D {
    binning: Binning,
    /// `counts[i + n * j]`, `i` along the first volume's axis.
    counts: Vec<u64>,
    axis_names: [String; 2],
    total_count: u64,
}

impl Histogram2D {
    pub fn from_counts(binning: Binning, counts: Vec<u64>, axis_names: [String; 2]) -> Result<Self> {
        if counts.len() != binning.n * binning.n {
            return Err(Error::GridMismatch(format!(
                "{} counts for {}x{} bins",
                counts.len(),
                binning.n,
                binning.n
            )));
        }
        let total_count = counts.iter().sum();
        Ok(Self {
            binning,
            counts,
            axis_names,
            total_count,
        })
    }

    pub fn n(&self) -> usize {
        self.binning.n
    }

    pub fn binning(&self) -> &Binning {
        &self.binning
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn count(&self, i: usize, j: usize) -> u64 {
        self.counts[i + self.binning.n * j]
    }

    pub fn axis_names(&self) -> &[String; 2] {
        &self.axis_names
    }

    pub fn total_count(&self) -> u64 {
        self.total_count
    }

    pub fn max_count(&self) -> u64 {
        self.counts.iter().copied().max().unwrap_or(0)
    }

    /// Writes `<stem>.bin` (grid container of `u64` counts) and `<stem>.json`
    /// (binning and axis names).
    pub fn export(&self, stem: &Path) -> Result<()> {
        let n = self.n();
        volio::write_grid(&stem.with_extension("bin"), n, n, &GridData::U64(self.counts.clone()))?;
        let meta = HistogramMeta {
            schema_version: volio::SCHEMA_VERSION,
            kind: "histogram2d".into(),
            n,
            ranges: self.binning.ranges,
            axis_names: self.axis_names.clone(),
            total_count: self.total_count,
        };
        let path = stem.with_extension("json");
        fs::write(&path, serde_json::to_string_pretty(&meta)?).map_err(|e| Error::io(&path, e))
    }

    pub fn import(stem: &Path) -> Result<Self> {
        let path = stem.with_extension("json");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let meta: HistogramMeta = serde_json::from_str(&text)?;
        if meta.schema_version != volio::SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                found: meta.schema_version,
                expected: volio::SCHEMA_VERSION,
            });
        }
        let (w, h, data) = volio::read_grid(&stem.with_extension("bin"))?;
        let GridData::U64(counts) = data else {
            return Err(Error::Header("histogram grid must hold u64 counts".into()));
        };
        if w != meta.n || h != meta.n {
            return Err(Error::GridMismatch(format!("{w}x{h} grid for n={}", meta.n)));
        }
        let binning = Binning::new(meta.n, meta.ranges)?;
        let hist = Self::from_counts(binning, counts, meta.axis_names)?;
        if hist.total_count != meta.total_count {
            return Err(Error::Header("total_count disagrees with counts".into()));
        }
        Ok(hist)
    }

    /// `i,j,count` rows for nonzero cells.
    pub fn to_csv(&self) -> String {
        let n = self.n();
        let mut out = String::from("i,j,count\n");
        for j in 0..n {
            for i in 0..n {
                let c = self.counts[i + n * j];
                if c > 0 {
                    out.push_str(&format!("{i},{j},{c}\n"));
                }
            }
        }
        out
    }
}

#[derive(Serialize, Deserialize)]
struct HistogramMeta {
    schema_version: u32,
    kind: String,
    n: usize,
    ranges: [AxisRange; 2],
    axis_names: [String; 2],
    total_count: u64,
}

/// Log-normalized histogram: `log(count + 1) / log(max_count + 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityField {
    n: usize,
    values: Vec<f64>,
}

impl DensityField {
    pub fn from_values(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::GridMismatch(format!("{} values for n={n}", values.len())));
        }
        Ok(Self { n, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i + self.n * j]
    }

    pub fn at_vertex(&self, v: usize) -> f64 {
        self.values[v]
    }
}

fn check_dims(v1: &Volume, v2: &Volume) -> Result<()> {
    if v1.dims() != v2.dims() {
        return Err(Error::DimsMismatch(v1.dims(), v2.dims()));
    }
    Ok(())
}

/// Bins every voxel pair `(v1[t], v2[t])`. Axis ranges default to each
/// volume's own value range.
pub fn compute_joint_histogram(
    v1: &Volume,
    v2: &Volume,
    n: usize,
    ranges: Option<[AxisRange; 2]>,
) -> Result<Histogram2D> {
    check_dims(v1, v2)?;
    let ranges = match ranges {
        Some(r) => [AxisRange::new(r[0].min, r[0].max)?, AxisRange::new(r[1].min, r[1].max)?],
        None => {
            let (a0, a1) = v1.value_range();
            let (b0, b1) = v2.value_range();
            [AxisRange::new(a0, a1)?, AxisRange::new(b0, b1)?]
        }
    };
    let binning = Binning::new(n, ranges)?;
    let mut counts = vec![0u64; n * n];
    for (&a, &b) in v1.values().iter().zip(v2.values()) {
        counts[binning.cell(a, b)] += 1;
    }
    Histogram2D::from_counts(
        binning,
        counts,
        [v1.name().to_string(), v2.name().to_string()],
    )
}

pub fn log_normalize(h: &Histogram2D) -> DensityField {
    let max = h.max_count();
    let values = if max == 0 {
        vec![0.0; h.counts.len()]
    } else {
        let denom = ((max + 1) as f64).ln();
        h.counts
            .iter()
            .map(|&c| {
                if c == max {
                    1.0
                } else {
                    ((c + 1) as f64).ln() / denom
                }
            })
            .collect()
    };
    DensityField { n: h.n(), values }
}

/// Streaming co-moment accumulator (Welford); partial states merge exactly
/// in a fixed order.
#[derive(Clone, Copy, Debug, Default)]
struct CoMoments {
    count: f64,
    mean_x: f64,
    mean_y: f64,
    m2_x: f64,
    m2_y: f64,
    c_xy: f64,
}

impl CoMoments {
    fn push(&mut self, x: f64, y: f64) {
        self.count += 1.0;
        let dx = x - self.mean_x;
        self.mean_x += dx / self.count;
        let dy = y - self.mean_y;
        self.mean_y += dy / self.count;
        self.m2_x += dx * (x - self.mean_x);
        self.m2_y += dy * (y - self.mean_y);
        self.c_xy += dx * (y - self.mean_y);
    }

    fn merge(self, o: CoMoments) -> CoMoments {
        if self.count == 0.0 {
            return o;
        }
        if o.count == 0.0 {
            return self;
        }
        let n = self.count + o.count;
        let dx = o.mean_x - self.mean_x;
        let dy = o.mean_y - self.mean_y;
        let f = self.count * o.count / n;
        CoMoments {
            count: n,
            mean_x: self.mean_x + dx * o.count / n,
            mean_y: self.mean_y + dy * o.count / n,
            m2_x: self.m2_x + o.m2_x + dx * dx * f,
            m2_y: self.m2_y + o.m2_y + dy * dy * f,
            c_xy: self.c_xy + o.c_xy + dx * dy * f,
        }
    }
}

const CORRELATION_BLOCK: usize = 1 << 16;

pub fn pearson_correlation(v1: &Volume, v2: &Volume) -> Result<f64> {
    check_dims(v1, v2)?;
    // Fixed-size blocks merged left to right keep the result independent of
    // how the blocks are scheduled.
    let m = v1
        .values()
        .chunks(CORRELATION_BLOCK)
        .zip(v2.values().chunks(CORRELATION_BLOCK))
        .map(|(a, b)| {
            let mut acc = CoMoments::default();
            for (&x, &y) in a.iter().zip(b) {
                acc.push(x, y);
            }
            acc
        })
        .fold(CoMoments::default(), CoMoments::merge);
    if m.m2_x <= 0.0 || m.m2_y <= 0.0 {
        return Err(Error::ConstantVolume);
    }
    Ok((m.c_xy / (m.m2_x.sqrt() * m.m2_y.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Clone, Debug)]
pub struct PairReport {
    pub pair: (usize, usize),
    pub correlation: f64,
    pub histogram: Histogram2D,
}

/// All volume pairs, least correlated first.
pub fn pair_selection_report(volumes: &[Volume], n: usize) -> Result<Vec<PairReport>> {
    if volumes.len() < 2 {
        return Err(Error::InvalidArgument("need at least two volumes".into()));
    }
    let mut out = Vec::new();
    for a in 0..volumes.len() {
        for b in a + 1..volumes.len() {
            let correlation = pearson_correlation(&volumes[a], &volumes[b])?;
            let histogram = compute_joint_histogram(&volumes[a], &volumes[b], n, None)?;
            out.push(PairReport {
                pair: (a, b),
                correlation,
                histogram,
            });
        }
    }
    // Stable sort keeps pair order among ties.
    out.sort_by(|x, y| x.correlation.total_cmp(&y.correlation));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn vol(values: Vec<f64>) -> Volume {
        let n = values.len();
        Volume::new([n, 1, 1], values).unwrap()
    }

    #[test]
    fn constant_pair_single_bin() {
        let v = vol(vec![5.0; 27]);
        let r = AxisRange::new(0.0, 10.0).unwrap();
        let h = compute_joint_histogram(&v, &v, 10, Some([r, r])).unwrap();
        assert_eq!(h.count(5, 5), 27);
        assert_eq!(h.total_count(), 27);
    }

    #[test]
    fn identical_ramps_fill_diagonal() {
        let v = vol((0..=100).map(|i| i as f64 / 100.0).collect());
        let r = AxisRange::new(0.0, 1.0).unwrap();
        let h = compute_joint_histogram(&v, &v, 4, Some([r, r])).unwrap();
        for j in 0..4 {
            for i in 0..4 {
                assert_eq!(h.count(i, j) > 0, i == j, "cell {i},{j}");
            }
        }
        // value 1.0 lands in the last bin
        assert_eq!(h.count(3, 3), 26);
    }

    #[test]
    fn degenerate_and_mismatched_inputs() {
        let a = vol(vec![1.0; 4]);
        assert!(matches!(
            compute_joint_histogram(&a, &a, 4, None),
            Err(Error::DegenerateRange(..))
        ));
        let b = vol(vec![1.0, 2.0, 3.0]);
        assert!(matches!(
            compute_joint_histogram(&a, &b, 4, None),
            Err(Error::DimsMismatch(..))
        ));
    }

    #[test]
    fn log_normalization_values() {
        let b = Binning::new(2, [AxisRange::new(0.0, 1.0).unwrap(); 2]).unwrap();
        let h = Histogram2D::from_counts(b, vec![0, 9, 99, 3], Default::default()).unwrap();
        let d = log_normalize(&h);
        assert_eq!(d.at(0, 0), 0.0);
        assert_eq!(d.at(0, 1), 1.0);
        assert!((d.at(1, 0) - 0.5).abs() < 1e-15);

        let empty = Histogram2D::from_counts(b, vec![0; 4], Default::default()).unwrap();
        assert!(log_normalize(&empty).values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn correlation_basics() {
        let x: Vec<f64> = (0..1000).map(|i| ((i * 7919) % 1000) as f64 * 0.37).collect();
        let v = vol(x.clone());
        assert!((pearson_correlation(&v, &v).unwrap() - 1.0).abs() < 1e-12);
        let w = vol(x.iter().map(|a| 3.0 * a + 7.0).collect());
        assert!((pearson_correlation(&v, &w).unwrap() - 1.0).abs() < 1e-12);
        let neg = vol(x.iter().map(|a| -a).collect());
        assert!((pearson_correlation(&v, &neg).unwrap() + 1.0).abs() < 1e-12);
        assert!(matches!(
            pearson_correlation(&v, &vol(vec![2.0; 1000])),
            Err(Error::ConstantVolume)
        ));
    }

    #[test]
    fn pair_report_ranks_least_correlated_first() {
        let v = vol((0..500).map(|i| (i as f64).sin()).collect());
        let w = vol((0..500).map(|i| ((i * 31 % 97) as f64).cos()).collect());
        let report = pair_selection_report(&[v.clone(), v, w], 16).unwrap();
        assert_eq!(report.len(), 3);
        assert_eq!(report.last().unwrap().pair, (0, 1));
        assert!(report[0].correlation <= report[1].correlation);
    }

    #[test]
    fn export_import_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let a = vol((0..64).map(|i| i as f64).collect());
        let b = vol((0..64).map(|i| (i * i % 17) as f64).collect());
        let h = compute_joint_histogram(&a, &b, 8, None).unwrap();
        let stem = dir.path().join("hist");
        h.export(&stem).unwrap();
        assert_eq!(Histogram2D::import(&stem).unwrap(), h);
        assert!(h.to_csv().lines().count() > 1);
    }

    proptest! {
        #[test]
        fn mass_is_conserved(values in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 2..300), n in 2usize..40) {
            let a = vol(values.iter().map(|p| p.0).collect());
            let b = vol(values.iter().map(|p| p.1).collect());
            prop_assume!(a.value_range().0 < a.value_range().1 && b.value_range().0 < b.value_range().1);
            let h = compute_joint_histogram(&a, &b, n, None).unwrap();
            prop_assert_eq!(h.total_count(), values.len() as u64);
            prop_assert_eq!(h.counts().iter().sum::<u64>(), values.len() as u64);
        }

        #[test]
        fn log_normalize_is_order_preserving(counts in prop::collection::vec(0u64..1000, 16)) {
            let b = Binning::new(4, [AxisRange::new(0.0, 1.0).unwrap(); 2]).unwrap();
            let h = Histogram2D::from_counts(b, counts.clone(), Default::default()).unwrap();
            let d = log_normalize(&h);
            let max = *counts.iter().max().unwrap();
            for (x, cx) in counts.iter().enumerate() {
                prop_assert_eq!(d.values()[x] == 0.0, *cx == 0);
                if max > 0 { prop_assert_eq!(d.values()[x] == 1.0, *cx == max); }
                for (y, cy) in counts.iter().enumerate() {
                    if cx <= cy { prop_assert!(d.values()[x] <= d.values()[y]); }
                }
            }
        }

        #[test]
        fn correlation_is_affine_invariant(
            xs in prop::collection::vec(-100f64..100.0, 3..200),
            a in 0.01f64..50.0,
            b in -100f64..100.0,
        ) {
            let ys: Vec<f64> = xs.iter().enumerate().map(|(i, x)| x * 0.5 + (i as f64 * 1.3).sin() * 10.0).collect();
            let v1 = vol(xs.clone());
            let v2 = vol(ys);
            prop_assume!(v1.value_range().1 - v1.value_range().0 > 1e-3);
            let r0 = pearson_correlation(&v1, &v2).unwrap();
            let r1 = pearson_correlation(&vol(xs.iter().map(|x| a * x + b).collect()), &v2).unwrap();
            prop_assert!((r0 - r1).abs() < 1e-10, "{} vs {}", r0, r1);
        }

        #[test]
        fn binning_is_translation_consistent(
            raw in prop::collection::vec((0i32..4096, 0i32..4096), 2..200),
            shift in -1000i32..1000,
            n in 2usize..64,
        ) {
            // Dyadic values keep the shifted arithmetic exact.
            let a: Vec<f64> = raw.iter().map(|p| p.0 as f64 / 1024.0).collect();
            let b: Vec<f64> = raw.iter().map(|p| p.1 as f64 / 1024.0).collect();
            let c = shift as f64;
            let r = AxisRange::new(0.0, 4.0).unwrap();
            let rs = AxisRange::new(c, 4.0 + c).unwrap();
            let h0 = compute_joint_histogram(&vol(a.clone()), &vol(b.clone()), n, Some([r, r])).unwrap();
            let h1 = compute_joint_histogram(
                &vol(a.iter().map(|x| x + c).collect()),
                &vol(b.iter().map(|x| x + c).collect()),
                n,
                Some([rs, rs]),
            ).unwrap();
            prop_assert_eq!(h0.counts(), h1.counts());
        }
    }
}
