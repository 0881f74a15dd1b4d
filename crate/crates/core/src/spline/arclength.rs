use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bspline::{BSpline, Point};
use crate::error::{Error, Result};
use crate::volio::Artifact;

/// Points placed at equal arc-length increments along a curve.
#[derive(Clone, Debug, PartialEq)]
pub struct SplineSamples {
    pub points: Vec<Point>,
    /// Arc length at each sample; `cum_length[i] = i * total_length / (count - 1)`.
    pub cum_length: Vec<f64>,
    pub total_length: f64,
    pub branch_id: usize,
}

impl SplineSamples {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Normalized arc length of sample `i`.
    #[inline]
    pub fn ell(&self, i: usize) -> f64 {
        if i + 1 == self.points.len() {
            1.0
        } else if self.total_length > 0.0 {
            self.cum_length[i] / self.total_length
        } else {
            0.0
        }
    }

    /// Every `stride`-th sample plus the last one.
    pub fn decimate(&self, stride: usize) -> DecimatedSpline {
        let stride = stride.max(1);
        let mut idx: Vec<usize> = (0..self.len()).step_by(stride).collect();
        if idx.last() != Some(&(self.len() - 1)) {
            idx.push(self.len() - 1);
        }
        DecimatedSpline {
            stride,
            sample_count: self.len(),
            total_length: self.total_length,
            branch_id: self.branch_id,
            indices: idx.clone(),
            points: idx.iter().map(|&i| self.points[i]).collect(),
            cum_length: idx.iter().map(|&i| self.cum_length[i]).collect(),
        }
    }
}

/// A thinned copy of [`SplineSamples`] for export and display.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecimatedSpline {
    pub stride: usize,
    pub sample_count: usize,
    pub total_length: f64,
    pub branch_id: usize,
    pub indices: Vec<usize>,
    pub points: Vec<Point>,
    pub cum_length: Vec<f64>,
}

impl Artifact for DecimatedSpline {
    const KIND: &'static str = "spline_samples";
}

// Five-point Gauss-Legendre nodes and weights on [-1, 1].
const GL_X: [f64; 5] = [
    0.0,
    -0.538_469_310_105_683_1,
    0.538_469_310_105_683_1,
    -0.906_179_845_938_664,
    0.906_179_845_938_664,
];
const GL_W: [f64; 5] = [
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
    0.236_926_885_056_189_1,
];

fn speed(d: &BSpline, u: f64) -> f64 {
    let v = d.eval(u);
    v[0].hypot(v[1])
}

fn gauss(d: &BSpline, a: f64, b: f64) -> f64 {
    let h = 0.5 * (b - a);
    let c = 0.5 * (a + b);
    h * GL_X
        .iter()
        .zip(GL_W)
        .map(|(x, w)| w * speed(d, c + h * x))
        .sum::<f64>()
}

/// Arc-length table: breakpoints `u` with cumulative length `s`.
struct Table {
    u: Vec<f64>,
    s: Vec<f64>,
}

fn refine(d: &BSpline, a: f64, b: f64, whole: f64, tol: f64, depth: u32, t: &mut Table) {
    let m = 0.5 * (a + b);
    let left = gauss(d, a, m);
    let right = gauss(d, m, b);
    if depth == 0 || (left + right - whole).abs() <= tol {
        let s0 = *t.s.last().unwrap();
        t.u.push(m);
        t.s.push(s0 + left);
        t.u.push(b);
        t.s.push(s0 + left + right);
        return;
    }
    refine(d, a, m, left, 0.5 * tol, depth - 1, t);
    refine(d, m, b, right, 0.5 * tol, depth - 1, t);
}

fn build_table(spline: &BSpline, d: &BSpline) -> Table {
    let mut breaks: Vec<f64> = spline.knots().to_vec();
    breaks.dedup();
    let rough: f64 = breaks.windows(2).map(|w| gauss(d, w[0], w[1])).sum();
    let tol = 1e-13 * rough.max(1e-300);
    let mut t = Table {
        u: vec![breaks[0]],
        s: vec![0.0],
    };
    for w in breaks.windows(2) {
        // Each span starts with a fixed split so short spans still resolve.
        let pieces = 8;
        for q in 0..pieces {
            let a = w[0] + (w[1] - w[0]) * q as f64 / pieces as f64;
            let b = w[0] + (w[1] - w[0]) * (q + 1) as f64 / pieces as f64;
            refine(d, a, b, gauss(d, a, b), tol, 30, &mut t);
        }
    }
    t
}

fn invert(t: &Table, d: &BSpline, target: f64) -> f64 {
    let n = t.s.len();
    if target <= 0.0 {
        return t.u[0];
    }
    if target >= t.s[n - 1] {
        return t.u[n - 1];
    }
    let i = t.s.partition_point(|&s| s <= target).saturating_sub(1).min(n - 2);
    let (mut lo, mut hi) = (t.u[i], t.u[i + 1]);
    let (s_lo, s_hi) = (t.s[i], t.s[i + 1]);
    if s_hi <= s_lo {
        return lo;
    }
    let base = t.u[i];
    let mut u = lo + (hi - lo) * (target - s_lo) / (s_hi - s_lo);
    let tol = 1e-14 * t.s[n - 1].max(1.0);
    for _ in 0..60 {
        let f = s_lo + gauss(d, base, u) - target;
        if f.abs() <= tol {
            break;
        }
        if f > 0.0 {
            hi = u;
        } else {
            lo = u;
        }
        let v = speed(d, u);
        let newton = u - f / v;
        u = if v > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
            break;
        }
    }
    u
}

/// Places `count` samples at equal arc-length increments.
///
/// Arc length is tabulated by adaptive five-point Gauss-Legendre quadrature
/// of the curve speed; each sample parameter is found by Newton iteration on
/// the table with a bisection safeguard.
pub fn sample_arclength(spline: &BSpline, count: usize) -> Result<SplineSamples> {
    if count < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 samples, got {count}")));
    }
    let d = spline.derivative();
    let table = build_table(spline, &d);
    let total = *table.s.last().unwrap();
    if !(total > 0.0) {
        return Err(Error::InvalidArgument("curve has zero length".into()));
    }
    let step = total / (count - 1) as f64;
    let (u0, u1) = spline.domain();
    let points: Vec<Point> = (0..count)
        .into_par_iter()
        .map(|i| {
            let u = if i == 0 {
                u0
            } else if i + 1 == count {
                u1
            } else {
                invert(&table, &d, i as f64 * step)
            };
            spline.eval(u)
        })
        .collect();
    let mut cum_length: Vec<f64> = (0..count).map(|i| i as f64 * step).collect();
    cum_length[count - 1] = total;
    Ok(SplineSamples {
        points,
        cum_length,
        total_length: total,
        branch_id: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::super::bspline::fit_smoothing_spline;
    use super::*;

    #[test]
    fn straight_segment_samples_are_integers() {
        let fit = fit_smoothing_spline(&[[0.0, 0.0], [4.0, 0.0], [10.0, 0.0]], 0.0).unwrap();
        let s = sample_arclength(&fit.spline, 11).unwrap();
        assert!((s.total_length - 10.0).abs() < 1e-9);
        for (i, p) in s.points.iter().enumerate() {
            assert!((p[0] - i as f64).abs() < 1e-9, "{i}: {p:?}");
            assert!(p[1].abs() < 1e-12);
        }
        assert_eq!(s.cum_length[10], s.total_length);
    }

    #[test]
    fn decimation_keeps_ends() {
        let fit = fit_smoothing_spline(&[[0.0, 0.0], [1.0, 1.0], [2.0, 0.0]], 0.0).unwrap();
        let s = sample_arclength(&fit.spline, 101).unwrap();
        let d = s.decimate(30);
        assert_eq!(d.indices, vec![0, 30, 60, 90, 100]);
        assert_eq!(d.points[4], s.points[100]);
    }
}
