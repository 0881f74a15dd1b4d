use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Clamped planar B-spline on the parameter domain `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BSpline {
    degree: usize,
    knots: Vec<f64>,
    control: Vec<Point>,
}

impl BSpline {
    pub fn new(degree: usize, knots: Vec<f64>, control: Vec<Point>) -> Result<Self> {
        if control.is_empty() || knots.len() != control.len() + degree + 1 {
            return Err(Error::InvalidArgument(format!(
                "{} knots for {} control points of degree {degree}",
                knots.len(),
                control.len()
            )));
        }
        if knots.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidArgument("knots must be nondecreasing".into()));
        }
        Ok(Self {
            degree,
            knots,
            control,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn control_points(&self) -> &[Point] {
        &self.control
    }

    /// Knots strictly inside the domain.
    pub fn interior_knot_count(&self) -> usize {
        self.control.len() - self.degree - 1
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.knots[self.degree], self.knots[self.control.len()])
    }

    /// Index `k` with `knots[k] <= u < knots[k + 1]`, using the last nonempty
    /// span at the right end of the domain.
    pub(crate) fn span(&self, u: f64) -> usize {
        let p = self.degree;
        let nc = self.control.len();
        if u >= self.knots[nc] {
            let mut k = nc - 1;
            while k > p && self.knots[k] >= self.knots[k + 1] {
                k -= 1;
            }
            return k;
        }
        if u <= self.knots[p] {
            let mut k = p;
            while k + 1 < nc && self.knots[k + 1] <= self.knots[p] {
                k += 1;
            }
            return k;
        }
        // Largest k in [p, nc) with knots[k] <= u.
        let (mut lo, mut hi) = (p, nc);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.knots[mid] <= u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// Nonzero basis functions `N[k - p ..= k]` at `u` for span `k`.
    pub(crate) fn basis(&self, k: usize, u: f64, out: &mut [f64]) {
        let p = self.degree;
        let t = &self.knots;
        out[0] = 1.0;
        let mut left = [0.0; 4];
        let mut right = [0.0; 4];
        for j in 1..=p {
            left[j] = u - t[k + 1 - j];
            right[j] = t[k + j] - u;
            let mut saved = 0.0;
            for r in 0..j {
                let denom = right[r + 1] + left[j - r];
                let tmp = if denom == 0.0 { 0.0 } else { out[r] / denom };
                out[r] = saved + right[r + 1] * tmp;
                saved = left[j - r] * tmp;
            }
            out[j] = saved;
        }
    }

    pub fn eval(&self, u: f64) -> Point {
        // Clamped ends reproduce the end control points exactly.
        let (u0, u1) = self.domain();
        if u <= u0 {
            return self.control[0];
        }
        if u >= u1 {
            return *self.control.last().unwrap();
        }
        let k = self.span(u);
        let mut n = [0.0; 4];
        self.basis(k, u, &mut n);
        let mut x = 0.0;
        let mut y = 0.0;
        for (r, w) in n.iter().take(self.degree + 1).enumerate() {
            let c = self.control[k - self.degree + r];
            x += w * c[0];
            y += w * c[1];
        }
        [x, y]
    }

    /// First-derivative curve, one degree lower.
    pub fn derivative(&self) -> BSpline {
        let p = self.degree;
        if p == 0 {
            return BSpline {
                degree: 0,
                knots: self.knots.clone(),
                control: vec![[0.0, 0.0]; self.control.len()],
            };
        }
        let t = &self.knots;
        let control = self
            .control
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let d = t[i + p + 1] - t[i + 1];
                if d == 0.0 {
                    [0.0, 0.0]
                } else {
                    let s = p as f64 / d;
                    [s * (w[1][0] - w[0][0]), s * (w[1][1] - w[0][1])]
                }
            })
            .collect();
        BSpline {
            degree: p - 1,
            knots: t[1..t.len() - 1].to_vec(),
            control,
        }
    }
}

/// Result of a smoothing fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub degree: usize,
    pub data_points: usize,
    pub interior_knots: usize,
    pub control_points: usize,
    /// Sum of squared distances between data vertices and their curve points.
    pub residual: f64,
    pub max_residual: f64,
    /// The residual budget could only be met by interpolation.
    pub interpolating: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SplineFit {
    pub spline: BSpline,
    pub report: FitReport,
}

fn dist2(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

/// Drops consecutive repeats and returns the chord-length parameters.
pub(crate) fn chord_parameters(points: &[Point]) -> (Vec<Point>, Vec<f64>) {
    let mut pts: Vec<Point> = Vec::with_capacity(points.len());
    for &p in points {
        if pts.last() != Some(&p) {
            pts.push(p);
        }
    }
    let mut u = Vec::with_capacity(pts.len());
    let mut acc = 0.0;
    u.push(0.0);
    for w in pts.windows(2) {
        acc += dist2(w[0], w[1]).sqrt();
        u.push(acc);
    }
    if acc > 0.0 {
        for x in &mut u {
            *x /= acc;
        }
        *u.last_mut().unwrap() = 1.0;
    }
    (pts, u)
}

fn clamped_knots(p: usize, interior: &[f64]) -> Vec<f64> {
    let mut t = vec![0.0; p + 1];
    t.extend_from_slice(interior);
    t.extend(std::iter::repeat_n(1.0, p + 1));
    t
}

/// Least-squares control points with both end control points pinned to the
/// end data points. Returns `None` when the normal equations are singular.
fn solve_pinned(p: usize, knots: Vec<f64>, data: &[Point], u: &[f64]) -> Option<BSpline> {
    let m = data.len();
    let nc = knots.len() - p - 1;
    let mut control = vec![[0.0; 2]; nc];
    control[0] = data[0];
    control[nc - 1] = data[m - 1];
    let mut spline = BSpline {
        degree: p,
        knots,
        control,
    };
    let unknowns = nc.saturating_sub(2);
    if unknowns == 0 {
        return Some(spline);
    }
    // Lower band of the symmetric normal matrix: band[i][d] = A[i][i - d].
    let mut band = vec![[0.0f64; 4]; unknowns];
    let mut rhs = vec![[0.0f64; 2]; unknowns];
    let mut n = [0.0; 4];
    for k in 1..m - 1 {
        let span = spline.span(u[k]);
        spline.basis(span, u[k], &mut n);
        let first = span - p;
        let mut target = data[k];
        for r in 0..=p {
            let c = first + r;
            if c == 0 || c == nc - 1 {
                target[0] -= n[r] * spline.control[c][0];
                target[1] -= n[r] * spline.control[c][1];
            }
        }
        for r in 0..=p {
            let c = first + r;
            if c == 0 || c == nc - 1 {
                continue;
            }
            let i = c - 1;
            rhs[i][0] += n[r] * target[0];
            rhs[i][1] += n[r] * target[1];
            for s in 0..=r {
                let c2 = first + s;
                if c2 == 0 || c2 == nc - 1 {
                    continue;
                }
                band[i][c - c2] += n[r] * n[s];
            }
        }
    }
    // Banded Cholesky: band becomes the lower factor L.
    let scale = band.iter().map(|b| b[0]).fold(0.0, f64::max);
    for i in 0..unknowns {
        for d in (0..=p.min(i)).rev() {
            let j = i - d;
            let mut s = band[i][d];
            for e in 1..=p {
                if d + e > p || e > j {
                    break;
                }
                // L[i][j - e] * L[j][j - e]
                s -= band[i][d + e] * band[j][e];
            }
            if d == 0 {
                if !(s > scale * 1e-13) {
                    return None;
                }
                band[i][0] = s.sqrt();
            } else {
                band[i][d] = s / band[j][0];
            }
        }
    }
    for comp in 0..2 {
        let mut y = vec![0.0; unknowns];
        for i in 0..unknowns {
            let mut s = rhs[i][comp];
            for d in 1..=p.min(i) {
                s -= band[i][d] * y[i - d];
            }
            y[i] = s / band[i][0];
        }
        for i in (0..unknowns).rev() {
            let mut s = y[i];
            for d in 1..=p {
                if i + d >= unknowns {
                    break;
                }
                s -= band[i + d][d] * y[i + d];
            }
            y[i] = s / band[i][0];
        }
        for (i, v) in y.iter().enumerate() {
            spline.control[i + 1][comp] = *v;
        }
    }
    Some(spline)
}

fn residuals(spline: &BSpline, data: &[Point], u: &[f64]) -> Vec<f64> {
    data.iter()
        .zip(u)
        .map(|(&q, &t)| dist2(q, spline.eval(t)))
        .collect()
}

fn interpolate(p: usize, data: &[Point], u: &[f64]) -> Option<BSpline> {
    let m = data.len();
    let interior: Vec<f64> = (1..m - p)
        .map(|j| u[j..j + p].iter().sum::<f64>() / p as f64)
        .collect();
    solve_pinned(p, clamped_knots(p, &interior), data, u)
}

/// Fits a smoothing B-spline of degree `min(3, M - 1)` to `points`.
///
/// Vertices are parameterized by chord length. Starting from a single
/// polynomial piece, knots are inserted at the median data parameter of
/// every span whose squared residual is at least the mean span residual,
/// until the total squared residual is at most `s`, measured over the `M`
/// vertices left after dropping consecutive repeats. `s = 0`, or a budget that knot insertion
/// cannot reach, yields the interpolating spline with averaged knots. The
/// end control points are pinned to the end vertices.
pub fn fit_smoothing_spline(points: &[Point], s: f64) -> Result<SplineFit> {
    if !(s >= 0.0 && s.is_finite()) {
        return Err(Error::InvalidArgument(format!("smoothing factor must be >= 0, got {s}")));
    }
    let (data, u) = chord_parameters(points);
    let m = data.len();
    if m < 2 {
        return Err(Error::PathTooShort(m));
    }
    let p = 3.min(m - 1);
    let budget = s;
    let (lo, hi) = data.iter().fold(
        ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]),
        |(lo, hi), q| ([lo[0].min(q[0]), lo[1].min(q[1])], [hi[0].max(q[0]), hi[1].max(q[1])]),
    );
    let floor = 1e-24 * dist2(lo, hi) * m as f64;

    let finish = |spline: BSpline, interpolating: bool| {
        let r = residuals(&spline, &data, &u);
        let report = FitReport {
            degree: p,
            data_points: m,
            interior_knots: spline.interior_knot_count(),
            control_points: spline.control.len(),
            residual: r.iter().sum(),
            max_residual: r.iter().copied().fold(0.0, f64::max).sqrt(),
            interpolating,
        };
        SplineFit { spline, report }
    };
    let interpolated = || {
        interpolate(p, &data, &u)
            .ok_or_else(|| Error::InvalidArgument("interpolation system is singular".into()))
    };

    if s == 0.0 || m <= p + 1 {
        return Ok(finish(interpolated()?, true));
    }

    let mut interior: Vec<f64> = Vec::new();
    loop {
        let Some(spline) = solve_pinned(p, clamped_knots(p, &interior), &data, &u) else {
            break;
        };
        let r = residuals(&spline, &data, &u);
        if r.iter().sum::<f64>() <= budget + floor {
            return Ok(finish(spline, false));
        }
        // Residual per knot span.
        let mut bounds = vec![0.0];
        bounds.extend_from_slice(&interior);
        bounds.push(1.0);
        let spans = bounds.len() - 1;
        let mut span_res = vec![0.0; spans];
        let mut span_members: Vec<Vec<usize>> = vec![Vec::new(); spans];
        let mut k = 0;
        for (idx, &t) in u.iter().enumerate() {
            while k + 1 < spans && t >= bounds[k + 1] {
                k += 1;
            }
            span_res[k] += r[idx];
            span_members[k].push(idx);
        }
        let mean = span_res.iter().sum::<f64>() / spans as f64;
        let mut inserted = Vec::new();
        for k in 0..spans {
            if span_res[k] < mean {
                continue;
            }
            let inside: Vec<usize> = span_members[k]
                .iter()
                .copied()
                .filter(|&i| u[i] > bounds[k] && u[i] < bounds[k + 1])
                .collect();
            if let Some(&mid) = inside.get(inside.len() / 2) {
                inserted.push(u[mid]);
            }
        }
        if inserted.is_empty() || interior.len() + inserted.len() + p + 1 > m {
            break;
        }
        interior.extend(inserted);
        interior.sort_by(f64::total_cmp);
    }
    Ok(finish(interpolated()?, true))
}
