use super::arclength::SplineSamples;
use super::bspline::Point;

/// Samples are grouped into runs of at most this many consecutive indices.
const CHUNK: usize = 64;
/// Rings searched around the query bucket before falling back to the
/// chunk hierarchy.
const RINGS: usize = 2;
const MAX_BUCKETS_PER_AXIS: usize = 4096;

/// Axis-aligned box `[min_x, min_y, max_x, max_y]`.
type Aabb = [f64; 4];

#[inline]
fn box_dist2(b: &Aabb, q: Point) -> f64 {
    let dx = (b[0] - q[0]).max(0.0).max(q[0] - b[2]);
    let dy = (b[1] - q[1]).max(0.0).max(q[1] - b[3]);
    dx * dx + dy * dy
}

#[inline]
fn seg_dist(a: Point, b: Point, q: Point) -> f64 {
    let (ux, uy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = ux * ux + uy * uy;
    let t = if len2 > 0.0 {
        (((q[0] - a[0]) * ux + (q[1] - a[1]) * uy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    dist2([a[0] + t * ux, a[1] + t * uy], q).sqrt()
}

/// Bounding box plus a capsule: every covered sample lies within `radius` of
/// the segment `a`-`b`.
#[derive(Clone, Copy, Debug)]
struct Hull {
    bounds: Aabb,
    a: Point,
    b: Point,
    radius: f64,
}

impl Hull {
    #[inline]
    fn lower_bound2(&self, q: Point) -> f64 {
        let c = (seg_dist(self.a, self.b, q) - self.radius).max(0.0);
        box_dist2(&self.bounds, q).max(c * c)
    }
}

#[inline]
fn dist2(a: Point, b: Point) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

/// Uniform bucket grid over the sample bounding box for exact
/// nearest-sample queries.
///
/// Each bucket lists the chunks (runs of consecutive samples) whose bounding
/// boxes overlap it. A query scans the rings of buckets around it; if the
/// distance to the edge of the scanned block does not already prove the
/// answer, a bounding-box hierarchy over consecutive chunks finishes the
/// search.
#[derive(Clone, Debug)]
pub struct ProjectionIndex {
    origin: Point,
    cell: f64,
    gx: usize,
    gy: usize,
    bucket_start: Vec<u32>,
    bucket_chunks: Vec<u32>,
    chunks: Vec<Hull>,
    /// Binary hierarchy over runs of consecutive chunks; node 0 is the root.
    nodes: Vec<Node>,
    sample_count: usize,
}

#[derive(Clone, Debug)]
struct Node {
    hull: Hull,
    first: usize,
    last: usize,
    children: Option<(usize, usize)>,
}

/// Chunks per hierarchy leaf.
const LEAF_CHUNKS: usize = 4;

fn union(a: &Aabb, b: &Aabb) -> Aabb {
    [a[0].min(b[0]), a[1].min(b[1]), a[2].max(b[2]), a[3].max(b[3])]
}

/// Slack covering rounding in the segment distances.
fn padded(radius: f64, bounds: &Aabb) -> f64 {
    let scale = bounds.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    radius * (1.0 + 1e-9) + 1e-10 * scale
}

fn build_nodes(chunks: &[Hull], first: usize, last: usize, nodes: &mut Vec<Node>) -> usize {
    let (a, b) = (chunks[first].a, chunks[last - 1].b);
    let mut bounds = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
    let mut radius: f64 = 0.0;
    for c in &chunks[first..last] {
        bounds = union(&bounds, &c.bounds);
        radius = radius.max(seg_dist(a, b, c.a).max(seg_dist(a, b, c.b)) + c.radius);
    }
    let id = nodes.len();
    nodes.push(Node {
        hull: Hull { bounds, a, b, radius: padded(radius, &bounds) },
        first,
        last,
        children: None,
    });
    if last - first > LEAF_CHUNKS {
        let mid = first + (last - first) / 2;
        let l = build_nodes(chunks, first, mid, nodes);
        let r = build_nodes(chunks, mid, last, nodes);
        nodes[id].children = Some((l, r));
    }
    id
}

/// Nearest sample to a query point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Projection {
    pub index: usize,
    /// Normalized arc length of the sample.
    pub ell: f64,
    pub distance: f64,
}

impl ProjectionIndex {
    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    pub fn bucket_size(&self) -> f64 {
        self.cell
    }

    pub fn grid_dims(&self) -> (usize, usize) {
        (self.gx, self.gy)
    }

    #[inline]
    fn cell_of(&self, q: Point) -> (usize, usize) {
        let f = |v: f64, o: f64, g: usize| {
            let t = ((v - o) / self.cell).floor();
            if t.is_nan() || t < 0.0 {
                0
            } else {
                (t as usize).min(g - 1)
            }
        };
        (f(q[0], self.origin[0], self.gx), f(q[1], self.origin[1], self.gy))
    }

    #[inline]
    fn scan_chunk(&self, samples: &SplineSamples, c: usize, q: Point, best: &mut (f64, usize)) {
        let start = c * CHUNK;
        let end = (start + CHUNK).min(samples.len());
        for (k, &p) in samples.points[start..end].iter().enumerate() {
            let d = dist2(p, q);
            let i = start + k;
            if d < best.0 || (d == best.0 && i < best.1) {
                *best = (d, i);
            }
        }
    }

    #[inline]
    fn prunable(lb: f64, best: f64) -> bool {
        lb > best * (1.0 + 1e-12) + f64::MIN_POSITIVE
    }

    fn scan_bucket(&self, samples: &SplineSamples, b: usize, q: Point, best: &mut (f64, usize)) {
        let (s, e) = (self.bucket_start[b] as usize, self.bucket_start[b + 1] as usize);
        for &c in &self.bucket_chunks[s..e] {
            let c = c as usize;
            if !Self::prunable(self.chunks[c].lower_bound2(q), best.0) {
                self.scan_chunk(samples, c, q, best);
            }
        }
    }

    /// Best-first walk of the chunk hierarchy, pruning nodes whose bounds are
    /// farther than the best candidate.
    fn descend(&self, samples: &SplineSamples, q: Point, best: &mut (f64, usize)) {
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            if Self::prunable(node.hull.lower_bound2(q), best.0) {
                continue;
            }
            match node.children {
                None => {
                    for c in node.first..node.last {
                        if !Self::prunable(self.chunks[c].lower_bound2(q), best.0) {
                            self.scan_chunk(samples, c, q, best);
                        }
                    }
                }
                Some((a, b)) => {
                    let (da, db) = (self.nodes[a].hull.lower_bound2(q), self.nodes[b].hull.lower_bound2(q));
                    if da <= db {
                        stack.push(b);
                        stack.push(a);
                    } else {
                        stack.push(a);
                        stack.push(b);
                    }
                }
            }
        }
    }

    /// Nearest sample, starting from the sample `hint` as the first
    /// candidate. Ties go to the smaller index.
    pub fn nearest(&self, samples: &SplineSamples, q: Point, hint: Option<usize>) -> (usize, f64) {
        let h = hint.filter(|&h| h < samples.len()).unwrap_or(0);
        let mut best = (dist2(samples.points[h], q), h);
        self.scan_chunk(samples, h / CHUNK, q, &mut best);

        let (ci, cj) = self.cell_of(q);
        let inside = q[0] >= self.origin[0]
            && q[1] >= self.origin[1]
            && q[0] <= self.origin[0] + self.cell * self.gx as f64
            && q[1] <= self.origin[1] + self.cell * self.gy as f64;
        for r in 0..=RINGS {
            let (i0, i1) = (ci.saturating_sub(r), (ci + r).min(self.gx - 1));
            let (j0, j1) = (cj.saturating_sub(r), (cj + r).min(self.gy - 1));
            for j in j0..=j1 {
                for i in i0..=i1 {
                    if i.abs_diff(ci).max(j.abs_diff(cj)) == r {
                        self.scan_bucket(samples, i + self.gx * j, q, &mut best);
                    }
                }
            }
            if inside {
                // Distance from q to the edge of the scanned block; the grid
                // border counts as closed since no sample lies beyond it.
                let x0 = self.origin[0] + self.cell * (ci as f64 - r as f64);
                let x1 = self.origin[0] + self.cell * ((ci + r + 1) as f64);
                let y0 = self.origin[1] + self.cell * (cj as f64 - r as f64);
                let y1 = self.origin[1] + self.cell * ((cj + r + 1) as f64);
                let mut reach = f64::INFINITY;
                if ci > r {
                    reach = reach.min(q[0] - x0);
                }
                if ci + r + 1 < self.gx {
                    reach = reach.min(x1 - q[0]);
                }
                if cj > r {
                    reach = reach.min(q[1] - y0);
                }
                if cj + r + 1 < self.gy {
                    reach = reach.min(y1 - q[1]);
                }
                if Self::prunable(reach * reach, best.0) {
                    return best_to_result(best);
                }
            }
        }
        self.descend(samples, q, &mut best);
        best_to_result(best)
    }
}

fn best_to_result(best: (f64, usize)) -> (usize, f64) {
    (best.1, best.0)
}

/// Builds the bucket grid. With no `bucket_size`, buckets are sized so that
/// the curve crosses roughly 512 of them.
pub fn build_projection_index(samples: &SplineSamples, bucket_size: Option<f64>) -> ProjectionIndex {
    assert!(!samples.is_empty(), "projection index needs samples");
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in &samples.points {
        lo = [lo[0].min(p[0]), lo[1].min(p[1])];
        hi = [hi[0].max(p[0]), hi[1].max(p[1])];
    }
    let extent = (hi[0] - lo[0]).max(hi[1] - lo[1]);
    let mut cell = bucket_size
        .filter(|c| c.is_finite() && *c > 0.0)
        .unwrap_or(samples.total_length / 512.0);
    cell = cell.max(extent / MAX_BUCKETS_PER_AXIS as f64);
    if !(cell > 0.0) {
        cell = 1.0;
    }
    let gx = (((hi[0] - lo[0]) / cell).floor() as usize + 1).min(MAX_BUCKETS_PER_AXIS);
    let gy = (((hi[1] - lo[1]) / cell).floor() as usize + 1).min(MAX_BUCKETS_PER_AXIS);
    let mut index = ProjectionIndex {
        origin: lo,
        cell,
        gx,
        gy,
        bucket_start: Vec::new(),
        bucket_chunks: Vec::new(),
        chunks: Vec::new(),
        nodes: Vec::new(),
        sample_count: samples.len(),
    };

    index.chunks = samples
        .points
        .chunks(CHUNK)
        .map(|c| {
            let bounds = c.iter().fold(
                [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY],
                |b, p| [b[0].min(p[0]), b[1].min(p[1]), b[2].max(p[0]), b[3].max(p[1])],
            );
            let (a, b) = (c[0], c[c.len() - 1]);
            let radius = c.iter().map(|&p| seg_dist(a, b, p)).fold(0.0, f64::max);
            Hull { bounds, a, b, radius: padded(radius, &bounds) }
        })
        .collect();

    // Chunk-to-bucket incidences, then CSR by bucket.
    let mut pairs: Vec<(u32, u32)> = Vec::new();
    for (c, h) in index.chunks.iter().enumerate() {
        let b = &h.bounds;
        let (i0, j0) = index.cell_of([b[0], b[1]]);
        let (i1, j1) = index.cell_of([b[2], b[3]]);
        for j in j0..=j1 {
            for i in i0..=i1 {
                pairs.push(((i + gx * j) as u32, c as u32));
            }
        }
    }
    pairs.sort_unstable();
    let mut start = vec![0u32; gx * gy + 1];
    for &(b, _) in &pairs {
        start[b as usize + 1] += 1;
    }
    for k in 0..gx * gy {
        start[k + 1] += start[k];
    }
    index.bucket_chunks = pairs.iter().map(|&(_, c)| c).collect();
    let mut nodes = Vec::new();
    build_nodes(&index.chunks, 0, index.chunks.len(), &mut nodes);
    index.nodes = nodes;
    index.bucket_start = start;
    index
}

pub fn project_point(idx: &ProjectionIndex, samples: &SplineSamples, q: Point) -> Projection {
    project_point_from(idx, samples, q, None)
}

/// [`project_point`] seeded with a nearby sample, e.g. the previous result
/// along a scanline. The answer does not depend on the hint.
pub fn project_point_from(
    idx: &ProjectionIndex,
    samples: &SplineSamples,
    q: Point,
    hint: Option<usize>,
) -> Projection {
    let (index, d2) = idx.nearest(samples, q, hint);
    Projection {
        index,
        ell: samples.ell(index),
        distance: d2.sqrt(),
    }
}

#[cfg(test)]
mod tests {
    use super::super::{fit_smoothing_spline, sample_arclength};
    use super::*;

    fn brute(samples: &SplineSamples, q: Point) -> usize {
        let mut best = (f64::INFINITY, 0);
        for (i, &p) in samples.points.iter().enumerate() {
            let d = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2);
            if d < best.0 {
                best = (d, i);
            }
        }
        best.1
    }

    #[test]
    fn single_sample_index() {
        let s = SplineSamples {
            points: vec![[3.0, 4.0]],
            cum_length: vec![0.0],
            total_length: 0.0,
            branch_id: 0,
        };
        let idx = build_projection_index(&s, None);
        for q in [[0.0, 0.0], [1e6, -1e6], [3.0, 4.0]] {
            assert_eq!(project_point(&idx, &s, q).index, 0);
        }
    }

    #[test]
    fn straight_foot_point() {
        let fit = fit_smoothing_spline(&[[0.0, 0.0], [1.0, 0.0]], 0.0).unwrap();
        let s = sample_arclength(&fit.spline, 1001).unwrap();
        let idx = build_projection_index(&s, None);
        let p = project_point(&idx, &s, [0.3, 0.2]);
        assert!((p.ell - 0.3).abs() < 1e-9);
        assert_eq!(project_point(&idx, &s, s.points[0]).ell, 0.0);
        assert_eq!(project_point(&idx, &s, s.points[1000]).ell, 1.0);
    }

    #[test]
    fn far_queries_match_brute_force() {
        let pts: Vec<Point> = (0..40)
            .map(|i| {
                let t = i as f64 * 0.3;
                [t.cos() * (5.0 + t), t.sin() * (5.0 + t)]
            })
            .collect();
        let fit = fit_smoothing_spline(&pts, 0.01).unwrap();
        let s = sample_arclength(&fit.spline, 5000).unwrap();
        let idx = build_projection_index(&s, Some(0.7));
        let mut hint = None;
        for k in 0..2000 {
            let a = k as f64 * 0.731;
            let r = (k % 97) as f64 * 0.9;
            let q = [a.cos() * r, a.sin() * r * 1.3];
            let p = project_point_from(&idx, &s, q, hint);
            assert_eq!(p.index, brute(&s, q), "query {q:?}");
            hint = Some(p.index);
        }
    }
}
