use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::histogram::DensityField;

/// Neighbor offsets of a vertex in the fixed-diagonal triangulation, in
/// cyclic order around the vertex. Quads are split along the
/// lower-left to upper-right diagonal, so consecutive entries (wrapping
/// around) span a triangle whenever both exist.
pub(crate) const LINK: [(isize, isize); 6] = [(1, 0), (1, 1), (0, 1), (-1, 0), (-1, -1), (0, -1)];

/// Scalar field on an `n x n` vertex grid with a strict total order.
///
/// Vertex `(i, j)` has index `i + n * j`. Vertices are compared by value and
/// then by a per-vertex offset; offsets start as the linear index and are
/// reassigned as global ranks after simplification.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    n: usize,
    values: Vec<f64>,
    offsets: Vec<u64>,
}

impl GridField {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        let offsets = (0..values.len() as u64).collect();
        Self::with_offsets(n, values, offsets)
    }

    pub fn with_offsets(n: usize, values: Vec<f64>, offsets: Vec<u64>) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!("grid must be at least 2x2, got n={n}")));
        }
        if values.len() != n * n || offsets.len() != n * n {
            return Err(Error::GridMismatch(format!(
                "{} values and {} offsets for n={n}",
                values.len(),
                offsets.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        let mut sorted = offsets.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument("vertex offsets must be distinct".into()));
        }
        Ok(Self { n, values, offsets })
    }

    pub fn from_density(d: &DensityField) -> Self {
        Self::new(d.n(), d.values().to_vec()).expect("density fields are finite and square")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn offsets(&self) -> &[u64] {
        &self.offsets
    }

    #[inline]
    pub fn value(&self, v: usize) -> f64 {
        self.values[v]
    }

    #[inline]
    pub fn coords(&self, v: usize) -> [usize; 2] {
        [v % self.n, v / self.n]
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i + self.n * j
    }

    /// Total order on vertices.
    #[inline]
    pub fn cmp_vertices(&self, a: usize, b: usize) -> Ordering {
        self.values[a]
            .total_cmp(&self.values[b])
            .then(self.offsets[a].cmp(&self.offsets[b]))
    }

    #[inline]
    pub fn higher(&self, a: usize, b: usize) -> bool {
        self.cmp_vertices(a, b) == Ordering::Greater
    }

    pub fn value_range(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    /// Link neighbors in cyclic order; `None` outside the grid.
    #[inline]
    pub fn link(&self, v: usize) -> [Option<usize>; 6] {
        let n = self.n as isize;
        let (i, j) = ((v % self.n) as isize, (v / self.n) as isize);
        LINK.map(|(di, dj)| {
            let (a, b) = (i + di, j + dj);
            (a >= 0 && a < n && b >= 0 && b < n).then(|| (a + n * b) as usize)
        })
    }

    /// Vertices sorted from highest to lowest.
    pub fn descending_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_unstable_by(|&a, &b| self.cmp_vertices(b, a));
        order
    }

    /// The field `-f`, with offsets reversed so the vertex order is exactly
    /// inverted.
    pub fn negated(&self) -> GridField {
        let top = self.offsets.iter().copied().max().unwrap_or(0);
        GridField {
            n: self.n,
            values: self.values.iter().map(|v| -v).collect(),
            offsets: self.offsets.iter().map(|o| top - o).collect(),
        }
    }

    /// Connected components of the upper (`upper = true`) or lower link of
    /// `v`, each listed in cyclic order. Components are ordered by their
    /// first position after a gap, scanning from the `(1, 0)` neighbor.
    pub fn link_components(&self, v: usize, upper: bool) -> Vec<Vec<usize>> {
        let link = self.link(v);
        let present: [bool; 6] = std::array::from_fn(|k| {
            link[k].is_some_and(|u| if upper { self.higher(u, v) } else { self.higher(v, u) })
        });
        // Two consecutive link vertices are joined by a link edge exactly when
        // both exist, which `present` already implies.
        let joined = |k: usize| present[k] && present[(k + 5) % 6];
        let Some(start) = (0..6).find(|&k| !joined(k)) else {
            return vec![link.iter().map(|u| u.unwrap()).collect()];
        };
        let mut comps: Vec<Vec<usize>> = Vec::new();
        for t in 0..6 {
            let k = (start + t) % 6;
            if !present[k] {
                continue;
            }
            if t > 0 && joined(k) {
                comps.last_mut().unwrap().push(link[k].unwrap());
            } else {
                comps.push(vec![link[k].unwrap()]);
            }
        }
        comps
    }

    pub fn upper_link_count(&self, v: usize) -> usize {
        self.link_components(v, true).len()
    }

    pub fn lower_link_count(&self, v: usize) -> usize {
        self.link_components(v, false).len()
    }

    /// Highest neighbor strictly above `v`, if any.
    #[inline]
    pub fn steepest_ascent(&self, v: usize) -> Option<usize> {
        let mut best: Option<usize> = None;
        for u in self.link(v).into_iter().flatten() {
            if self.higher(u, v) && best.is_none_or(|b| self.higher(u, b)) {
                best = Some(u);
            }
        }
        best
    }

    /// Lowest neighbor strictly below `v`, if any.
    #[inline]
    pub fn steepest_descent(&self, v: usize) -> Option<usize> {
        let mut best: Option<usize> = None;
        for u in self.link(v).into_iter().flatten() {
            if self.higher(v, u) && best.is_none_or(|b| self.higher(b, u)) {
                best = Some(u);
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interior_link_is_full_cycle() {
        let f = GridField::new(3, vec![0.0; 9]).unwrap();
        let link = f.link(4);
        assert!(link.iter().all(|u| u.is_some()));
        assert_eq!(link.map(|u| u.unwrap()), [5, 8, 7, 3, 0, 1]);
    }

    #[test]
    fn corner_link_is_truncated() {
        let f = GridField::new(3, vec![0.0; 9]).unwrap();
        assert_eq!(f.link(0), [Some(1), Some(4), Some(3), None, None, None]);
        assert_eq!(f.link(8), [None, None, None, Some(7), Some(4), Some(5)]);
    }

    #[test]
    fn ties_break_by_index() {
        let f = GridField::new(2, vec![1.0, 1.0, 0.0, 1.0]).unwrap();
        assert!(f.higher(1, 0));
        assert!(f.higher(3, 1));
        assert!(f.higher(0, 2));
        assert_eq!(f.descending_order(), vec![3, 1, 0, 2]);
    }

    #[test]
    fn saddle_link_has_two_upper_components() {
        // Checkerboard-like saddle at the center of a 3x3 grid.
        #[rustfmt::skip]
        let vals = vec![
            0.0, 2.0, 0.0,
            0.0, 1.0, 0.0,
            0.0, 2.0, 0.0,
        ];
        let f = GridField::new(3, vals).unwrap();
        assert_eq!(f.upper_link_count(4), 2);
        assert_eq!(f.lower_link_count(4), 2);
    }

    #[test]
    fn negation_reverses_order() {
        let f = GridField::new(3, vec![0.5, 0.5, 0.1, 0.9, 0.5, 0.3, 0.0, 0.5, 0.2]).unwrap();
        let g = f.negated();
        for a in 0..9 {
            for b in 0..9 {
                if a != b {
                    assert_eq!(f.higher(a, b), g.higher(b, a));
                }
            }
        }
    }
}
