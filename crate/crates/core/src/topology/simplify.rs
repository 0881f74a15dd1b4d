use std::cmp::Ordering;
use std::collections::VecDeque;

use super::persistence::PersistencePair;
use super::GridField;
use crate::error::{Error, Result};

/// Working order during simplification: `(value, offset, sub)`. Flattened
/// vertices take their saddle's value and offset and a negative `sub`, which
/// places them directly below the saddle.
struct Keys<'a> {
    values: Vec<f64>,
    offsets: Vec<u64>,
    sub: Vec<i64>,
    src: &'a GridField,
}

impl Keys<'_> {
    #[inline]
    fn cmp(&self, a: usize, b: usize) -> Ordering {
        self.values[a]
            .total_cmp(&self.values[b])
            .then(self.offsets[a].cmp(&self.offsets[b]))
            .then(self.sub[a].cmp(&self.sub[b]))
    }

    #[inline]
    fn higher(&self, a: usize, b: usize) -> bool {
        self.cmp(a, b) == Ordering::Greater
    }
}

/// Cancels every maximum-saddle pair whose persistence is below
/// `threshold * (max - min)` by flattening.
///
/// Pairs are cancelled in increasing persistence order (higher saddle first
/// among equals). Cancelling `(m, s)` takes the component of `m` in the
/// current superlevel set strictly above `s`, sets it to the value of `s`
/// and orders it right below `s`, breadth-first from `s`, so every flattened
/// vertex keeps a higher neighbor. The remaining pairs keep their vertices
/// and values. With nothing to cancel the input is returned unchanged;
/// otherwise offsets are reassigned as global ranks.
pub fn simplify(f: &GridField, pairs: &[PersistencePair], threshold: f64) -> Result<GridField> {
    if !(threshold >= 0.0 && threshold.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "persistence threshold must be a finite value >= 0, got {threshold}"
        )));
    }
    let (lo, hi) = f.value_range();
    let cut = threshold * (hi - lo);
    let mut cancel: Vec<&PersistencePair> = pairs.iter().filter(|p| p.persistence < cut).collect();
    if cancel.is_empty() {
        return Ok(f.clone());
    }
    cancel.sort_by(|a, b| {
        a.persistence
            .total_cmp(&b.persistence)
            .then(f.cmp_vertices(b.destroyer.vertex, a.destroyer.vertex))
            .then(f.cmp_vertices(b.creator.vertex, a.creator.vertex))
    });

    let mut keys = Keys {
        values: f.values().to_vec(),
        offsets: f.offsets().to_vec(),
        sub: vec![0; f.len()],
        src: f,
    };
    let mut next_sub: i64 = -1;
    let mut stamp = vec![0u32; f.len()];
    let mut epoch = 0u32;
    let mut region = Vec::new();
    let mut queue = VecDeque::new();

    for pair in cancel {
        let (m, s) = (pair.creator.vertex, pair.destroyer.vertex);
        if !keys.higher(m, s) {
            continue;
        }
        epoch += 1;
        // Component of m strictly above s.
        region.clear();
        stamp[m] = epoch;
        queue.push_back(m);
        while let Some(v) = queue.pop_front() {
            region.push(v);
            for u in keys.src.link(v).into_iter().flatten() {
                if stamp[u] != epoch && keys.higher(u, s) {
                    stamp[u] = epoch;
                    queue.push_back(u);
                }
            }
        }
        debug_assert!(region.iter().all(|&v| !keys.higher(v, m)));

        // Re-enter the region breadth-first from s.
        let (vs, os) = (keys.values[s], keys.offsets[s]);
        epoch += 1;
        queue.push_back(s);
        while let Some(v) = queue.pop_front() {
            for u in keys.src.link(v).into_iter().flatten() {
                if stamp[u] == epoch - 1 {
                    stamp[u] = epoch;
                    keys.values[u] = vs;
                    keys.offsets[u] = os;
                    keys.sub[u] = next_sub;
                    next_sub -= 1;
                    queue.push_back(u);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..f.len()).collect();
    order.sort_unstable_by(|&a, &b| keys.cmp(a, b));
    let mut offsets = vec![0u64; f.len()];
    for (rank, &v) in order.iter().enumerate() {
        offsets[v] = rank as u64;
    }
    GridField::with_offsets(f.n(), keys.values, offsets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{classify_critical_points, compute_persistence_pairs, CriticalKind};

    fn two_bumps() -> GridField {
        let n = 32;
        let vals = (0..n * n)
            .map(|v| {
                let (x, y) = ((v % n) as f64, (v / n) as f64);
                let g = |cx: f64, cy: f64, h: f64| h * (-((x - cx).powi(2) + (y - cy).powi(2)) / 8.0).exp();
                g(8.0, 10.0, 1.0) + g(22.0, 20.0, 0.2)
            })
            .collect();
        GridField::new(n, vals).unwrap()
    }

    fn maxima(f: &GridField) -> usize {
        classify_critical_points(f)
            .iter()
            .filter(|c| c.kind == CriticalKind::Maximum)
            .count()
    }

    #[test]
    fn zero_threshold_is_identity() {
        let f = two_bumps();
        let pairs = compute_persistence_pairs(&f);
        assert_eq!(simplify(&f, &pairs, 0.0).unwrap(), f);
    }

    #[test]
    fn large_threshold_leaves_one_maximum() {
        let f = two_bumps();
        assert_eq!(maxima(&f), 2);
        let pairs = compute_persistence_pairs(&f);
        let g = simplify(&f, &pairs, 0.5).unwrap();
        assert_eq!(maxima(&g), 1);
        assert!(compute_persistence_pairs(&g).is_empty());
    }

    #[test]
    fn negative_threshold_is_rejected() {
        let f = two_bumps();
        assert!(simplify(&f, &[], -1.0).is_err());
    }
}
