//! Independent reference implementations used as test oracles.

#![allow(dead_code)]

use std::collections::VecDeque;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use topofuse::pathfind::{WeightedEdge, WeightedGraph};
use topofuse::topology::{CriticalKind, GraphNode};

/// Triangulation neighbors: the four axis neighbors plus the
/// lower-left/upper-right diagonal.
const NEIGHBORS: [(i64, i64); 6] = [(1, 0), (1, 1), (0, 1), (-1, 0), (-1, -1), (0, -1)];

fn neighbors(n: usize, v: usize) -> impl Iterator<Item = usize> {
    let (i, j) = ((v % n) as i64, (v / n) as i64);
    NEIGHBORS.iter().filter_map(move |&(di, dj)| {
        let (a, b) = (i + di, j + dj);
        (a >= 0 && b >= 0 && a < n as i64 && b < n as i64).then(|| (a + b * n as i64) as usize)
    })
}

/// `(creator, destroyer, persistence)` for every non-global maximum, found by
/// binary search over superlevel sets with a fresh flood fill per probe.
pub fn brute_persistence_pairs(n: usize, values: &[f64], offsets: &[u64]) -> Vec<(usize, usize, f64)> {
    let len = n * n;
    let above = |a: usize, b: usize| values[a] > values[b] || (values[a] == values[b] && offsets[a] > offsets[b]);
    let mut order: Vec<usize> = (0..len).collect();
    order.sort_by(|&a, &b| {
        if above(a, b) {
            std::cmp::Ordering::Less
        } else if above(b, a) {
            std::cmp::Ordering::Greater
        } else {
            std::cmp::Ordering::Equal
        }
    });
    let mut rank = vec![0usize; len];
    for (r, &v) in order.iter().enumerate() {
        rank[v] = r;
    }
    // Does m's component of the superlevel set order[..=k] reach above m?
    let escapes = |m: usize, k: usize| {
        let mut seen = vec![false; len];
        let mut queue = VecDeque::from([m]);
        seen[m] = true;
        while let Some(x) = queue.pop_front() {
            if rank[x] < rank[m] {
                return true;
            }
            for y in neighbors(n, x) {
                if !seen[y] && rank[y] <= k {
                    seen[y] = true;
                    queue.push_back(y);
                }
            }
        }
        false
    };
    let mut out = Vec::new();
    for m in 0..len {
        if neighbors(n, m).any(|u| above(u, m)) {
            continue;
        }
        let (mut lo, mut hi) = (rank[m], len - 1);
        if !escapes(m, hi) {
            continue;
        }
        while lo < hi {
            let mid = (lo + hi) / 2;
            if escapes(m, mid) {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        let s = order[lo];
        out.push((m, s, values[m] - values[s]));
    }
    out.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    out
}

/// Random `n x n` field; about half the fields are quantized to create ties.
pub fn random_field(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let levels: Option<u32> = rng.gen_bool(0.5).then(|| rng.gen_range(2..8));
    (0..n * n)
        .map(|_| match levels {
            Some(l) => rng.gen_range(0..l) as f64 / l as f64,
            None => rng.gen::<f64>(),
        })
        .collect()
}

pub fn graph_from_edges(count: usize, edges: &[(usize, usize, f64)]) -> WeightedGraph {
    WeightedGraph {
        n: count.max(2),
        nodes: (0..count)
            .map(|id| GraphNode {
                id,
                vertex: id,
                coords: [id, 0],
                kind: if id % 2 == 0 { CriticalKind::Maximum } else { CriticalKind::Saddle },
                value: 0.0,
                split: 0,
                collapsed: false,
            })
            .collect(),
        densities: vec![1.0; count],
        edges: edges
            .iter()
            .map(|&(u, v, weight)| WeightedEdge {
                u,
                v,
                weight,
                polyline: vec![[u, 0], [v, 0]],
            })
            .collect(),
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        x = parent[x];
    }
    x
}

/// Minimum total weight over every maximal acyclic edge subset.
pub fn exhaustive_msf_weight(count: usize, edges: &[(usize, usize, f64)]) -> f64 {
    let mut parent: Vec<usize> = (0..count).collect();
    let mut target = 0;
    for &(u, v, _) in edges {
        let (a, b) = (find(&mut parent, u), find(&mut parent, v));
        if a != b {
            parent[a] = b;
            target += 1;
        }
    }
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << edges.len()) {
        if mask.count_ones() as usize != target {
            continue;
        }
        let mut parent: Vec<usize> = (0..count).collect();
        let mut ok = true;
        let mut w = 0.0;
        for (k, &(u, v, weight)) in edges.iter().enumerate() {
            if mask & (1 << k) == 0 {
                continue;
            }
            let (a, b) = (find(&mut parent, u), find(&mut parent, v));
            if a == b {
                ok = false;
                break;
            }
            parent[a] = b;
            w += weight;
        }
        if ok && w < best {
            best = w;
        }
    }
    best
}

/// Heaviest simple path of a tree, by a depth-first walk from every node.
pub fn all_pairs_tree_diameter(count: usize, edges: &[(usize, usize, f64)]) -> f64 {
    let mut adj = vec![Vec::new(); count];
    for &(u, v, w) in edges {
        adj[u].push((v, w));
        adj[v].push((u, w));
    }
    let mut best: f64 = 0.0;
    for s in 0..count {
        let mut stack = vec![(s, usize::MAX, 0.0)];
        while let Some((x, from, d)) = stack.pop() {
            best = best.max(d);
            for &(y, w) in &adj[x] {
                if y != from {
                    stack.push((y, x, d + w));
                }
            }
        }
    }
    best
}

/// Index of the nearest point, first index on ties.
pub fn brute_nearest(points: &[[f64; 2]], q: [f64; 2]) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (i, p) in points.iter().enumerate() {
        let dx = p[0] - q[0];
        let dy = p[1] - q[1];
        let d = dx * dx + dy * dy;
        if d < best.0 {
            best = (d, i);
        }
    }
    best.1
}

/// `floor((v - lo) / (hi - lo) * n)` clamped to the last bin.
pub fn oracle_bin(v: f64, lo: f64, hi: f64, n: usize) -> usize {
    let t = ((v - lo) / (hi - lo) * n as f64).floor();
    if t < 0.0 {
        0
    } else {
        (t as usize).min(n - 1)
    }
}

/// Local maxima of a 1D signal with their persistence, by walking outward
/// from each maximum until a strictly higher bin (higher index on ties).
/// The global maximum gets its own height.
pub fn brute_peak_persistence(w: &[f64]) -> Vec<(usize, f64)> {
    let higher = |a: usize, b: usize| w[a] > w[b] || (w[a] == w[b] && a > b);
    let mut out = Vec::new();
    for m in 0..w.len() {
        if (m > 0 && higher(m - 1, m)) || (m + 1 < w.len() && higher(m + 1, m)) {
            continue;
        }
        let mut deaths = Vec::new();
        let mut lowest = w[m];
        for k in (0..m).rev() {
            if higher(k, m) {
                deaths.push(lowest);
                break;
            }
            lowest = lowest.min(w[k]);
        }
        lowest = w[m];
        for k in m + 1..w.len() {
            if higher(k, m) {
                deaths.push(lowest);
                break;
            }
            lowest = lowest.min(w[k]);
        }
        let p = match deaths.iter().copied().reduce(f64::max) {
            Some(d) => w[m] - d,
            None => w[m],
        };
        out.push((m, p));
    }
    out
}
