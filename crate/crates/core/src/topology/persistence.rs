use serde::{Deserialize, Serialize};

use super::critical::{CriticalKind, CriticalPoint};
use super::GridField;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PersistencePair {
    /// The maximum that dies.
    pub creator: CriticalPoint,
    /// The saddle at which it merges into an older component.
    pub destroyer: CriticalPoint,
    pub persistence: f64,
}

/// Union-find over vertices; each root remembers the highest vertex of its
/// component.
struct Components {
    parent: Vec<u32>,
    size: Vec<u32>,
    top: Vec<u32>,
}

const UNSEEN: u32 = u32::MAX;

impl Components {
    fn new(len: usize) -> Self {
        Self {
            parent: vec![UNSEEN; len],
            size: vec![0; len],
            top: vec![0; len],
        }
    }

    fn seen(&self, v: usize) -> bool {
        self.parent[v] != UNSEEN
    }

    fn make(&mut self, v: usize) {
        self.parent[v] = v as u32;
        self.size[v] = 1;
        self.top[v] = v as u32;
    }

    fn find(&mut self, mut v: usize) -> usize {
        while self.parent[v] as usize != v {
            let p = self.parent[v] as usize;
            self.parent[v] = self.parent[p];
            v = p;
        }
        v
    }

    /// Merges `b` into `a`'s component, keeping `a`'s top.
    fn union_keep(&mut self, a: usize, b: usize) -> usize {
        let top = self.top[a];
        let (big, small) = if self.size[a] >= self.size[b] { (a, b) } else { (b, a) };
        self.parent[small] = big as u32;
        self.size[big] += self.size[small];
        self.top[big] = top;
        big
    }
}

/// Maximum-saddle pairs of the superlevel-set merge tree.
///
/// Vertices are swept from highest to lowest. When a vertex joins several
/// components, the one with the highest maximum survives and every other
/// component's maximum is paired with that vertex. The global maximum stays
/// unpaired. Pairs are listed in sweep order of their saddle, and by dying
/// maximum (highest first) at a multi-saddle.
pub fn compute_persistence_pairs(f: &GridField) -> Vec<PersistencePair> {
    let mut uf = Components::new(f.len());
    let mut pairs = Vec::new();
    let mut roots: Vec<usize> = Vec::with_capacity(6);
    for v in f.descending_order() {
        roots.clear();
        for u in f.link(v).into_iter().flatten() {
            if uf.seen(u) {
                let r = uf.find(u);
                if !roots.contains(&r) {
                    roots.push(r);
                }
            }
        }
        uf.make(v);
        if roots.is_empty() {
            continue;
        }
        roots.sort_by(|&a, &b| f.cmp_vertices(uf.top[b] as usize, uf.top[a] as usize));
        let survivor = roots[0];
        let mut root = uf.union_keep(survivor, v);
        let multiplicity = roots.len() - 1;
        for &r in &roots[1..] {
            let m = uf.top[r] as usize;
            pairs.push(PersistencePair {
                creator: CriticalPoint::at(f, m, CriticalKind::Maximum, 1),
                destroyer: CriticalPoint::at(f, v, CriticalKind::Saddle, multiplicity),
                persistence: f.value(m) - f.value(v),
            });
            root = uf.union_keep(root, r);
        }
    }
    pairs
}

/// The unpaired global maximum.
pub fn global_maximum(f: &GridField) -> usize {
    (0..f.len())
        .max_by(|&a, &b| f.cmp_vertices(a, b))
        .expect("fields are nonempty")
}
