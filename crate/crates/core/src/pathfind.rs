//! Weighted maximum graph, its minimum spanning forest, and path extraction
//! on that forest (diameter, endpoint subpaths, branch sets, trimming).

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::histogram::DensityField;
use crate::topology::{CriticalKind, ExtremumGraph, GraphNode};
use crate::volio::Artifact;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedEdge {
    /// Saddle node id.
    pub u: usize,
    /// Extremum node id.
    pub v: usize,
    pub weight: f64,
    /// Separatrix from `u` to `v` in grid coordinates.
    pub polyline: Vec<[usize; 2]>,
}

impl WeightedEdge {
    pub fn other(&self, node: usize) -> usize {
        if node == self.u {
            self.v
        } else {
            self.u
        }
    }
}

/// Undirected graph over maximum-graph nodes with weights
/// `|D(extremum) - D(saddle)|` taken from the density field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedGraph {
    pub n: usize,
    pub nodes: Vec<GraphNode>,
    /// Density at each node's vertex.
    pub densities: Vec<f64>,
    pub edges: Vec<WeightedEdge>,
}

impl Artifact for WeightedGraph {
    const KIND: &'static str = "weighted_graph";
}

impl WeightedGraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.weight).sum()
    }

    /// Per node: `(neighbor, edge index)` sorted by neighbor then edge.
    pub fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for (k, e) in self.edges.iter().enumerate() {
            adj[e.u].push((e.v, k));
            adj[e.v].push((e.u, k));
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    pub fn degree(&self, node: usize) -> usize {
        self.edges.iter().filter(|e| e.u == node || e.v == node).count()
    }

    /// Connected components as sorted node lists, ordered by smallest node.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let adj = self.adjacency();
        let mut comp = vec![usize::MAX; self.nodes.len()];
        let mut out = Vec::new();
        for start in 0..self.nodes.len() {
            if comp[start] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut members = vec![start];
            comp[start] = id;
            let mut stack = vec![start];
            while let Some(x) = stack.pop() {
                for &(y, _) in &adj[x] {
                    if comp[y] == usize::MAX {
                        comp[y] = id;
                        members.push(y);
                        stack.push(y);
                    }
                }
            }
            members.sort_unstable();
            out.push(members);
        }
        out
    }
}

pub fn build_weighted_graph(eg: &ExtremumGraph, d: &DensityField) -> Result<WeightedGraph> {
    if eg.n != d.n() {
        return Err(Error::GridMismatch(format!(
            "graph on a {0}x{0} grid, density on {1}x{1}",
            eg.n,
            d.n()
        )));
    }
    let densities: Vec<f64> = eg.nodes.iter().map(|n| d.at_vertex(n.vertex)).collect();
    let mut edges: Vec<WeightedEdge> = Vec::with_capacity(eg.edges.len());
    let mut seen: HashMap<(usize, usize), usize> = HashMap::new();
    for e in &eg.edges {
        if e.saddle == e.extremum {
            continue;
        }
        let weight = (densities[e.extremum] - densities[e.saddle]).abs();
        match seen.get(&(e.saddle, e.extremum)) {
            Some(&k) => {
                if weight < edges[k].weight {
                    edges[k].weight = weight;
                    edges[k].polyline = e.polyline.clone();
                }
            }
            None => {
                seen.insert((e.saddle, e.extremum), edges.len());
                edges.push(WeightedEdge {
                    u: e.saddle,
                    v: e.extremum,
                    weight,
                    polyline: e.polyline.clone(),
                });
            }
        }
    }
    Ok(WeightedGraph {
        n: eg.n,
        nodes: eg.nodes.clone(),
        densities,
        edges,
    })
}

struct DisjointSet {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (a, b) = (self.find(a), self.find(b));
        if a == b {
            return false;
        }
        match self.rank[a].cmp(&self.rank[b]) {
            std::cmp::Ordering::Less => self.parent[a] = b,
            std::cmp::Ordering::Greater => self.parent[b] = a,
            std::cmp::Ordering::Equal => {
                self.parent[b] = a;
                self.rank[a] += 1;
            }
        }
        true
    }
}

/// Minimum spanning forest by Kruskal's algorithm.
///
/// Ties are broken by `(weight, smaller endpoint, larger endpoint, edge
/// index)`. Kept edges retain their input order.
pub fn minimum_spanning_tree(g: &WeightedGraph) -> Result<WeightedGraph> {
    if g.nodes.is_empty() {
        return Err(Error::EmptyForest);
    }
    let mut order: Vec<usize> = (0..g.edges.len()).collect();
    let key = |k: usize| {
        let e = &g.edges[k];
        (e.u.min(e.v), e.u.max(e.v), k)
    };
    order.sort_by(|&a, &b| {
        g.edges[a]
            .weight
            .total_cmp(&g.edges[b].weight)
            .then(key(a).cmp(&key(b)))
    });
    let mut ds = DisjointSet::new(g.nodes.len());
    let mut keep = vec![false; g.edges.len()];
    for k in order {
        let e = &g.edges[k];
        if ds.union(e.u, e.v) {
            keep[k] = true;
        }
    }
    Ok(WeightedGraph {
        n: g.n,
        nodes: g.nodes.clone(),
        densities: g.densities.clone(),
        edges: g
            .edges
            .iter()
            .zip(&keep)
            .filter(|(_, &k)| k)
            .map(|(e, _)| e.clone())
            .collect(),
    })
}

/// A path through the spanning forest with its concatenated separatrix
/// geometry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreePath {
    pub nodes: Vec<usize>,
    /// Grid coordinates of each node.
    pub coords: Vec<[usize; 2]>,
    /// Density at each node.
    pub densities: Vec<f64>,
    /// Concatenated separatrices with loops erased, from the first node to
    /// the last.
    pub polyline: Vec<[usize; 2]>,
    /// Position of each node in `polyline`.
    pub node_index: Vec<usize>,
    pub branch_id: usize,
    pub total_weight: f64,
}

impl Artifact for TreePath {
    const KIND: &'static str = "tree_path";
}

impl TreePath {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn first(&self) -> Option<usize> {
        self.nodes.first().copied()
    }

    pub fn last(&self) -> Option<usize> {
        self.nodes.last().copied()
    }
}

/// Assembles a path from a node sequence whose consecutive nodes are joined
/// by the listed edges.
fn assemble(t: &WeightedGraph, nodes: Vec<usize>, edge_ids: &[usize]) -> TreePath {
    let mut polyline: Vec<[usize; 2]> = Vec::new();
    let mut node_index = Vec::with_capacity(nodes.len());
    let mut position: HashMap<[usize; 2], usize> = HashMap::new();
    let mut push = |pt: [usize; 2], polyline: &mut Vec<[usize; 2]>, node_index: &mut Vec<usize>| {
        if let Some(&p) = position.get(&pt) {
            // Erase the loop back to the earlier visit.
            for q in polyline.drain(p + 1..) {
                position.remove(&q);
            }
            for ix in node_index.iter_mut() {
                *ix = (*ix).min(p);
            }
        } else {
            position.insert(pt, polyline.len());
            polyline.push(pt);
        }
    };
    if let Some(&first) = nodes.first() {
        push(t.nodes[first].coords, &mut polyline, &mut node_index);
        node_index.push(polyline.len() - 1);
    }
    let mut weight = 0.0;
    for (w, &k) in nodes.windows(2).zip(edge_ids) {
        let e = &t.edges[k];
        weight += e.weight;
        let pts: Vec<[usize; 2]> = if w[0] == e.u {
            e.polyline.clone()
        } else {
            e.polyline.iter().rev().copied().collect()
        };
        for pt in pts.into_iter().skip(1) {
            push(pt, &mut polyline, &mut node_index);
        }
        node_index.push(polyline.len() - 1);
    }
    TreePath {
        coords: nodes.iter().map(|&v| t.nodes[v].coords).collect(),
        densities: nodes.iter().map(|&v| t.densities[v]).collect(),
        nodes,
        polyline,
        node_index,
        branch_id: 0,
        total_weight: weight,
    }
}

/// Distances and parent links from `root` within its tree.
fn sweep(
    t: &WeightedGraph,
    adj: &[Vec<(usize, usize)>],
    root: usize,
    hop: bool,
) -> (Vec<f64>, Vec<Option<(usize, usize)>>) {
    let mut dist = vec![f64::NAN; t.nodes.len()];
    let mut parent = vec![None; t.nodes.len()];
    dist[root] = 0.0;
    let mut stack = vec![root];
    while let Some(x) = stack.pop() {
        for &(y, k) in &adj[x] {
            if dist[y].is_nan() {
                let w = if hop { 1.0 } else { t.edges[k].weight };
                dist[y] = dist[x] + w;
                parent[y] = Some((x, k));
                stack.push(y);
            }
        }
    }
    (dist, parent)
}

fn walk_back(parent: &[Option<(usize, usize)>], from: usize) -> (Vec<usize>, Vec<usize>) {
    let mut nodes = vec![from];
    let mut edges = Vec::new();
    let mut cur = from;
    while let Some((p, k)) = parent[cur] {
        nodes.push(p);
        edges.push(k);
        cur = p;
    }
    (nodes, edges)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DiameterOptions {
    /// Endpoints must have density at least `tau`; when `tau > 0`, saddles
    /// hanging off the tree by a single edge are also excluded.
    pub tau: f64,
    /// Count edges instead of summing weights.
    pub hop_metric: bool,
}

pub fn eligible_endpoints(t: &WeightedGraph, tau: f64) -> Vec<bool> {
    let degree = {
        let mut d = vec![0usize; t.nodes.len()];
        for e in &t.edges {
            d[e.u] += 1;
            d[e.v] += 1;
        }
        d
    };
    (0..t.nodes.len())
        .map(|v| {
            t.densities[v] >= tau
                && !(tau > 0.0 && t.nodes[v].kind == CriticalKind::Saddle && degree[v] == 1)
        })
        .collect()
}

/// Longest path of the forest between eligible endpoints.
///
/// The component with the largest total weight (smallest node id on ties)
/// among those holding an eligible node is searched by a double sweep: the
/// eligible node farthest from the component's first eligible node, then the
/// eligible node farthest from that one. Distance ties go to the smaller
/// node id.
pub fn tree_diameter_path(t: &WeightedGraph, opts: DiameterOptions) -> Result<TreePath> {
    if t.nodes.is_empty() {
        return Err(Error::EmptyForest);
    }
    let eligible = eligible_endpoints(t, opts.tau);
    let adj = t.adjacency();
    let mut comp_of = vec![0usize; t.nodes.len()];
    let comps = t.components();
    for (c, members) in comps.iter().enumerate() {
        for &v in members {
            comp_of[v] = c;
        }
    }
    let mut comp_weight = vec![0.0; comps.len()];
    for e in &t.edges {
        comp_weight[comp_of[e.u]] += if opts.hop_metric { 1.0 } else { e.weight };
    }
    let best = (0..comps.len())
        .filter(|&c| comps[c].iter().any(|&v| eligible[v]))
        .fold(None::<usize>, |best, c| match best {
            Some(b) if comp_weight[b] >= comp_weight[c] => Some(b),
            _ => Some(c),
        })
        .ok_or_else(|| {
            Error::InvalidArgument(format!("no path endpoint has density >= {}", opts.tau))
        })?;
    let members = &comps[best];
    let start = *members.iter().find(|&&v| eligible[v]).unwrap();

    let farthest = |dist: &[f64]| {
        members
            .iter()
            .copied()
            .filter(|&v| eligible[v])
            .fold(None::<usize>, |acc, v| match acc {
                Some(a) if dist[a] >= dist[v] => Some(a),
                _ => Some(v),
            })
            .unwrap()
    };
    let (d0, _) = sweep(t, &adj, start, opts.hop_metric);
    let a = farthest(&d0);
    let (d1, parent) = sweep(t, &adj, a, opts.hop_metric);
    let b = farthest(&d1);
    let (mut nodes, mut edges) = walk_back(&parent, b);
    // Canonical orientation: from the smaller endpoint id.
    if nodes.first() > nodes.last() {
        nodes.reverse();
        edges.reverse();
    }
    Ok(assemble(t, nodes, &edges))
}

/// The unique forest path from `a` to `b`.
pub fn subpath_between(t: &WeightedGraph, a: usize, b: usize) -> Result<TreePath> {
    for x in [a, b] {
        if x >= t.nodes.len() {
            return Err(Error::UnknownNode(x));
        }
    }
    let adj = t.adjacency();
    let (_, parent) = sweep(t, &adj, a, true);
    if a != b && parent[b].is_none() {
        return Err(Error::Disconnected(a, b));
    }
    let (mut nodes, mut edges) = walk_back(&parent, b);
    nodes.reverse();
    edges.reverse();
    Ok(assemble(t, nodes, &edges))
}

/// Drops the leading and trailing runs of nodes with density below `tau`.
pub fn trim_low_density(p: &TreePath, d: &DensityField, tau: f64) -> Result<TreePath> {
    if p.is_empty() {
        return Err(Error::InvalidArgument("cannot trim an empty path".into()));
    }
    let dens: Vec<f64> = p.coords.iter().map(|c| d.at(c[0], c[1])).collect();
    let Some(first) = dens.iter().position(|&x| x >= tau) else {
        return Err(Error::FullyTrimmed(tau));
    };
    let last = dens.iter().rposition(|&x| x >= tau).unwrap();
    if first == 0 && last == p.len() - 1 {
        return Ok(p.clone());
    }
    let (lo, hi) = (p.node_index[first], p.node_index[last]);
    let mut weight = 0.0;
    let kept = &p.nodes[first..=last];
    for w in dens[first..=last].windows(2) {
        weight += (w[1] - w[0]).abs();
    }
    Ok(TreePath {
        nodes: kept.to_vec(),
        coords: p.coords[first..=last].to_vec(),
        densities: p.densities[first..=last].to_vec(),
        polyline: p.polyline[lo..=hi].to_vec(),
        node_index: p.node_index[first..=last].iter().map(|i| i - lo).collect(),
        branch_id: p.branch_id,
        total_weight: weight,
    })
}

/// One path per `(a, b)` selection, with branch ids in selection order.
pub fn select_branches(t: &WeightedGraph, selections: &[(usize, usize)]) -> Result<Vec<TreePath>> {
    if selections.is_empty() {
        return Err(Error::InvalidArgument("no branch selections".into()));
    }
    selections
        .iter()
        .enumerate()
        .map(|(id, &(a, b))| {
            let mut p = subpath_between(t, a, b)?;
            p.branch_id = id;
            Ok(p)
        })
        .collect()
}
