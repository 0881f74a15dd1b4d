use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::critical::CriticalKind;
use super::GridField;
use crate::volio::Artifact;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphNode {
    pub id: usize,
    pub vertex: usize,
    pub coords: [usize; 2],
    pub kind: CriticalKind,
    pub value: f64,
    /// Index of this simple saddle within a split multi-saddle; 0 otherwise.
    pub split: usize,
    /// Both separatrices of this saddle reach the same extremum and were
    /// collapsed into one edge.
    pub collapsed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphEdge {
    /// Node id of the saddle.
    pub saddle: usize,
    /// Node id of the extremum the separatrix ends at.
    pub extremum: usize,
    /// Grid walk from the saddle to the extremum.
    pub polyline: Vec<[usize; 2]>,
}

/// Extrema and saddles of a grid field joined by steepest-ascent (or
/// descent) separatrices.
///
/// Node ids list all extrema first, in vertex order, then the simple saddles
/// by vertex and split index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtremumGraph {
    pub n: usize,
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
}

impl Artifact for ExtremumGraph {
    const KIND: &'static str = "extremum_graph";
}

impl ExtremumGraph {
    pub fn node(&self, id: usize) -> Option<&GraphNode> {
        self.nodes.get(id)
    }

    pub fn count(&self, kind: CriticalKind) -> usize {
        self.nodes.iter().filter(|n| n.kind == kind).count()
    }

    pub fn node_at_vertex(&self, vertex: usize) -> Option<&GraphNode> {
        self.nodes.iter().find(|n| n.vertex == vertex)
    }
}

/// Maximum graph: maxima and saddles connected by ascending separatrices.
///
/// Each saddle's upper link splits into components; from each component a
/// walk starts at its highest vertex and repeatedly steps to the highest
/// neighbor until it reaches a maximum. A saddle with `c` components is split
/// into `c - 1` simple saddles joining components `k` and `k + 1`.
pub fn extract_extremum_graph(f: &GridField) -> ExtremumGraph {
    extract(f, true)
}

/// Minimum graph built by steepest descent; the mirror of
/// [`extract_extremum_graph`].
pub fn extract_minimum_graph(f: &GridField) -> ExtremumGraph {
    extract(f, false)
}

fn extract(f: &GridField, ascending: bool) -> ExtremumGraph {
    let step = |v: usize| {
        if ascending {
            f.steepest_ascent(v)
        } else {
            f.steepest_descent(v)
        }
    };
    let extremum_kind = if ascending {
        CriticalKind::Maximum
    } else {
        CriticalKind::Minimum
    };

    let extrema: Vec<usize> = (0..f.len()).filter(|&v| step(v).is_none()).collect();
    let mut nodes: Vec<GraphNode> = extrema
        .iter()
        .enumerate()
        .map(|(id, &v)| GraphNode {
            id,
            vertex: v,
            coords: f.coords(v),
            kind: extremum_kind,
            value: f.value(v),
            split: 0,
            collapsed: false,
        })
        .collect();

    // Separatrices of every saddle vertex, one walk per link component.
    let walks: Vec<(usize, Vec<Vec<usize>>)> = (0..f.len())
        .into_par_iter()
        .filter_map(|v| {
            let comps = f.link_components(v, ascending);
            if comps.len() < 2 {
                return None;
            }
            let walks = comps
                .iter()
                .map(|comp| {
                    let seed = comp
                        .iter()
                        .copied()
                        .reduce(|a, b| if ascending == f.higher(b, a) { b } else { a })
                        .unwrap();
                    let mut walk = vec![v, seed];
                    let mut cur = seed;
                    while let Some(next) = step(cur) {
                        walk.push(next);
                        cur = next;
                    }
                    walk
                })
                .collect();
            Some((v, walks))
        })
        .collect();

    let ext_id = |vertex: usize| extrema.binary_search(&vertex).expect("walks end at extrema");
    let to_coords = |walk: &[usize]| walk.iter().map(|&u| f.coords(u)).collect::<Vec<_>>();
    let mut edges = Vec::new();
    for (v, walks) in &walks {
        for k in 0..walks.len() - 1 {
            let id = nodes.len();
            let (a, b) = (&walks[k], &walks[k + 1]);
            let (ea, eb) = (ext_id(*a.last().unwrap()), ext_id(*b.last().unwrap()));
            let collapsed = ea == eb;
            nodes.push(GraphNode {
                id,
                vertex: *v,
                coords: f.coords(*v),
                kind: CriticalKind::Saddle,
                value: f.value(*v),
                split: k,
                collapsed,
            });
            edges.push(GraphEdge {
                saddle: id,
                extremum: ea,
                polyline: to_coords(a),
            });
            if !collapsed {
                edges.push(GraphEdge {
                    saddle: id,
                    extremum: eb,
                    polyline: to_coords(b),
                });
            }
        }
    }
    ExtremumGraph {
        n: f.n(),
        nodes,
        edges,
    }
}
