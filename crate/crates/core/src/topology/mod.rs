//! Scalar-field topology on the density grid.
//!
//! The grid is triangulated by splitting each quad along the lower-left to
//! upper-right diagonal, giving every interior vertex six neighbors. Vertex
//! comparisons use a strict total order (value, then offset) so flat regions
//! behave like a generic field.

mod critical;
mod field;
mod graph;
mod persistence;
mod simplify;

pub use critical::{classify_critical_points, classify_vertex, count_kind, CriticalKind, CriticalPoint};
pub use field::GridField;
pub use graph::{extract_extremum_graph, extract_minimum_graph, ExtremumGraph, GraphEdge, GraphNode};
pub use persistence::{compute_persistence_pairs, global_maximum, PersistencePair};
pub use simplify::simplify;
