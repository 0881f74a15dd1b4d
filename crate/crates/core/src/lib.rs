//! Topology-guided fusion of two co-registered scalar volumes.
//!
//! The joint histogram of the volume pair is log-normalized into a density
//! field. Its maximum graph is reduced to a weighted spanning tree whose
//! longest path follows the dominant ridge of the histogram. A smoothing
//! spline through that path, sampled by arc length, parameterizes every
//! histogram cell, and pulling the parameterization back through the binning
//! yields one fused scalar volume.

pub mod error;
pub mod fusion;
pub mod histogram;
pub mod pathfind;
pub mod pipeline;
pub mod spline;
pub mod synth;
pub mod topology;
pub mod volio;

pub use error::{Error, Result};
