//! Spatial heterophily on urban graphs: neighborhood partitions, spatial
//! diversity scores, the spatial-group GNN layer and its training harness.

pub mod error;
pub mod graph;
pub mod harness;
pub mod heterophily;
pub mod model;
pub mod numerics;
pub mod partition;
pub mod stats;
pub mod synth;
pub mod transport;

pub use error::{Error, Result};
