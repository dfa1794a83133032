//! Zero-shot spatio-temporal action localization, classification and tube
//! retrieval driven purely by object priors: person and object detections,
//! person-object spatial relations, and word-embedding semantics.

pub mod config;
pub mod error;
pub mod eval;
pub mod fixtures;
pub mod geometry;
pub mod io;
pub mod linker;
pub mod model;
pub mod pipeline;
pub mod scorer;
pub mod semantic;
pub mod spatial;
pub mod video;

pub use error::{Error, Result};
pub use geometry::{edge_gap, iou, BoundingBox};
