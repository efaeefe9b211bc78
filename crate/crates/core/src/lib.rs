//! Consistency-aware graph neural network for fraud detection on
//! multi-relation graphs.

pub mod autodiff;
pub mod data;
pub mod detector;
pub mod error;
pub mod eval;
pub mod graph;
pub mod inconsistency;
pub mod model;
pub mod rng;

pub use error::{Error, Result};
pub use graph::{Label, MultiRelationGraph, NodeId, RelationId};
