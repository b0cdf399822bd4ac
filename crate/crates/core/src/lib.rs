//! Scattering quantum walks on star graphs with a structural anomaly.
//!
//! A star of `N` spokes carries an extra graph `G` attached to the outer end
//! of one spoke. The walk is searched with the leaf phase tuned so that an
//! eigenvalue of the decoupled left side matches an eigenvalue of the side
//! containing `G`; the walk then rotates from the uniform left state into a
//! state localized on `G` in `O(√N)` steps.

pub mod error;
pub mod experiments;
pub mod graph;
pub mod graph_file;
pub mod linalg;
pub mod operator;
pub mod spectral;
pub mod walk;

pub use error::{Error, Result};
pub use graph::{build_graph, AnomalyGraphSpec, DirectedEdge, EdgeBasis, Side, StarGraph, VertexBehavior};
pub use operator::{Representation, StateSpace, WalkUnitary};
pub use spectral::{Branch, ClassifyOptions, SpectralClassification};
