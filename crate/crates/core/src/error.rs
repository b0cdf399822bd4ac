use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::spectral::PhaseCandidate;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// A right-side eigenvalue together with the leaf phases that would match it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TuningSuggestion {
    pub lambda: Complex64,
    pub candidates: Vec<PhaseCandidate>,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("star needs at least 2 spokes, got {0}")]
    NTooSmall(usize),

    #[error("duplicate edge {0}-{1}")]
    DuplicateEdge(String, String),

    #[error("anomaly vertices not reachable from attachment vertex {attachment}: {unreachable:?}")]
    DisconnectedAnomaly {
        attachment: String,
        unreachable: Vec<String>,
    },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("behavior of vertex {vertex} is not unitary (deviation {deviation:.3e})")]
    NonUnitaryBehavior { vertex: String, deviation: f64 },

    #[error("behavior of vertex {vertex} expects degree {expected}, vertex has degree {found}")]
    BehaviorDimension {
        vertex: String,
        expected: usize,
        found: usize,
    },

    #[error("parse error at {context}: {message}")]
    ParseError { context: String, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("assembled operator is not unitary (deviation {0:.3e})")]
    NonUnitaryResult(f64),

    #[error("operators live on different bases: {0}")]
    BasisMismatch(String),

    #[error("eigensolver failed: {0}")]
    EigensolverFailure(String),

    #[error("e^(i phi) + lambda0^2 = {value:.3e} is degenerate for lambda0 = {lambda:.6}")]
    PhaseDegeneracy { lambda: Complex64, value: f64 },

    #[error("no left/right eigenvalue match at this phase; tune phi")]
    NoMatch { suggestions: Vec<TuningSuggestion> },

    #[error("several matched eigenvalues {candidates:?}; select one explicitly")]
    AmbiguousMatch { candidates: Vec<Complex64> },

    #[error("coupling estimate does not converge: {0}")]
    FitDivergence(String),

    #[error("active right eigenvector has zero hub amplitude")]
    ZeroDelta,

    #[error("coupling constant must be positive")]
    ZeroCoupling,

    #[error("eigenvalue family near {lambda0:.6} could not be resolved: {reason}")]
    UnresolvedFamily { lambda0: Complex64, reason: String },

    #[error("anomaly not found after {trials} trials")]
    TrialsExhausted { trials: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
