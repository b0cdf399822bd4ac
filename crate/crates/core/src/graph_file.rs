//! JSON graph spec files.
//!
//! ```json
//! {
//!   "n_spokes": 64,
//!   "attachment_spoke": "1",
//!   "anomaly_edges": [["1", "a"], ["1", "b"], ["a", "b"]],
//!   "leaf_phase": 6.283185307179586,
//!   "vertex_behaviors": { "a": "transmit", "1": "grover", "x": {"reflect": 3.14} }
//! }
//! ```
//!
//! Instead of `anomaly_edges` a file may carry `adjacency`, an object mapping
//! each vertex of `G` to its neighbors inside `G`. The adjacency must be
//! symmetric. Custom scattering matrices are `{"unitary": rows}` where each
//! row is a list of `[re, im]` pairs.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{build_graph, AnomalyGraphSpec, VertexBehavior};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphFile {
    n_spokes: usize,
    #[serde(default = "default_attachment")]
    attachment_spoke: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    anomaly_edges: Option<Vec<[String; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    adjacency: Option<BTreeMap<String, Vec<String>>>,
    #[serde(default)]
    leaf_phase: f64,
    #[serde(default)]
    vertex_behaviors: BTreeMap<String, BehaviorRepr>,
}

fn default_attachment() -> String {
    "1".into()
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum BehaviorRepr {
    Named(String),
    Reflect { reflect: f64 },
    Unitary { unitary: Vec<Vec<[f64; 2]>> },
}

fn parse_error(context: impl Into<String>, message: impl Into<String>) -> Error {
    Error::ParseError {
        context: context.into(),
        message: message.into(),
    }
}

impl BehaviorRepr {
    fn into_behavior(self, vertex: &str) -> Result<VertexBehavior> {
        let context = format!("vertex_behaviors.{vertex}");
        match self {
            BehaviorRepr::Named(name) => match name.as_str() {
                "transmit" => Ok(VertexBehavior::Transmit),
                "grover" => Ok(VertexBehavior::GroverCoin),
                other => Err(parse_error(
                    context,
                    format!("unknown behavior {other:?} (expected \"transmit\" or \"grover\")"),
                )),
            },
            BehaviorRepr::Reflect { reflect } => Ok(VertexBehavior::Reflect(reflect)),
            BehaviorRepr::Unitary { unitary } => {
                let d = unitary.len();
                if let Some(bad) = unitary.iter().position(|row| row.len() != d) {
                    return Err(parse_error(
                        context,
                        format!("row {bad} of a {d}x{d} unitary has the wrong length"),
                    ));
                }
                Ok(VertexBehavior::CustomUnitary(DMatrix::from_fn(d, d, |i, j| {
                    let [re, im] = unitary[i][j];
                    Complex64::new(re, im)
                })))
            }
        }
    }

    fn from_behavior(behavior: &VertexBehavior) -> Self {
        match behavior {
            VertexBehavior::Reflect(reflect) => BehaviorRepr::Reflect { reflect: *reflect },
            VertexBehavior::Transmit => BehaviorRepr::Named("transmit".into()),
            VertexBehavior::GroverCoin => BehaviorRepr::Named("grover".into()),
            VertexBehavior::CustomUnitary(m) => BehaviorRepr::Unitary {
                unitary: m
                    .row_iter()
                    .map(|row| row.iter().map(|z| [z.re, z.im]).collect())
                    .collect(),
            },
        }
    }
}

fn edges_from_adjacency(adjacency: BTreeMap<String, Vec<String>>) -> Result<Vec<(String, String)>> {
    let mut edges = Vec::new();
    for (u, nbs) in &adjacency {
        for v in nbs {
            let back = adjacency.get(v).is_some_and(|w| w.contains(u));
            if !back {
                return Err(parse_error(
                    format!("adjacency.{u}"),
                    format!("{u} lists {v}, but {v} does not list {u}"),
                ));
            }
            if u < v {
                edges.push((u.clone(), v.clone()));
            }
        }
    }
    Ok(edges)
}

/// Parse a graph spec from JSON text and validate it.
pub fn parse_graph_str(text: &str) -> Result<AnomalyGraphSpec> {
    let raw: GraphFile = serde_json::from_str(text).map_err(|e| {
        parse_error(format!("line {} column {}", e.line(), e.column()), e.to_string())
    })?;
    let anomaly_edges = match (raw.anomaly_edges, raw.adjacency) {
        (Some(_), Some(_)) => {
            return Err(parse_error(
                "anomaly_edges",
                "give either anomaly_edges or adjacency, not both",
            ))
        }
        (Some(edges), None) => edges.into_iter().map(|[u, v]| (u, v)).collect(),
        (None, Some(adj)) => edges_from_adjacency(adj)?,
        (None, None) => Vec::new(),
    };
    let mut vertex_behaviors = BTreeMap::new();
    for (vertex, repr) in raw.vertex_behaviors {
        let behavior = repr.into_behavior(&vertex)?;
        vertex_behaviors.insert(vertex, behavior);
    }
    let spec = AnomalyGraphSpec {
        n_spokes: raw.n_spokes,
        attachment_spoke: raw.attachment_spoke,
        anomaly_edges,
        vertex_behaviors,
        leaf_phase: raw.leaf_phase,
    };
    build_graph(&spec)?;
    Ok(spec)
}

pub fn parse_graph_file(path: impl AsRef<Path>) -> Result<AnomalyGraphSpec> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| {
        parse_error(path.display().to_string(), e.to_string())
    })?;
    parse_graph_str(&text)
}

/// Canonical JSON form (edge-list flavor).
pub fn to_json_string(spec: &AnomalyGraphSpec) -> String {
    serde_json::to_string_pretty(&to_raw(spec)).expect("graph spec serializes")
}

/// A JSON array of graph specs.
pub fn to_json_list_string(specs: &[AnomalyGraphSpec]) -> String {
    let raw: Vec<GraphFile> = specs.iter().map(to_raw).collect();
    serde_json::to_string_pretty(&raw).expect("graph specs serialize")
}

pub fn parse_graph_list_str(text: &str) -> Result<Vec<AnomalyGraphSpec>> {
    let items: Vec<serde_json::Value> = serde_json::from_str(text).map_err(|e| {
        parse_error(format!("line {} column {}", e.line(), e.column()), e.to_string())
    })?;
    items
        .iter()
        .enumerate()
        .map(|(i, item)| {
            parse_graph_str(&item.to_string()).map_err(|e| match e {
                Error::ParseError { context, message } => {
                    parse_error(format!("item {i}: {context}"), message)
                }
                other => other,
            })
        })
        .collect()
}

fn to_raw(spec: &AnomalyGraphSpec) -> GraphFile {
    GraphFile {
        n_spokes: spec.n_spokes,
        attachment_spoke: spec.attachment_spoke.clone(),
        anomaly_edges: Some(
            spec.anomaly_edges
                .iter()
                .map(|(u, v)| [u.clone(), v.clone()])
                .collect(),
        ),
        adjacency: None,
        leaf_phase: spec.leaf_phase,
        vertex_behaviors: spec
            .vertex_behaviors
            .iter()
            .map(|(k, b)| (k.clone(), BehaviorRepr::from_behavior(b)))
            .collect(),
    }
}
