//! Star graph with an attached anomaly and the directed-edge basis of the walk.
//!
//! The star has a hub labelled `"0"` and outer vertices `"1"`..`"N"`. The
//! anomaly graph `G` hangs off one of the outer vertices (the attachment
//! spoke). Every undirected edge `{u, v}` contributes two basis states,
//! `|u,v⟩` (moving from `u` to `v`) and `|v,u⟩`.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::f64::consts::PI;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const HUB: &str = "0";

/// Deviation from unitarity tolerated in user-supplied scattering matrices.
pub const BEHAVIOR_UNITARITY_TOL: f64 = 1e-12;

/// Scattering rule applied at a vertex of the anomaly graph.
///
/// Incoming states are ordered by neighbor: the hub first (for the attachment
/// vertex), then the remaining neighbors in lexicographic label order. A
/// custom matrix maps incoming-from-neighbor `k` (column) to
/// outgoing-to-neighbor `l` (row).
#[derive(Debug, Clone, PartialEq)]
pub enum VertexBehavior {
    Reflect(f64),
    Transmit,
    GroverCoin,
    CustomUnitary(DMatrix<Complex64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnomalyGraphSpec {
    pub n_spokes: usize,
    pub attachment_spoke: String,
    /// Undirected edges of `G`, as given.
    pub anomaly_edges: Vec<(String, String)>,
    pub vertex_behaviors: BTreeMap<String, VertexBehavior>,
    /// Reflection phase of the plain outer vertices.
    pub leaf_phase: f64,
}

impl AnomalyGraphSpec {
    /// Plain star: spoke 1 is an ordinary leaf.
    pub fn empty(n_spokes: usize) -> Self {
        Self {
            n_spokes,
            attachment_spoke: "1".into(),
            anomaly_edges: Vec::new(),
            vertex_behaviors: BTreeMap::new(),
            leaf_phase: 0.0,
        }
    }

    /// Triangle `{1, a, b}` attached to spoke 1, tuned to `φ = 2π`.
    pub fn triangle(n_spokes: usize) -> Self {
        Self {
            n_spokes,
            attachment_spoke: "1".into(),
            anomaly_edges: vec![
                ("1".into(), "a".into()),
                ("1".into(), "b".into()),
                ("a".into(), "b".into()),
            ],
            vertex_behaviors: BTreeMap::new(),
            leaf_phase: 2.0 * PI,
        }
    }

    pub fn with_n_spokes(&self, n_spokes: usize) -> Self {
        Self {
            n_spokes,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DirectedEdge {
    pub tail: String,
    pub head: String,
}

impl DirectedEdge {
    pub fn new(tail: impl Into<String>, head: impl Into<String>) -> Self {
        Self {
            tail: tail.into(),
            head: head.into(),
        }
    }

    pub fn reversed(&self) -> Self {
        Self::new(self.head.clone(), self.tail.clone())
    }
}

impl fmt::Display for DirectedEdge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.tail, self.head)
    }
}

/// Resolved scattering rule, after defaults are applied.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum LocalRule {
    Reflect(f64),
    /// Reflect with the leaf phase supplied at operator-assembly time.
    LeafReflect,
    Transmit,
    Grover,
    Unitary(DMatrix<Complex64>),
}

/// Validated star-plus-anomaly graph.
#[derive(Debug, Clone)]
pub struct StarGraph {
    spec: AnomalyGraphSpec,
    attachment_index: usize,
    /// Canonical undirected edges of `G`, each with `u < v`, sorted.
    anomaly_edges: Vec<(String, String)>,
    /// Neighbor order used by the local scattering matrices of `G` vertices.
    neighbors: BTreeMap<String, Vec<String>>,
    rules: BTreeMap<String, LocalRule>,
    dead_ends: Vec<String>,
}

impl StarGraph {
    pub fn spec(&self) -> &AnomalyGraphSpec {
        &self.spec
    }

    pub fn n_spokes(&self) -> usize {
        self.spec.n_spokes
    }

    pub fn attachment(&self) -> &str {
        &self.spec.attachment_spoke
    }

    /// Spoke number (1..=N) carrying the anomaly.
    pub fn attachment_index(&self) -> usize {
        self.attachment_index
    }

    pub fn anomaly_edges(&self) -> &[(String, String)] {
        &self.anomaly_edges
    }

    pub fn has_anomaly(&self) -> bool {
        !self.anomaly_edges.is_empty()
    }

    /// Internal vertices of `G` of degree one. They reflect with phase π.
    pub fn dead_ends(&self) -> &[String] {
        &self.dead_ends
    }

    /// Vertices of `G` (attachment included) in label order.
    pub fn anomaly_vertices(&self) -> impl Iterator<Item = &str> {
        self.neighbors.keys().map(String::as_str)
    }

    pub(crate) fn neighbors_of(&self, vertex: &str) -> &[String] {
        &self.neighbors[vertex]
    }

    /// Whether an outer vertex connects to anything besides the hub.
    pub fn has_foreign_neighbors(&self, vertex: &str) -> bool {
        self.neighbors
            .get(vertex)
            .is_some_and(|nb| nb.iter().any(|v| v != HUB))
    }

    /// Local scattering matrix of a `G` vertex, with `phi` as the leaf phase.
    pub(crate) fn local_matrix(&self, vertex: &str, phi: f64) -> DMatrix<Complex64> {
        let d = self.neighbors[vertex].len();
        rule_matrix(&self.rules[vertex], d, phi)
    }
}

pub(crate) fn rule_matrix(rule: &LocalRule, d: usize, phi: f64) -> DMatrix<Complex64> {
    match rule {
        LocalRule::Reflect(theta) => {
            DMatrix::from_diagonal_element(d, d, Complex64::from_polar(1.0, *theta))
        }
        LocalRule::LeafReflect => {
            DMatrix::from_diagonal_element(d, d, Complex64::from_polar(1.0, phi))
        }
        LocalRule::Transmit => DMatrix::from_fn(d, d, |i, j| {
            if i != j {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        }),
        LocalRule::Grover => {
            let t = 2.0 / d as f64;
            DMatrix::from_fn(d, d, |i, j| {
                Complex64::new(if i == j { t - 1.0 } else { t }, 0.0)
            })
        }
        LocalRule::Unitary(m) => m.clone(),
    }
}

/// Max-norm deviation of `B†B` from the identity.
pub(crate) fn unitarity_defect(m: &DMatrix<Complex64>) -> f64 {
    let gram = m.adjoint() * m;
    let n = gram.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((gram[(i, j)] - target).norm());
        }
    }
    worst
}

fn is_numeric_label(label: &str) -> bool {
    !label.is_empty() && label.bytes().all(|b| b.is_ascii_digit())
}

/// Bijection between directed edges and basis indices.
///
/// Ordering: spoke states `|0,j⟩, |j,0⟩` for `j = 1..N`, then the anomaly
/// edges in canonical order, each as `|u,v⟩, |v,u⟩` with `u < v`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeBasis {
    directed_edges: Vec<DirectedEdge>,
    index_of: HashMap<DirectedEdge, usize>,
    side_of: Vec<Side>,
    n_spokes: usize,
    attachment_index: usize,
}

impl EdgeBasis {
    fn new(graph: &StarGraph) -> Self {
        let n = graph.n_spokes();
        let a = graph.attachment_index();
        let mut directed_edges = Vec::with_capacity(2 * (n + graph.anomaly_edges.len()));
        let mut side_of = Vec::with_capacity(directed_edges.capacity());
        for j in 1..=n {
            let side = if j == a { Side::Right } else { Side::Left };
            directed_edges.push(DirectedEdge::new(HUB, j.to_string()));
            directed_edges.push(DirectedEdge::new(j.to_string(), HUB));
            side_of.extend([side, side]);
        }
        for (u, v) in &graph.anomaly_edges {
            directed_edges.push(DirectedEdge::new(u.clone(), v.clone()));
            directed_edges.push(DirectedEdge::new(v.clone(), u.clone()));
            side_of.extend([Side::Right, Side::Right]);
        }
        let index_of = directed_edges
            .iter()
            .enumerate()
            .map(|(i, e)| (e.clone(), i))
            .collect();
        Self {
            directed_edges,
            index_of,
            side_of,
            n_spokes: n,
            attachment_index: a,
        }
    }

    pub fn dim(&self) -> usize {
        self.directed_edges.len()
    }

    pub fn edges(&self) -> &[DirectedEdge] {
        &self.directed_edges
    }

    pub fn edge(&self, index: usize) -> &DirectedEdge {
        &self.directed_edges[index]
    }

    pub fn index_of(&self, tail: &str, head: &str) -> Option<usize> {
        self.index_of.get(&DirectedEdge::new(tail, head)).copied()
    }

    pub fn side_of(&self, index: usize) -> Side {
        self.side_of[index]
    }

    pub fn sides(&self) -> &[Side] {
        &self.side_of
    }

    pub fn n_spokes(&self) -> usize {
        self.n_spokes
    }

    pub fn attachment_index(&self) -> usize {
        self.attachment_index
    }

    /// Index of `|0,j⟩` (hub to spoke `j`).
    pub fn hub_out(&self, spoke: usize) -> usize {
        2 * (spoke - 1)
    }

    /// Index of `|j,0⟩` (spoke `j` into the hub).
    pub fn hub_in(&self, spoke: usize) -> usize {
        2 * (spoke - 1) + 1
    }

    /// Number of spoke states; anomaly states start here.
    pub fn spoke_states(&self) -> usize {
        2 * self.n_spokes
    }
}

/// Validate `spec` and build the edge basis.
pub fn build_graph(spec: &AnomalyGraphSpec) -> Result<(StarGraph, EdgeBasis)> {
    let graph = validate(spec)?;
    let basis = EdgeBasis::new(&graph);
    Ok((graph, basis))
}

fn validate(spec: &AnomalyGraphSpec) -> Result<StarGraph> {
    let n = spec.n_spokes;
    if n < 2 {
        return Err(Error::NTooSmall(n));
    }
    let attachment = spec.attachment_spoke.as_str();
    let attachment_index = attachment
        .parse::<usize>()
        .ok()
        .filter(|j| (1..=n).contains(j) && is_numeric_label(attachment) && !attachment.starts_with('0'))
        .ok_or_else(|| {
            Error::InvalidGraph(format!(
                "attachment spoke {attachment:?} is not a spoke label in 1..={n}"
            ))
        })?;

    let mut edges = BTreeSet::new();
    for (u, v) in &spec.anomaly_edges {
        if u == v {
            return Err(Error::InvalidGraph(format!("self-loop at {u}")));
        }
        for w in [u, v] {
            if w.is_empty() {
                return Err(Error::InvalidGraph("empty vertex label".into()));
            }
            if w != attachment && is_numeric_label(w) {
                return Err(Error::InvalidGraph(format!(
                    "anomaly vertex {w:?} clashes with star labels; use non-numeric labels"
                )));
            }
        }
        let key = if u < v {
            (u.clone(), v.clone())
        } else {
            (v.clone(), u.clone())
        };
        if !edges.insert(key) {
            return Err(Error::DuplicateEdge(u.clone(), v.clone()));
        }
    }

    let mut neighbors: BTreeMap<String, Vec<String>> = BTreeMap::new();
    neighbors.insert(attachment.to_string(), vec![HUB.to_string()]);
    for (u, v) in &edges {
        neighbors.entry(u.clone()).or_default().push(v.clone());
        neighbors.entry(v.clone()).or_default().push(u.clone());
    }
    for (vertex, nb) in neighbors.iter_mut() {
        // hub stays first for the attachment vertex
        let start = usize::from(vertex == attachment);
        nb[start..].sort();
    }

    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::from([attachment.to_string()]);
    seen.insert(attachment.to_string());
    while let Some(v) = queue.pop_front() {
        for w in &neighbors[&v] {
            if w != HUB && seen.insert(w.clone()) {
                queue.push_back(w.clone());
            }
        }
    }
    let unreachable: Vec<String> = neighbors
        .keys()
        .filter(|v| !seen.contains(*v))
        .cloned()
        .collect();
    if !unreachable.is_empty() {
        return Err(Error::DisconnectedAnomaly {
            attachment: attachment.to_string(),
            unreachable,
        });
    }

    for vertex in spec.vertex_behaviors.keys() {
        if !neighbors.contains_key(vertex) {
            return Err(Error::InvalidGraph(format!(
                "behavior given for {vertex:?}, which is not a vertex of the anomaly"
            )));
        }
    }

    let mut rules = BTreeMap::new();
    let mut dead_ends = Vec::new();
    for (vertex, nb) in &neighbors {
        let d = nb.len();
        let rule = match spec.vertex_behaviors.get(vertex) {
            Some(VertexBehavior::Reflect(theta)) => LocalRule::Reflect(*theta),
            Some(VertexBehavior::Transmit) => {
                if d != 2 {
                    return Err(Error::BehaviorDimension {
                        vertex: vertex.clone(),
                        expected: 2,
                        found: d,
                    });
                }
                LocalRule::Transmit
            }
            Some(VertexBehavior::GroverCoin) => LocalRule::Grover,
            Some(VertexBehavior::CustomUnitary(m)) => {
                if m.nrows() != d || m.ncols() != d {
                    return Err(Error::BehaviorDimension {
                        vertex: vertex.clone(),
                        expected: d,
                        found: m.nrows(),
                    });
                }
                let deviation = unitarity_defect(m);
                if deviation >= BEHAVIOR_UNITARITY_TOL {
                    return Err(Error::NonUnitaryBehavior {
                        vertex: vertex.clone(),
                        deviation,
                    });
                }
                LocalRule::Unitary(m.clone())
            }
            None => match d {
                1 if vertex == attachment => LocalRule::LeafReflect,
                1 => {
                    dead_ends.push(vertex.clone());
                    LocalRule::Reflect(PI)
                }
                2 => LocalRule::Transmit,
                _ => LocalRule::Grover,
            },
        };
        rules.insert(vertex.clone(), rule);
    }

    Ok(StarGraph {
        spec: spec.clone(),
        attachment_index,
        anomaly_edges: edges.into_iter().collect(),
        neighbors,
        rules,
        dead_ends,
    })
}
