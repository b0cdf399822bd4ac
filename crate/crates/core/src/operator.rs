//! One-step walk operators.
//!
//! Columns are indexed by states entering a vertex and rows by states leaving
//! it, so `U[(|v,w⟩, |u,v⟩)]` is the amplitude for scattering at `v` from
//! neighbor `u` to neighbor `w`.
//!
//! Two representations are offered. The edge representation acts on the full
//! directed-edge basis of a concrete star. The collective representation
//! replaces the `2(N-1)` left-side spoke states by the two uniform states
//! `|in⟩ = Σ_{j≠a}|j,0⟩/√(N-1)` and `|out⟩ = Σ_{j≠a}|0,j⟩/√(N-1)`. The
//! subspace spanned by `|in⟩, |out⟩` and the right side is invariant under
//! `U(ε)` for every `ε`, and its complement consists of the non-uniform spoke
//! modes, on which `U(ε)` and `U₀` both act as `|j,0⟩ → -|0,j⟩`,
//! `|0,j⟩ → e^{iφ}|j,0⟩`. The collective operator therefore carries the
//! complete `ε` dependence in a dimension independent of `N`, and `ε` may be
//! taken arbitrarily small.

use std::io::Write;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{unitarity_defect, DirectedEdge, EdgeBasis, Side, StarGraph, HUB};

/// Tolerance on `‖U†U − I‖_max` accepted at assembly.
pub const UNITARITY_TOL: f64 = 1e-12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Representation {
    Edges,
    Collective,
}

/// Basis description shared by operators and the states they act on.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    representation: Representation,
    labels: Vec<String>,
    sides: Vec<Side>,
    attach_out: usize,
    attach_in: usize,
    in_state: DVector<Complex64>,
    out_state: DVector<Complex64>,
    hub_incoming: Vec<bool>,
}

impl StateSpace {
    pub fn edges(basis: &EdgeBasis) -> Self {
        let n = basis.n_spokes();
        let a = basis.attachment_index();
        let dim = basis.dim();
        let norm = 1.0 / ((n - 1) as f64).sqrt();
        let mut in_state = DVector::zeros(dim);
        let mut out_state = DVector::zeros(dim);
        let mut hub_incoming = vec![false; dim];
        for j in 1..=n {
            hub_incoming[basis.hub_in(j)] = true;
            if j != a {
                in_state[basis.hub_in(j)] = Complex64::new(norm, 0.0);
                out_state[basis.hub_out(j)] = Complex64::new(norm, 0.0);
            }
        }
        Self {
            representation: Representation::Edges,
            labels: basis.edges().iter().map(ToString::to_string).collect(),
            sides: basis.sides().to_vec(),
            attach_out: basis.hub_out(a),
            attach_in: basis.hub_in(a),
            in_state,
            out_state,
            hub_incoming,
        }
    }

    pub fn collective(graph: &StarGraph) -> Self {
        let edges = right_edges(graph);
        let dim = 2 + edges.len();
        let mut labels = vec!["in".to_string(), "out".to_string()];
        labels.extend(edges.iter().map(ToString::to_string));
        let mut sides = vec![Side::Left, Side::Left];
        sides.extend(std::iter::repeat_n(Side::Right, edges.len()));
        let mut in_state = DVector::zeros(dim);
        let mut out_state = DVector::zeros(dim);
        in_state[0] = ONE;
        out_state[1] = ONE;
        let mut hub_incoming = vec![false; dim];
        hub_incoming[0] = true;
        hub_incoming[3] = true;
        Self {
            representation: Representation::Collective,
            labels,
            sides,
            attach_out: 2,
            attach_in: 3,
            in_state,
            out_state,
            hub_incoming,
        }
    }

    pub fn representation(&self) -> Representation {
        self.representation
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn side(&self, index: usize) -> Side {
        self.sides[index]
    }

    pub fn sides(&self) -> &[Side] {
        &self.sides
    }

    /// Index of `|0,a⟩`.
    pub fn attach_out(&self) -> usize {
        self.attach_out
    }

    /// Index of `|a,0⟩`.
    pub fn attach_in(&self) -> usize {
        self.attach_in
    }

    pub fn in_state(&self) -> &DVector<Complex64> {
        &self.in_state
    }

    pub fn out_state(&self) -> &DVector<Complex64> {
        &self.out_state
    }

    pub fn is_hub_incoming(&self, index: usize) -> bool {
        self.hub_incoming[index]
    }

    /// Weight of `v` on one side.
    pub fn side_weight(&self, v: &DVector<Complex64>, side: Side) -> f64 {
        v.iter()
            .zip(&self.sides)
            .filter(|(_, s)| **s == side)
            .map(|(z, _)| z.norm_sqr())
            .sum()
    }

    /// Norm of the part of `v` the hub perturbation can reach from `side`:
    /// `span{|in⟩, |out⟩}` on the left, `span{|0,a⟩, |a,0⟩}` on the right.
    pub fn contact_amplitude(&self, v: &DVector<Complex64>, side: Side) -> f64 {
        let [x, y] = self.contact_coordinates(v, side);
        (x.norm_sqr() + y.norm_sqr()).sqrt()
    }

    pub(crate) fn contact_coordinates(&self, v: &DVector<Complex64>, side: Side) -> [Complex64; 2] {
        match side {
            Side::Left => [self.in_state.dotc(v), self.out_state.dotc(v)],
            Side::Right => [v[self.attach_out], v[self.attach_in]],
        }
    }
}

/// Right-side edges in basis order: `|0,a⟩, |a,0⟩`, then the anomaly edges.
fn right_edges(graph: &StarGraph) -> Vec<DirectedEdge> {
    let a = graph.attachment();
    let mut edges = vec![DirectedEdge::new(HUB, a), DirectedEdge::new(a, HUB)];
    for (u, v) in graph.anomaly_edges() {
        edges.push(DirectedEdge::new(u.clone(), v.clone()));
        edges.push(DirectedEdge::new(v.clone(), u.clone()));
    }
    edges
}

/// Square unitary over a [`StateSpace`]; `U(ε)` or its limit `U₀` (ε = 0).
#[derive(Debug, Clone)]
pub struct WalkUnitary {
    matrix: DMatrix<Complex64>,
    epsilon: f64,
    phase: f64,
    space: Arc<StateSpace>,
    unitarity_check: f64,
}

impl WalkUnitary {
    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn phase(&self) -> f64 {
        self.phase
    }

    pub fn space(&self) -> &Arc<StateSpace> {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_limit(&self) -> bool {
        self.epsilon == 0.0
    }

    /// Deviation measured at assembly: local scattering blocks, column
    /// norms and norm preservation on probe vectors.
    pub fn unitarity_check(&self) -> f64 {
        self.unitarity_check
    }

    /// Exact `‖U†U − I‖_max`. Cubic in the dimension.
    pub fn unitarity_defect(&self) -> f64 {
        unitarity_defect(&self.matrix)
    }

    pub fn apply(&self, v: &DVector<Complex64>) -> DVector<Complex64> {
        &self.matrix * v
    }

    fn finish(
        matrix: DMatrix<Complex64>,
        epsilon: f64,
        phase: f64,
        space: StateSpace,
        local_defect: f64,
    ) -> Result<Self> {
        let check = local_defect.max(global_check(&matrix));
        if check.is_nan() || check >= UNITARITY_TOL {
            return Err(Error::NonUnitaryResult(check));
        }
        Ok(Self {
            matrix,
            epsilon,
            phase,
            space: Arc::new(space),
            unitarity_check: check,
        })
    }
}

fn global_check(m: &DMatrix<Complex64>) -> f64 {
    let mut worst = 0.0f64;
    for col in m.column_iter() {
        worst = worst.max((col.norm_squared() - 1.0).abs());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for _ in 0..2 {
        let x = DVector::from_fn(m.ncols(), |_, _| {
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let x = x.normalize();
        worst = worst.max(((m * &x).norm_squared() - 1.0).abs());
    }
    worst
}

/// `-I + sJ` is unitary iff `s(sd - 2) = 0`; this is the max entry of
/// `C†C − I` for such a coin.
fn rank_one_coin_defect(s: f64, d: usize) -> f64 {
    (s * (s * d as f64 - 2.0)).abs()
}

/// Fill the columns of states entering vertices of `G`.
fn fill_anomaly(
    graph: &StarGraph,
    phi: f64,
    matrix: &mut DMatrix<Complex64>,
    index: impl Fn(&str, &str) -> usize,
) -> f64 {
    let mut defect = 0.0f64;
    for v in graph.anomaly_vertices() {
        let nb = graph.neighbors_of(v);
        let local = graph.local_matrix(v, phi);
        defect = defect.max(unitarity_defect(&local));
        for (k, from) in nb.iter().enumerate() {
            let col = index(from, v);
            for (l, to) in nb.iter().enumerate() {
                matrix[(index(v, to), col)] = local[(l, k)];
            }
        }
    }
    defect
}

#[derive(Debug, Clone, Copy)]
enum Hub {
    Finite(f64),
    Limit,
}

fn check_basis(graph: &StarGraph, basis: &EdgeBasis) -> Result<()> {
    let expected = 2 * (graph.n_spokes() + graph.anomaly_edges().len());
    if basis.n_spokes() != graph.n_spokes()
        || basis.dim() != expected
        || basis.attachment_index() != graph.attachment_index()
    {
        return Err(Error::DimensionMismatch(format!(
            "basis of dimension {} does not belong to a graph with {} spokes (dimension {expected})",
            basis.dim(),
            graph.n_spokes()
        )));
    }
    Ok(())
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon <= 0.5) {
        return Err(Error::InvalidArgument(format!(
            "epsilon = {epsilon} outside (0, 1/2]"
        )));
    }
    Ok(())
}

fn build_edges(graph: &StarGraph, basis: &EdgeBasis, hub: Hub, phi: f64) -> Result<WalkUnitary> {
    check_basis(graph, basis)?;
    let n = basis.n_spokes();
    let a = basis.attachment_index();
    let dim = basis.dim();
    let mut m = DMatrix::from_element(dim, dim, ZERO);
    let mut defect = 0.0f64;

    match hub {
        Hub::Finite(eps) => {
            let t = 2.0 * eps;
            for j in 1..=n {
                let col = basis.hub_in(j);
                for k in 1..=n {
                    m[(basis.hub_out(k), col)] = Complex64::new(if k == j { t - 1.0 } else { t }, 0.0);
                }
            }
            defect = defect.max(rank_one_coin_defect(t, n));
        }
        Hub::Limit => {
            // Grover coin over the N-1 left spokes, hard wall on spoke a.
            let d = n - 1;
            let t = 2.0 / d as f64;
            for j in (1..=n).filter(|&j| j != a) {
                let col = basis.hub_in(j);
                for k in (1..=n).filter(|&k| k != a) {
                    m[(basis.hub_out(k), col)] = Complex64::new(if k == j { t - 1.0 } else { t }, 0.0);
                }
            }
            m[(basis.hub_out(a), basis.hub_in(a))] = -ONE;
            defect = defect.max(rank_one_coin_defect(t, d));
        }
    }

    let leaf = Complex64::from_polar(1.0, phi);
    for j in (1..=n).filter(|&j| j != a) {
        m[(basis.hub_in(j), basis.hub_out(j))] = leaf;
    }

    let lookup = |u: &str, v: &str| {
        basis
            .index_of(u, v)
            .expect("anomaly edge present in basis")
    };
    defect = defect.max(fill_anomaly(graph, phi, &mut m, lookup));

    let epsilon = match hub {
        Hub::Finite(eps) => eps,
        Hub::Limit => 0.0,
    };
    WalkUnitary::finish(m, epsilon, phi, StateSpace::edges(basis), defect)
}

/// `U(ε)` on the full edge basis; `epsilon` must equal `1/N`.
pub fn build_step_operator(
    graph: &StarGraph,
    basis: &EdgeBasis,
    epsilon: f64,
    phi: f64,
) -> Result<WalkUnitary> {
    let n = graph.n_spokes() as f64;
    if (epsilon * n - 1.0).abs() > 1e-12 {
        return Err(Error::DimensionMismatch(format!(
            "epsilon = {epsilon} but the graph has {n} spokes"
        )));
    }
    build_edges(graph, basis, Hub::Finite(epsilon), phi)
}

/// `U₀` on the full edge basis: left and right sides decoupled at the hub.
pub fn build_limit_operator(graph: &StarGraph, basis: &EdgeBasis, phi: f64) -> Result<WalkUnitary> {
    build_edges(graph, basis, Hub::Limit, phi)
}

fn build_collective(graph: &StarGraph, hub: Hub, phi: f64) -> Result<WalkUnitary> {
    let space = StateSpace::collective(graph);
    let dim = space.dim();
    let edges = right_edges(graph);
    let (vin, vout, aout, ain) = (0, 1, space.attach_out(), space.attach_in());
    let mut m = DMatrix::from_element(dim, dim, ZERO);

    let (keep, leak) = match hub {
        Hub::Finite(eps) => (1.0 - 2.0 * eps, 2.0 * (eps - eps * eps).sqrt()),
        Hub::Limit => (1.0, 0.0),
    };
    m[(vout, vin)] = Complex64::new(keep, 0.0);
    m[(aout, vin)] = Complex64::new(leak, 0.0);
    m[(aout, ain)] = Complex64::new(-keep, 0.0);
    m[(vout, ain)] = Complex64::new(leak, 0.0);
    let hub_block = DMatrix::from_row_slice(2, 2, &[m[(vout, vin)], m[(vout, ain)], m[(aout, vin)], m[(aout, ain)]]);
    let mut defect = unitarity_defect(&hub_block);

    m[(vin, vout)] = Complex64::from_polar(1.0, phi);

    let lookup = |u: &str, v: &str| {
        2 + edges
            .iter()
            .position(|e| e.tail == u && e.head == v)
            .expect("right-side edge present")
    };
    defect = defect.max(fill_anomaly(graph, phi, &mut m, lookup));

    let epsilon = match hub {
        Hub::Finite(eps) => eps,
        Hub::Limit => 0.0,
    };
    WalkUnitary::finish(m, epsilon, phi, space, defect)
}

/// `U(ε)` restricted to the collective subspace; any `ε ∈ (0, 1/2]`.
pub fn build_collective_step_operator(graph: &StarGraph, epsilon: f64, phi: f64) -> Result<WalkUnitary> {
    check_epsilon(epsilon)?;
    build_collective(graph, Hub::Finite(epsilon), phi)
}

/// `U₀` restricted to the collective subspace.
pub fn build_collective_limit_operator(graph: &StarGraph, phi: f64) -> Result<WalkUnitary> {
    build_collective(graph, Hub::Limit, phi)
}

/// `U₁ = U(ε) − U₀`.
pub fn build_perturbation(u: &WalkUnitary, u0: &WalkUnitary) -> Result<DMatrix<Complex64>> {
    if !(Arc::ptr_eq(&u.space, &u0.space) || u.space == u0.space) {
        return Err(Error::BasisMismatch("operators use different state spaces".into()));
    }
    if u.phase != u0.phase {
        return Err(Error::BasisMismatch(format!(
            "leaf phases differ: {} vs {}",
            u.phase, u0.phase
        )));
    }
    if u.is_limit() || !u0.is_limit() {
        return Err(Error::BasisMismatch(
            "expected a finite-epsilon operator and a limit operator".into(),
        ));
    }
    Ok(&u.matrix - &u0.matrix)
}

/// Embed a collective-space vector into the full edge basis of `basis`.
pub fn lift_collective(
    graph: &StarGraph,
    basis: &EdgeBasis,
    v: &DVector<Complex64>,
) -> Result<DVector<Complex64>> {
    let edges = right_edges(graph);
    if v.len() != 2 + edges.len() {
        return Err(Error::DimensionMismatch(format!(
            "collective vector has length {}, expected {}",
            v.len(),
            2 + edges.len()
        )));
    }
    check_basis(graph, basis)?;
    let space = StateSpace::edges(basis);
    let mut out = space.in_state() * v[0] + space.out_state() * v[1];
    for (k, e) in edges.iter().enumerate() {
        let i = basis.index_of(&e.tail, &e.head).expect("right edge in basis");
        out[i] = v[2 + k];
    }
    Ok(out)
}

/// Write nonzero entries as `row,col,re,im` CSV.
pub fn write_matrix_csv<W: Write>(u: &WalkUnitary, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["row", "col", "re", "im"])?;
    for j in 0..u.dim() {
        for i in 0..u.dim() {
            let z = u.matrix[(i, j)];
            if z != ZERO {
                w.serialize((i, j, z.re, z.im))?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
