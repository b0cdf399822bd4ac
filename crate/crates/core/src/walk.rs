//! Initial state, time evolution, success probability and the
//! measure-and-repeat search.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{DirectedEdge, EdgeBasis, Side, StarGraph, HUB};
use crate::operator::{build_step_operator, WalkUnitary};
use crate::spectral::{analyze, Branch, ClassifyOptions};

#[derive(Debug, Clone, PartialEq)]
pub struct WalkState {
    pub amplitudes: DVector<Complex64>,
    /// Number of applications of `U` so far.
    pub step: usize,
}

impl WalkState {
    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|z| z.norm_sqr()).collect()
    }
}

/// `Σ_j (α|0,j⟩ + β|j,0⟩)` over all `N` spokes with `α = 1`,
/// `β = ±e^{iφ/2}`, normalized.
pub fn initial_state(basis: &EdgeBasis, n: usize, phi: f64, branch: Branch) -> Result<WalkState> {
    if n != basis.n_spokes() {
        return Err(Error::DimensionMismatch(format!(
            "{n} spokes requested, basis has {}",
            basis.n_spokes()
        )));
    }
    let norm = 1.0 / ((2 * n) as f64).sqrt();
    let alpha = Complex64::new(norm, 0.0);
    let beta = branch.left_eigenvalue(phi) * norm;
    let mut amplitudes = DVector::zeros(basis.dim());
    for j in 1..=n {
        amplitudes[basis.hub_out(j)] = alpha;
        amplitudes[basis.hub_in(j)] = beta;
    }
    Ok(WalkState { amplitudes, step: 0 })
}

/// `round(π√N / (2c))`, at least 1.
pub fn optimal_step_count(c: f64, n: usize) -> Result<usize> {
    if c.is_nan() || c <= 0.0 || !c.is_finite() {
        return Err(Error::ZeroCoupling);
    }
    if n < 2 {
        return Err(Error::NTooSmall(n));
    }
    Ok(((PI * (n as f64).sqrt() / (2.0 * c)).round() as usize).max(1))
}

/// One row of a trajectory dump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub step: usize,
    pub success_probability: f64,
    pub left_probability: f64,
    pub right_probability: f64,
}

fn check_state(u: &WalkUnitary, state: &WalkState) -> Result<()> {
    if state.amplitudes.len() != u.dim() {
        return Err(Error::BasisMismatch(format!(
            "state of length {} for an operator of dimension {}",
            state.amplitudes.len(),
            u.dim()
        )));
    }
    Ok(())
}

/// Apply `U` exactly `m` times.
pub fn evolve(u: &WalkUnitary, state: &WalkState, m: usize) -> Result<WalkState> {
    evolve_observed(u, state, m, |_| {})
}

/// Evolve and record the probabilities after every step, starting with the
/// input state.
pub fn evolve_with_trajectory(
    u: &WalkUnitary,
    basis: &EdgeBasis,
    state: &WalkState,
    m: usize,
) -> Result<(WalkState, Vec<TrajectoryPoint>)> {
    if basis.dim() != u.dim() {
        return Err(Error::BasisMismatch("operator and basis disagree in dimension".into()));
    }
    let mut points = Vec::with_capacity(m + 1);
    let last = evolve_observed(u, state, m, |s| points.push(trajectory_point(s, basis)))?;
    Ok((last, points))
}

fn evolve_observed(
    u: &WalkUnitary,
    state: &WalkState,
    m: usize,
    mut observe: impl FnMut(&WalkState),
) -> Result<WalkState> {
    check_state(u, state)?;
    let mut cur = state.clone();
    let mut next = DVector::zeros(u.dim());
    observe(&cur);
    for _ in 0..m {
        u.matrix().mul_to(&cur.amplitudes, &mut next);
        std::mem::swap(&mut cur.amplitudes, &mut next);
        cur.step += 1;
        observe(&cur);
    }
    Ok(cur)
}

fn trajectory_point(state: &WalkState, basis: &EdgeBasis) -> TrajectoryPoint {
    TrajectoryPoint {
        step: state.step,
        success_probability: success_probability(state, basis),
        left_probability: side_probability(state, basis, Side::Left),
        right_probability: side_probability(state, basis, Side::Right),
    }
}

/// `|⟨0,a|ψ⟩|² + |⟨a,0|ψ⟩|²` for the attachment spoke `a`.
pub fn success_probability(state: &WalkState, basis: &EdgeBasis) -> f64 {
    let a = basis.attachment_index();
    state.amplitudes[basis.hub_out(a)].norm_sqr() + state.amplitudes[basis.hub_in(a)].norm_sqr()
}

pub fn side_probability(state: &WalkState, basis: &EdgeBasis, side: Side) -> f64 {
    state
        .amplitudes
        .iter()
        .zip(basis.sides())
        .filter(|(_, s)| **s == side)
        .map(|(z, _)| z.norm_sqr())
        .sum()
}

/// Step count in `1..=m_max` with the largest success probability; ties go
/// to the smaller count.
pub fn find_optimal_m(
    u: &WalkUnitary,
    psi: &WalkState,
    basis: &EdgeBasis,
    m_max: usize,
) -> Result<(usize, f64)> {
    if m_max == 0 {
        return Err(Error::InvalidArgument("m_max must be at least 1".into()));
    }
    if basis.dim() != u.dim() {
        return Err(Error::BasisMismatch("operator and basis disagree in dimension".into()));
    }
    let mut best = (0usize, f64::NEG_INFINITY);
    evolve_observed(u, psi, m_max, |s| {
        if s.step > psi.step {
            let p = success_probability(s, basis);
            if p > best.1 {
                best = (s.step - psi.step, p);
            }
        }
    })?;
    Ok(best)
}

/// Default horizon for [`find_optimal_m`]: one full period of the
/// success probability, so the first maximum is found and later revivals
/// of equal height are not.
pub fn default_m_max(c: f64, n: usize) -> Result<usize> {
    Ok(2 * optimal_step_count(c, n)?)
}

fn edge_distribution(state: &WalkState) -> Result<WeightedIndex<f64>> {
    WeightedIndex::new(state.probabilities())
        .map_err(|e| Error::InvalidArgument(format!("state cannot be sampled: {e}")))
}

/// Draw one edge with probability `|amplitude|²`.
pub fn sample_measurement(state: &WalkState, basis: &EdgeBasis, seed: u64) -> Result<DirectedEdge> {
    if basis.dim() != state.amplitudes.len() {
        return Err(Error::BasisMismatch("state and basis disagree in dimension".into()));
    }
    let dist = edge_distribution(state)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(basis.edge(dist.sample(&mut rng)).clone())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub measured_edge: DirectedEdge,
    pub found: bool,
    pub trials: usize,
    pub steps_per_trial: usize,
}

/// A spoke edge whose outer vertex has neighbors other than the hub.
pub fn marks_anomaly(graph: &StarGraph, edge: &DirectedEdge) -> bool {
    let outer = if edge.tail == HUB {
        &edge.head
    } else if edge.head == HUB {
        &edge.tail
    } else {
        return false;
    };
    graph.has_foreign_neighbors(outer)
}

/// Prepared search: the state after `steps` applications of `U(1/N)` is the
/// same in every trial, so it is computed once and only sampled per trial.
#[derive(Debug, Clone)]
pub struct SearchPlan {
    graph: StarGraph,
    basis: EdgeBasis,
    phi: f64,
    branch: Branch,
    steps: usize,
    initial: WalkState,
    final_state: WalkState,
    unitary: WalkUnitary,
}

impl SearchPlan {
    /// Search with an explicit number of steps per trial.
    pub fn with_steps(
        graph: &StarGraph,
        basis: &EdgeBasis,
        phi: f64,
        branch: Branch,
        steps: usize,
    ) -> Result<Self> {
        let n = graph.n_spokes();
        let unitary = build_step_operator(graph, basis, 1.0 / n as f64, phi)?;
        let initial = initial_state(basis, n, phi, branch)?;
        let final_state = evolve(&unitary, &initial, steps)?;
        Ok(Self {
            graph: graph.clone(),
            basis: basis.clone(),
            phi,
            branch,
            steps,
            initial,
            final_state,
            unitary,
        })
    }

    /// Search at the step count predicted from the matched pair on `branch`.
    pub fn new(graph: &StarGraph, basis: &EdgeBasis, phi: f64, branch: Branch) -> Result<Self> {
        let opts = ClassifyOptions {
            lambda0: Some(branch.left_eigenvalue(phi)),
            ..ClassifyOptions::default()
        };
        let classification = analyze(graph, phi, &opts)?;
        let steps = optimal_step_count(classification.c, graph.n_spokes())?;
        Self::with_steps(graph, basis, phi, branch, steps)
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn branch(&self) -> Branch {
        self.branch
    }

    pub fn unitary(&self) -> &WalkUnitary {
        &self.unitary
    }

    pub fn initial_state(&self) -> &WalkState {
        &self.initial
    }

    pub fn final_state(&self) -> &WalkState {
        &self.final_state
    }

    pub fn success_probability(&self) -> f64 {
        success_probability(&self.final_state, &self.basis)
    }

    pub fn trajectory(&self) -> Result<Vec<TrajectoryPoint>> {
        Ok(evolve_with_trajectory(&self.unitary, &self.basis, &self.initial, self.steps)?.1)
    }

    /// Repeat prepare-evolve-measure until an anomaly edge is seen.
    pub fn run(&self, seed: u64, max_trials: usize) -> Result<SearchOutcome> {
        let dist = edge_distribution(&self.final_state)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for trial in 1..=max_trials {
            let edge = self.basis.edge(dist.sample(&mut rng));
            if marks_anomaly(&self.graph, edge) {
                return Ok(SearchOutcome {
                    measured_edge: edge.clone(),
                    found: true,
                    trials: trial,
                    steps_per_trial: self.steps,
                });
            }
        }
        Err(Error::TrialsExhausted { trials: max_trials })
    }
}

/// Build a plan on `branch` and run it.
pub fn search_until_found(
    graph: &StarGraph,
    basis: &EdgeBasis,
    phi: f64,
    branch: Branch,
    seed: u64,
    max_trials: usize,
) -> Result<SearchOutcome> {
    SearchPlan::new(graph, basis, phi, branch)?.run(seed, max_trials)
}

pub fn write_trajectory_csv<W: Write>(points: &[TrajectoryPoint], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for p in points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, AnomalyGraphSpec};

    #[test]
    fn step_count_examples() {
        assert_eq!(optimal_step_count(1.0, 100).unwrap(), 16);
        assert_eq!(optimal_step_count(2.0 / 7f64.sqrt(), 64).unwrap(), 17);
        assert_eq!(optimal_step_count(100.0, 2).unwrap(), 1);
        assert!(matches!(optimal_step_count(0.0, 100), Err(Error::ZeroCoupling)));
    }

    #[test]
    fn initial_state_signs() {
        let (_, b) = build_graph(&AnomalyGraphSpec::triangle(8)).unwrap();
        let s = initial_state(&b, 8, 2.0 * PI, Branch::Plus).unwrap();
        assert!((s.norm() - 1.0).abs() < 1e-12);
        for j in 1..=8 {
            assert!((s.amplitudes[b.hub_out(j)] + s.amplitudes[b.hub_in(j)]).norm() < 1e-15);
        }
        let s = initial_state(&b, 8, 0.0, Branch::Plus).unwrap();
        assert!((s.amplitudes[b.hub_out(3)] - s.amplitudes[b.hub_in(3)]).norm() < 1e-15);
        assert!((success_probability(&s, &b) - 1.0 / 8.0).abs() < 1e-15);
    }

    #[test]
    fn point_mass_is_always_measured() {
        let (_, b) = build_graph(&AnomalyGraphSpec::triangle(4)).unwrap();
        let mut amplitudes = DVector::zeros(b.dim());
        amplitudes[b.hub_out(1)] = Complex64::new(0.0, 1.0);
        let s = WalkState { amplitudes, step: 0 };
        for seed in 0..20 {
            assert_eq!(sample_measurement(&s, &b, seed).unwrap(), DirectedEdge::new("0", "1"));
        }
    }

    #[test]
    fn trajectory_csv_header() {
        let points = [TrajectoryPoint {
            step: 0,
            success_probability: 0.25,
            left_probability: 0.5,
            right_probability: 0.5,
        }];
        let mut out = Vec::new();
        write_trajectory_csv(&points, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(
            text.lines().next(),
            Some("step,success_probability,left_probability,right_probability")
        );
    }
}
