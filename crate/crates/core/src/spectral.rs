//! Spectrum of the decoupled operator `U₀`, left/right and bound/active
//! labelling, phase tuning, and the search parameters `λ₀, δ, γ, c`.

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2, TAU};
use std::fmt;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, TuningSuggestion};
use crate::graph::{Side, StarGraph};
use crate::linalg::{self, arg_2pi, cluster, fit_line, gram_schmidt};
use crate::operator::{
    build_collective_limit_operator, build_collective_step_operator, Representation,
    StateSpace, WalkUnitary,
};

/// Threshold on the hub-contact amplitude separating bound from active.
pub const ACTIVITY_TOL: f64 = 1e-8;
/// Two `U₀` eigenvalues closer than this are the same eigenvalue.
pub const MATCHING_TOL: f64 = 1e-9;
/// Guard for the excluded case `e^{iφ} + λ₀² = 0`.
pub const DEGENERACY_TOL: f64 = 1e-6;
/// Eigenvalues closer than this are treated as one degenerate cluster when
/// rotating eigenspaces.
pub const CLUSTER_TOL: f64 = 1e-8;

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone)]
pub struct Eigenpair {
    pub value: Complex64,
    pub vector: DVector<Complex64>,
}

/// Which left eigenvalue the search targets: `+e^{iφ/2}` or `-e^{iφ/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Branch {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }

    /// Left eigenvalue `±e^{iφ/2}` of this branch.
    pub fn left_eigenvalue(self, phi: f64) -> Complex64 {
        Complex64::from_polar(1.0, phi / 2.0) * self.sign()
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Branch::Plus => "+",
            Branch::Minus => "-",
        })
    }
}

impl std::str::FromStr for Branch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "+" | "plus" => Ok(Branch::Plus),
            "-" | "minus" => Ok(Branch::Minus),
            other => Err(Error::InvalidArgument(format!("branch must be + or -, got {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseCandidate {
    pub phi: f64,
    pub branch: Branch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SideLabel {
    Left,
    Right,
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activity {
    Bound,
    Active,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenLabel {
    pub side: SideLabel,
    pub activity: Activity,
    /// Hub-contact amplitude.
    pub contact: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifyOptions {
    pub activity_tol: f64,
    pub matching_tol: f64,
    pub degeneracy_tol: f64,
    /// Pick this `λ₀` when several eigenvalues match.
    pub lambda0: Option<Complex64>,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self {
            activity_tol: ACTIVITY_TOL,
            matching_tol: MATCHING_TOL,
            degeneracy_tol: DEGENERACY_TOL,
            lambda0: None,
        }
    }
}

/// Eigenpairs of `U₀` with side and activity labels, before any matching.
#[derive(Debug, Clone)]
pub struct LabeledSpectrum {
    pub phi: f64,
    pub representation: Representation,
    pub eigenpairs: Vec<Eigenpair>,
    pub labels: Vec<EigenLabel>,
    /// Largest `‖U(ε)v − λv‖` over bound eigenvectors.
    pub bound_residual: f64,
}

impl LabeledSpectrum {
    pub fn active_indices(&self, side: SideLabel) -> impl Iterator<Item = usize> + '_ {
        self.labels
            .iter()
            .enumerate()
            .filter(move |(_, l)| l.side == side && l.activity == Activity::Active)
            .map(|(i, _)| i)
    }

    pub fn active_eigenvalues(&self, side: SideLabel) -> Vec<Complex64> {
        self.active_indices(side)
            .map(|i| self.eigenpairs[i].value)
            .collect()
    }

    pub fn bound_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, l)| l.activity == Activity::Bound)
            .map(|(i, _)| i)
    }
}

/// Labelled spectrum plus the matched active pair `L₀, R₀`.
#[derive(Debug, Clone)]
pub struct SpectralClassification {
    pub spectrum: LabeledSpectrum,
    pub lambda0: Complex64,
    pub branch: Branch,
    pub l0_index: usize,
    pub r0_index: usize,
    /// Phase fixed so that `⟨out|L₀⟩` is real and positive.
    pub l0: DVector<Complex64>,
    pub r0: DVector<Complex64>,
    /// `⟨0,a|R₀⟩`
    pub delta: Complex64,
    /// `⟨a,0|R₀⟩`
    pub gamma: Complex64,
    pub c: f64,
    /// `|γ + λ₀δ|`
    pub relation_residual: f64,
}

impl SpectralClassification {
    /// Probability of finding `R₀` on the attachment edge.
    pub fn attachment_probability(&self) -> f64 {
        self.delta.norm_sqr() + self.gamma.norm_sqr()
    }

    pub fn report(&self) -> SpectralReport {
        let mut report = SpectralReport::from_spectrum(&self.spectrum);
        report.lambda0 = Some(self.lambda0);
        report.branch = Some(self.branch);
        report.delta = Some(self.delta);
        report.gamma = Some(self.gamma);
        report.c = Some(self.c);
        report.p_target = Some(self.attachment_probability());
        report.relation_residual = Some(self.relation_residual);
        report
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenpairReport {
    pub eigenvalue: Complex64,
    pub side: SideLabel,
    pub activity: Activity,
    pub contact: f64,
}

/// Serializable summary of a (possibly unmatched) classification.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralReport {
    pub representation: Representation,
    pub phi: f64,
    pub lambda0: Option<Complex64>,
    pub branch: Option<Branch>,
    pub delta: Option<Complex64>,
    pub gamma: Option<Complex64>,
    pub c: Option<f64>,
    pub p_target: Option<f64>,
    pub relation_residual: Option<f64>,
    pub bound_residual: f64,
    pub eigenpairs: Vec<EigenpairReport>,
}

impl SpectralReport {
    pub fn from_spectrum(spectrum: &LabeledSpectrum) -> Self {
        Self {
            representation: spectrum.representation,
            phi: spectrum.phi,
            lambda0: None,
            branch: None,
            delta: None,
            gamma: None,
            c: None,
            p_target: None,
            relation_residual: None,
            bound_residual: spectrum.bound_residual,
            eigenpairs: spectrum
                .eigenpairs
                .iter()
                .zip(&spectrum.labels)
                .map(|(p, l)| EigenpairReport {
                    eigenvalue: p.value,
                    side: l.side,
                    activity: l.activity,
                    contact: l.contact,
                })
                .collect(),
        }
    }
}

/// Full eigendecomposition of a walk operator.
pub fn compute_spectrum(u: &WalkUnitary) -> Result<Vec<Eigenpair>> {
    Ok(linalg::eigen_normal(u.matrix())?
        .into_iter()
        .map(|(value, vector)| Eigenpair { value, vector })
        .collect())
}

fn side_label(space: &StateSpace, v: &DVector<Complex64>) -> SideLabel {
    let left = space.side_weight(v, Side::Left);
    let right = space.side_weight(v, Side::Right);
    const SUPPORT_TOL: f64 = 1e-20;
    if right <= SUPPORT_TOL {
        SideLabel::Left
    } else if left <= SUPPORT_TOL {
        SideLabel::Right
    } else {
        SideLabel::Mixed
    }
}

fn contact(space: &StateSpace, v: &DVector<Complex64>, side: SideLabel) -> f64 {
    match side {
        SideLabel::Left => space.contact_amplitude(v, Side::Left),
        SideLabel::Right => space.contact_amplitude(v, Side::Right),
        SideLabel::Mixed => space
            .contact_amplitude(v, Side::Left)
            .hypot(space.contact_amplitude(v, Side::Right)),
    }
}

/// Rotate a degenerate cluster so the hub contact is carried by as few
/// vectors as possible; the contact-carrying vectors come first.
fn rotate_cluster(
    space: &StateSpace,
    vectors: &[DVector<Complex64>],
    side: SideLabel,
    activity_tol: f64,
) -> Vec<DVector<Complex64>> {
    let k = vectors.len();
    let coords: Vec<[Complex64; 2]> = vectors
        .iter()
        .map(|v| match side {
            SideLabel::Left => space.contact_coordinates(v, Side::Left),
            SideLabel::Right | SideLabel::Mixed => space.contact_coordinates(v, Side::Right),
        })
        .collect();
    // Rows of the 2×k contact matrix C, conjugated, span the coefficient
    // directions that carry contact; their complement lies in ker C.
    let mut candidates: Vec<DVector<Complex64>> = (0..2)
        .map(|r| DVector::from_fn(k, |i, _| coords[i][r].conj()))
        .collect();
    if side == SideLabel::Mixed {
        let left: Vec<[Complex64; 2]> = vectors
            .iter()
            .map(|v| space.contact_coordinates(v, Side::Left))
            .collect();
        candidates.extend((0..2).map(|r| DVector::from_fn(k, |i, _| left[i][r].conj())));
    }
    candidates.extend((0..k).map(|i| {
        let mut e = DVector::zeros(k);
        e[i] = Complex64::new(1.0, 0.0);
        e
    }));
    let n_contact = candidates.len() - k;
    let mut basis = gram_schmidt(candidates.drain(..n_contact), activity_tol, k);
    basis = gram_schmidt(basis.into_iter().chain(candidates), 1e-6, k);
    basis
        .iter()
        .map(|y| {
            let mut v = DVector::zeros(vectors[0].len());
            for (i, vec) in vectors.iter().enumerate() {
                v += vec * y[i];
            }
            linalg::fix_global_phase(v.normalize())
        })
        .collect()
}

/// Label eigenpairs of `U₀` by side and hub contact, rotating degenerate
/// eigenspaces, and measure how far bound vectors move under `u`.
pub fn label_spectrum(
    eigenpairs: Vec<Eigenpair>,
    space: &StateSpace,
    u: &WalkUnitary,
    activity_tol: f64,
) -> Result<LabeledSpectrum> {
    if u.dim() != space.dim() || eigenpairs.iter().any(|p| p.vector.len() != space.dim()) {
        return Err(Error::BasisMismatch(format!(
            "eigenvectors, basis ({}) and operator ({}) disagree in dimension",
            space.dim(),
            u.dim()
        )));
    }

    let sides: Vec<SideLabel> = eigenpairs.iter().map(|p| side_label(space, &p.vector)).collect();
    let mut pairs: Vec<Eigenpair> = Vec::with_capacity(eigenpairs.len());
    let mut labels = Vec::with_capacity(eigenpairs.len());
    for side in [SideLabel::Left, SideLabel::Right, SideLabel::Mixed] {
        let members: Vec<usize> = (0..eigenpairs.len()).filter(|&i| sides[i] == side).collect();
        let values: Vec<Complex64> = members.iter().map(|&i| eigenpairs[i].value).collect();
        for group in cluster(&values, CLUSTER_TOL) {
            let idx: Vec<usize> = group.iter().map(|&g| members[g]).collect();
            let value = idx.iter().map(|&i| eigenpairs[i].value).sum::<Complex64>() / idx.len() as f64;
            let vectors: Vec<DVector<Complex64>> =
                idx.iter().map(|&i| eigenpairs[i].vector.clone()).collect();
            let rotated = if idx.len() > 1 {
                rotate_cluster(space, &vectors, side, activity_tol)
            } else {
                vectors
            };
            for (slot, v) in idx.iter().zip(rotated) {
                let value = if idx.len() > 1 { value } else { eigenpairs[*slot].value };
                let amount = contact(space, &v, side);
                let activity = if amount >= activity_tol {
                    Activity::Active
                } else {
                    Activity::Bound
                };
                labels.push(EigenLabel {
                    side,
                    activity,
                    contact: amount,
                });
                pairs.push(Eigenpair { value, vector: v });
            }
        }
    }

    let bound_residual = pairs
        .iter()
        .zip(&labels)
        .filter(|(_, l)| l.activity == Activity::Bound)
        .map(|(p, _)| (u.apply(&p.vector) - &p.vector * p.value).norm())
        .fold(0.0, f64::max);

    Ok(LabeledSpectrum {
        phi: u.phase(),
        representation: space.representation(),
        eigenpairs: pairs,
        labels,
        bound_residual,
    })
}

/// `|e^{iφ} + λ²|`
pub fn phase_degeneracy(phi: f64, lambda: Complex64) -> f64 {
    (Complex64::from_polar(1.0, phi) + lambda * lambda).norm()
}

/// Label the spectrum and pick the matched active pair `L₀, R₀`.
pub fn classify_spectrum(
    eigenpairs: Vec<Eigenpair>,
    space: &StateSpace,
    u: &WalkUnitary,
    opts: &ClassifyOptions,
) -> Result<SpectralClassification> {
    let spectrum = label_spectrum(eigenpairs, space, u, opts.activity_tol)?;
    select_match(spectrum, space, opts)
}

pub(crate) fn select_match(
    spectrum: LabeledSpectrum,
    space: &StateSpace,
    opts: &ClassifyOptions,
) -> Result<SpectralClassification> {
    let phi = spectrum.phi;
    let left: Vec<usize> = spectrum.active_indices(SideLabel::Left).collect();
    let right: Vec<usize> = spectrum.active_indices(SideLabel::Right).collect();
    let value = |i: usize| spectrum.eigenpairs[i].value;

    let mut matches: Vec<(usize, usize)> = Vec::new();
    for &r in &right {
        for &l in &left {
            if (value(l) - value(r)).norm() < opts.matching_tol {
                matches.push((l, r));
            }
        }
    }
    if let Some(wanted) = opts.lambda0 {
        matches.retain(|&(_, r)| (value(r) - wanted).norm() < 1e-6);
    }

    if matches.is_empty() {
        if let Some(&r) = right
            .iter()
            .find(|&&r| phase_degeneracy(phi, value(r)) <= opts.degeneracy_tol)
        {
            return Err(Error::PhaseDegeneracy {
                lambda: value(r),
                value: phase_degeneracy(phi, value(r)),
            });
        }
        let suggestions = right
            .iter()
            .map(|&r| TuningSuggestion {
                lambda: value(r),
                candidates: tune_phase(value(r)),
            })
            .collect();
        return Err(Error::NoMatch { suggestions });
    }

    let distinct = cluster(
        &matches.iter().map(|&(_, r)| value(r)).collect::<Vec<_>>(),
        opts.matching_tol,
    );
    if distinct.len() > 1 {
        return Err(Error::AmbiguousMatch {
            candidates: distinct.iter().map(|g| value(matches[g[0]].1)).collect(),
        });
    }
    if matches.len() > 1 {
        return Err(Error::InvalidArgument(format!(
            "{} active eigenvectors share the matched eigenvalue; at most one per side expected",
            matches.len()
        )));
    }

    let (l0_index, r0_index) = matches[0];
    let lambda0 = value(r0_index);
    let degeneracy = phase_degeneracy(phi, lambda0);
    if degeneracy <= opts.degeneracy_tol {
        return Err(Error::PhaseDegeneracy {
            lambda: lambda0,
            value: degeneracy,
        });
    }
    let branch = if (Branch::Plus.left_eigenvalue(phi) - lambda0).norm()
        <= (Branch::Minus.left_eigenvalue(phi) - lambda0).norm()
    {
        Branch::Plus
    } else {
        Branch::Minus
    };

    let l0 = {
        let v = &spectrum.eigenpairs[l0_index].vector;
        let out = space.out_state().dotc(v);
        v * (out.conj() / out.norm())
    };
    let r0 = spectrum.eigenpairs[r0_index].vector.clone();
    let delta = r0[space.attach_out()];
    let gamma = r0[space.attach_in()];

    Ok(SpectralClassification {
        lambda0,
        branch,
        l0_index,
        r0_index,
        l0,
        r0,
        delta,
        gamma,
        c: SQRT_2 * gamma.norm(),
        relation_residual: (gamma + lambda0 * delta).norm(),
        spectrum,
    })
}

/// Leaf phases in `[0, 4π)` that make a left eigenvalue equal `lambda0`.
pub fn tune_phase(lambda0: Complex64) -> Vec<PhaseCandidate> {
    let wrap = |phi: f64| if phi >= 2.0 * TAU { phi - 2.0 * TAU } else { phi };
    vec![
        PhaseCandidate {
            phi: wrap(2.0 * arg_2pi(lambda0)),
            branch: Branch::Plus,
        },
        PhaseCandidate {
            phi: wrap(2.0 * arg_2pi(-lambda0)),
            branch: Branch::Minus,
        },
    ]
}

/// Labelled collective `U₀` spectrum at `phi`; bound vectors are checked
/// against `U(1/N)` of the graph.
pub fn label_graph(graph: &StarGraph, phi: f64, activity_tol: f64) -> Result<LabeledSpectrum> {
    let u0 = build_collective_limit_operator(graph, phi)?;
    let u = build_collective_step_operator(graph, 1.0 / graph.n_spokes() as f64, phi)?;
    let pairs = compute_spectrum(&u0)?;
    label_spectrum(pairs, u0.space(), &u, activity_tol)
}

/// Classify the collective `U₀` of `graph` at leaf phase `phi`.
pub fn analyze(graph: &StarGraph, phi: f64, opts: &ClassifyOptions) -> Result<SpectralClassification> {
    let u0 = build_collective_limit_operator(graph, phi)?;
    let spectrum = label_graph(graph, phi, opts.activity_tol)?;
    select_match(spectrum, u0.space(), opts)
}

/// Choose `φ` from the right spectrum: the unique right active eigenvalue,
/// or the one nearest `lambda0` when given.
pub fn auto_phase(graph: &StarGraph, lambda0: Option<Complex64>, branch: Branch) -> Result<f64> {
    let spectrum = label_graph(graph, graph.spec().leaf_phase, ACTIVITY_TOL)?;
    let right = spectrum.active_eigenvalues(SideLabel::Right);
    let distinct: Vec<Complex64> = cluster(&right, MATCHING_TOL)
        .into_iter()
        .map(|g| right[g[0]])
        .collect();
    let target = match (lambda0, distinct.as_slice()) {
        (Some(wanted), _) => *distinct
            .iter()
            .filter(|z| (**z - wanted).norm() < 1e-6)
            .min_by(|a, b| (**a - wanted).norm().total_cmp(&(**b - wanted).norm()))
            .ok_or_else(|| Error::NoMatch {
                suggestions: distinct
                    .iter()
                    .map(|&z| TuningSuggestion {
                        lambda: z,
                        candidates: tune_phase(z),
                    })
                    .collect(),
            })?,
        (None, [only]) => *only,
        (None, []) => return Err(Error::NoMatch { suggestions: Vec::new() }),
        (None, many) => {
            return Err(Error::AmbiguousMatch {
                candidates: many.to_vec(),
            })
        }
    };
    Ok(tune_phase(target)
        .into_iter()
        .find(|c| c.branch == branch)
        .expect("both branches returned")
        .phi)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CouplingEstimate {
    pub c: f64,
    pub fit_residual: f64,
    /// `(ε, |⟨R₀|U(ε)|L₀⟩|/√ε)`
    pub samples: Vec<(f64, f64)>,
}

/// `c = lim_{ε→0} |⟨R₀|U(ε)|L₀⟩|/√ε`, extrapolated linearly in `ε`.
/// `L₀, R₀` live in the collective space of `graph`.
pub fn coupling_constant_limit(
    graph: &StarGraph,
    phi: f64,
    l0: &DVector<Complex64>,
    r0: &DVector<Complex64>,
    eps_list: &[f64],
) -> Result<CouplingEstimate> {
    if eps_list.len() < 2 {
        return Err(Error::InvalidArgument("need at least two epsilon values".into()));
    }
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidArgument("epsilon list must be strictly decreasing".into()));
    }
    let mut samples = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let u = build_collective_step_operator(graph, eps, phi)?;
        if l0.len() != u.dim() || r0.len() != u.dim() {
            return Err(Error::DimensionMismatch(format!(
                "vectors of length {} for a collective space of dimension {}",
                l0.len(),
                u.dim()
            )));
        }
        samples.push((eps, r0.dotc(&u.apply(l0)).norm() / eps.sqrt()));
    }
    let x: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let y: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let fit = fit_line(&x, &y);
    if y.iter().all(|v| *v < 1e-10) || fit.intercept < 1e-8 {
        return Err(Error::FitDivergence(
            "overlap vanishes; the vectors are not coupled through the hub".into(),
        ));
    }
    if fit.max_residual > 1e-2 * fit.intercept {
        return Err(Error::FitDivergence(format!(
            "residual {:.3e} against estimate {:.6}",
            fit.max_residual, fit.intercept
        )));
    }
    Ok(CouplingEstimate {
        c: fit.intercept,
        fit_residual: fit.max_residual,
        samples,
    })
}

#[derive(Debug, Clone)]
pub struct PairPrediction {
    pub lambda_plus: Complex64,
    pub lambda_minus: Complex64,
    pub v_plus: DVector<Complex64>,
    pub v_minus: DVector<Complex64>,
    pub split_magnitude: f64,
}

/// First-order degenerate perturbation theory in the `{L₀, R₀}` plane.
///
/// `l0` must carry the phase convention `⟨out|L₀⟩ > 0`, as produced by
/// [`classify_spectrum`]; the result does not depend on the phase of `r0`.
pub fn perturbative_pair_prediction(
    l0: &DVector<Complex64>,
    r0: &DVector<Complex64>,
    lambda0: Complex64,
    delta: Complex64,
    epsilon: f64,
) -> Result<PairPrediction> {
    if !(epsilon > 0.0 && epsilon <= 0.5) {
        return Err(Error::InvalidArgument(format!("epsilon = {epsilon} outside (0, 1/2]")));
    }
    if delta.norm() < 1e-12 {
        return Err(Error::ZeroDelta);
    }
    let rot = I * delta.norm() / delta;
    let v_plus = (l0 - r0 * rot) * Complex64::new(FRAC_1_SQRT_2, 0.0);
    let v_minus = (l0 + r0 * rot) * Complex64::new(FRAC_1_SQRT_2, 0.0);
    let split = SQRT_2 * delta.norm() * epsilon.sqrt();
    Ok(PairPrediction {
        lambda_plus: lambda0 * (Complex64::new(1.0, 0.0) + I * split),
        lambda_minus: lambda0 * (Complex64::new(1.0, 0.0) - I * split),
        v_plus,
        v_minus,
        split_magnitude: split,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn tune_phase_examples() {
        let minus_one = tune_phase(c(-1.0, 0.0));
        assert!((minus_one[0].phi - 2.0 * PI).abs() < 1e-12);
        assert_eq!(minus_one[0].branch, Branch::Plus);

        let one = tune_phase(c(1.0, 0.0));
        assert_eq!(one[0].phi, 0.0);
        assert!((one[1].phi - 2.0 * PI).abs() < 1e-12);

        let i = tune_phase(c(0.0, 1.0));
        assert!((i[0].phi - PI).abs() < 1e-12);
    }

    #[test]
    fn tuned_phase_reproduces_eigenvalue() {
        for k in 0..32 {
            let lambda = Complex64::from_polar(1.0, 0.2 * k as f64 - 3.0);
            for cand in tune_phase(lambda) {
                assert!((0.0..4.0 * PI).contains(&cand.phi));
                assert!((cand.branch.left_eigenvalue(cand.phi) - lambda).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn real_delta_prediction() {
        let l0 = DVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]);
        let r0 = DVector::from_vec(vec![c(0.0, 0.0), c(1.0, 0.0)]);
        let p = perturbative_pair_prediction(&l0, &r0, c(-1.0, 0.0), c(0.3, 0.0), 1e-4).unwrap();
        let s = FRAC_1_SQRT_2;
        assert!((p.v_plus[0] - c(s, 0.0)).norm() < 1e-15);
        assert!((p.v_plus[1] - c(0.0, -s)).norm() < 1e-15);
        assert!((p.v_minus[1] - c(0.0, s)).norm() < 1e-15);
        assert!(matches!(
            perturbative_pair_prediction(&l0, &r0, c(-1.0, 0.0), c(0.0, 0.0), 1e-4),
            Err(Error::ZeroDelta)
        ));
    }

    #[test]
    fn branch_parsing() {
        assert_eq!("+".parse::<Branch>().unwrap(), Branch::Plus);
        assert_eq!("minus".parse::<Branch>().unwrap(), Branch::Minus);
        assert!("x".parse::<Branch>().is_err());
    }
}
