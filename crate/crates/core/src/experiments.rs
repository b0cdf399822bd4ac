//! Batch studies: eigenvalue families of `U(ε)` near each eigenvalue of
//! `U₀`, the pairing and splitting checks, and the `√N` scaling scan.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::io::Write;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{build_graph, AnomalyGraphSpec, Side, StarGraph};
use crate::linalg::{cluster, fit_line};
use crate::operator::{build_collective_step_operator, build_step_operator};
use crate::spectral::{
    analyze, compute_spectrum, coupling_constant_limit, label_graph, perturbative_pair_prediction,
    select_match, tune_phase, Activity, Branch, ClassifyOptions, Eigenpair, LabeledSpectrum,
    SideLabel, ACTIVITY_TOL, CLUSTER_TOL,
};
use crate::walk::{find_optimal_m, initial_state, optimal_step_count};

/// A family member farther than this from `λ₀` at the smallest `ε` moves.
pub const MOVING_TOL: f64 = 1e-9;

/// `ε = 4^{-k}`, `k = 3..8`.
pub fn default_eps_list() -> Vec<f64> {
    (3..=8).map(|k| 4f64.powi(-k)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FamilyCase {
    Constant,
    LinearPhase,
    Paired,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenvalueFamilyFit {
    pub lambda0: Complex64,
    /// Multiplicity of `λ₀` in `U₀`.
    pub multiplicity: usize,
    pub family_case: FamilyCase,
    /// Rate of the linear phase, `arg(λ/λ₀) ≈ bε`.
    pub b: Option<f64>,
    /// Rate of the paired phases, `|arg(λ±/λ₀)| ≈ c√ε`.
    pub c_fit: Option<f64>,
    /// Fitted exponent `p` of `|arg(λ/λ₀)| ∝ ε^p` over the moving members.
    pub exponent: Option<f64>,
    /// Per-ε deviation of the family from the fitted leading term.
    pub residuals: Vec<f64>,
    /// Tracked eigenvalues, one row per ε.
    pub members: Vec<Vec<Complex64>>,
}

fn check_eps_list(eps_list: &[f64]) -> Result<()> {
    if eps_list.len() < 4 {
        return Err(Error::InvalidArgument("need at least four epsilon values".into()));
    }
    if eps_list.iter().any(|e| !(*e > 0.0 && *e <= 0.5)) {
        return Err(Error::InvalidArgument("epsilon values must lie in (0, 1/2]".into()));
    }
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidArgument("epsilon list must be strictly decreasing".into()));
    }
    Ok(())
}

/// Collective spectra of `U(ε)` for every `ε`, in input order.
fn spectra_on_grid(graph: &StarGraph, phi: f64, eps_list: &[f64]) -> Result<Vec<Vec<Eigenpair>>> {
    eps_list
        .par_iter()
        .map(|&eps| compute_spectrum(&build_collective_step_operator(graph, eps, phi)?))
        .collect()
}

/// Follow every eigenvalue of `U(ε)` back to the eigenvalue of `U₀` it
/// continues. At the smallest `ε` each eigenvalue joins the nearest cluster
/// of `U₀`; towards larger `ε` all members are continued together by
/// greedy nearest matching, so no eigenvalue serves two families.
///
/// Returns, per cluster, the spectrum indices of its members for every `ε`
/// (member `i` of each row is the same branch), or the reason tracking
/// failed.
fn track_families(
    centers: &[(Complex64, usize)],
    eps_list: &[f64],
    spectra: &[Vec<Eigenpair>],
) -> Vec<std::result::Result<Vec<Vec<usize>>, String>> {
    let last = eps_list.len() - 1;
    let reach = 10.0 * eps_list[last].sqrt();
    let mut failure: Vec<Option<String>> = vec![None; centers.len()];

    // (cluster, index into the current spectrum), one per eigenvalue
    let mut members: Vec<(usize, usize)> = Vec::with_capacity(spectra[last].len());
    for (i, p) in spectra[last].iter().enumerate() {
        let (f, d) = centers
            .iter()
            .enumerate()
            .map(|(f, c)| (f, (p.value - c.0).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("at least one cluster");
        if d >= reach {
            failure[f].get_or_insert(format!(
                "eigenvalue {:.6} at the smallest epsilon is {d:.2e} away from every limit eigenvalue",
                p.value
            ));
        }
        members.push((f, i));
    }
    members.sort();
    for (f, c) in centers.iter().enumerate() {
        let count = members.iter().filter(|m| m.0 == f).count();
        if count != c.1 {
            failure[f].get_or_insert(format!(
                "{count} eigenvalues approach it but its multiplicity is {}; refine the epsilon grid",
                c.1
            ));
        }
    }

    let mut rows: Vec<Vec<usize>> = vec![Vec::new(); eps_list.len()];
    rows[last] = members.iter().map(|m| m.1).collect();
    for k in (0..last).rev() {
        let limit = 10.0 * (eps_list[k].sqrt() - eps_list[k + 1].sqrt());
        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for (m, &prev) in rows[k + 1].iter().enumerate() {
            let z = spectra[k + 1][prev].value;
            for (i, e) in spectra[k].iter().enumerate() {
                pairs.push(((e.value - z).norm(), m, i));
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut assigned = vec![usize::MAX; members.len()];
        let mut used = vec![false; spectra[k].len()];
        for (d, m, i) in pairs {
            if assigned[m] == usize::MAX && !used[i] {
                assigned[m] = i;
                used[i] = true;
                if d >= limit {
                    failure[members[m].0].get_or_insert(format!(
                        "jump of {d:.2e} exceeds the continuity bound {limit:.2e} at epsilon = {:.3e}",
                        eps_list[k]
                    ));
                }
            }
        }
        rows[k] = assigned;
    }

    (0..centers.len())
        .map(|f| match failure[f].take() {
            Some(reason) => Err(reason),
            None => {
                let mine: Vec<usize> = (0..members.len()).filter(|&m| members[m].0 == f).collect();
                Ok(rows.iter().map(|r| mine.iter().map(|&m| r[m]).collect()).collect())
            }
        })
        .collect()
}

/// Distinct eigenvalues of `U₀` with multiplicities.
fn limit_clusters(spectrum: &LabeledSpectrum) -> (Vec<(Complex64, usize)>, Vec<Vec<usize>>) {
    let values: Vec<Complex64> = spectrum.eigenpairs.iter().map(|p| p.value).collect();
    let groups = cluster(&values, CLUSTER_TOL);
    let centers = groups.iter().map(|g| (values[g[0]], g.len())).collect();
    (centers, groups)
}

/// Least-squares slope of `log y` against `log x` over the last `k` points.
fn log_slope(x: &[f64], y: &[f64], k: usize) -> f64 {
    let n = x.len();
    let lx: Vec<f64> = x[n - k..].iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y[n - k..].iter().map(|v| v.ln()).collect();
    fit_line(&lx, &ly).slope
}

fn classify_family(
    lambda0: Complex64,
    tracked: std::result::Result<Vec<Vec<usize>>, String>,
    eps_list: &[f64],
    spectra: &[Vec<Eigenpair>],
) -> Result<(EigenvalueFamilyFit, Vec<Vec<usize>>)> {
    let rows = tracked.map_err(|reason| Error::UnresolvedFamily { lambda0, reason })?;
    let multiplicity = rows[0].len();
    let members: Vec<Vec<Complex64>> = rows
        .iter()
        .zip(spectra)
        .map(|(r, s)| r.iter().map(|&i| s[i].value).collect())
        .collect();
    let last = eps_list.len() - 1;
    let moving: Vec<usize> = (0..multiplicity)
        .filter(|&m| (members[last][m] - lambda0).norm() > MOVING_TOL)
        .collect();
    // signed phase of member m relative to λ₀ at each ε
    let theta = |m: usize| -> Vec<f64> { members.iter().map(|row| (row[m] / lambda0).arg()).collect() };
    let unresolved = |reason: String| Error::UnresolvedFamily { lambda0, reason };

    let mut fit = EigenvalueFamilyFit {
        lambda0,
        multiplicity,
        family_case: FamilyCase::Constant,
        b: None,
        c_fit: None,
        exponent: None,
        residuals: Vec::new(),
        members: members.clone(),
    };
    let tail = 3.min(eps_list.len());
    let sqrt_eps: Vec<f64> = eps_list.iter().map(|e| e.sqrt()).collect();

    match moving.len() {
        0 => {
            fit.residuals = members
                .iter()
                .map(|row| row.iter().map(|z| (z - lambda0).norm()).fold(0.0, f64::max))
                .collect();
        }
        1 => {
            let th = theta(moving[0]);
            let abs: Vec<f64> = th.iter().map(|t| t.abs().max(f64::MIN_POSITIVE)).collect();
            let p = log_slope(eps_list, &abs, tail);
            if p < 0.75 {
                return Err(unresolved(format!(
                    "a single moving eigenvalue with phase exponent {p:.3}"
                )));
            }
            let scaled: Vec<f64> = th.iter().zip(eps_list).map(|(t, e)| t / e).collect();
            let b = fit_line(eps_list, &scaled).intercept;
            fit.family_case = FamilyCase::LinearPhase;
            fit.b = Some(b);
            fit.exponent = Some(p);
            fit.residuals = th.iter().zip(eps_list).map(|(t, e)| (t - b * e).abs()).collect();
        }
        2 => {
            let th: Vec<Vec<f64>> = moving.iter().map(|&m| theta(m)).collect();
            let mut exponents = Vec::new();
            for t in &th {
                let abs: Vec<f64> = t.iter().map(|v| v.abs().max(f64::MIN_POSITIVE)).collect();
                exponents.push(log_slope(eps_list, &abs, tail));
            }
            let opposite = th[0][last].signum() != th[1][last].signum();
            if !(opposite && exponents.iter().all(|p| (p - 0.5).abs() < 0.15)) {
                return Err(unresolved(format!(
                    "two moving eigenvalues with phase exponents {:.3}, {:.3}",
                    exponents[0], exponents[1]
                )));
            }
            let mut c_sum = 0.0;
            for t in &th {
                let scaled: Vec<f64> = t.iter().zip(&sqrt_eps).map(|(v, s)| v.abs() / s).collect();
                c_sum += fit_line(&sqrt_eps, &scaled).intercept;
            }
            let c = c_sum / 2.0;
            fit.family_case = FamilyCase::Paired;
            fit.c_fit = Some(c);
            fit.exponent = Some((exponents[0] + exponents[1]) / 2.0);
            fit.residuals = (0..eps_list.len())
                .map(|k| {
                    th.iter()
                        .map(|t| (t[k].abs() - c * sqrt_eps[k]).abs())
                        .fold(0.0, f64::max)
                })
                .collect();
        }
        n => {
            return Err(unresolved(format!("{n} moving eigenvalues in one family")));
        }
    }
    Ok((fit, rows))
}

/// Track the eigenvalues of `U(ε)` that tend to `lambda0` and classify how
/// they leave it.
pub fn fit_eigenvalue_family(
    graph: &StarGraph,
    phi: f64,
    lambda0: Complex64,
    eps_list: &[f64],
) -> Result<EigenvalueFamilyFit> {
    check_eps_list(eps_list)?;
    let spectrum = label_graph(graph, phi, ACTIVITY_TOL)?;
    let (centers, _) = limit_clusters(&spectrum);
    let target = centers
        .iter()
        .position(|c| (c.0 - lambda0).norm() < CLUSTER_TOL)
        .ok_or_else(|| {
            Error::InvalidArgument(format!("{lambda0:.6} is not an eigenvalue of the limit operator"))
        })?;
    let spectra = spectra_on_grid(graph, phi, eps_list)?;
    let tracked = track_families(&centers, eps_list, &spectra).swap_remove(target);
    Ok(classify_family(centers[target].0, tracked, eps_list, &spectra)?.0)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FamilyReport {
    pub lambda0: Complex64,
    pub multiplicity: usize,
    pub left_active: bool,
    pub right_active: bool,
    pub family_case: Option<FamilyCase>,
    pub b: Option<f64>,
    pub c_fit: Option<f64>,
    pub exponent: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SplitRow {
    pub lambda0: Complex64,
    pub epsilon: f64,
    pub left_weight_plus: f64,
    pub left_weight_minus: f64,
    pub deviation: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LawRow {
    pub lambda0: Complex64,
    pub epsilon: f64,
    pub lambda_plus: Complex64,
    pub lambda_minus: Complex64,
    /// `|arg(λ±/λ₀)|/√ε`
    pub scaled_phase_plus: f64,
    pub scaled_phase_minus: f64,
    pub prediction_error: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CouplingComparison {
    pub lambda0: Complex64,
    /// `√2|γ|`
    pub c_closed: f64,
    pub c_fit: f64,
    pub c_limit: f64,
    /// Largest pairwise relative difference of the three estimates.
    pub spread: f64,
    /// `|arg(λ±/λ₀)|/√ε` at the smallest `ε`, relative to `c_closed`.
    pub scaled_phase_error: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TheoremReport {
    pub phi: f64,
    pub epsilons: Vec<f64>,
    pub pairing_found: bool,
    pub matched_eigenvalues: Vec<Complex64>,
    pub families: Vec<FamilyReport>,
    /// Failed exclusivity or pairing checks, in words.
    pub violations: Vec<String>,
    pub left_right_split: Vec<SplitRow>,
    pub eigenvalue_law: Vec<LawRow>,
    pub couplings: Vec<CouplingComparison>,
    /// Largest `‖U(ε)v − λv‖` over bound eigenvectors of `U₀` and all `ε`.
    pub bound_constancy: f64,
}

/// Relative agreement required between the three coupling estimates.
pub const COUPLING_SPREAD_TOL: f64 = 0.02;
/// Relative error allowed for `|arg(λ±/λ₀)|/√ε` at the smallest `ε`.
pub const SCALED_PHASE_TOL: f64 = 0.05;
/// Eigen-residual allowed for bound vectors under `U(ε)`.
pub const BOUND_RESIDUAL_TOL: f64 = 1e-9;

impl TheoremReport {
    pub fn split_ok(&self) -> bool {
        self.left_right_split.iter().all(|r| r.deviation < r.bound)
    }

    pub fn law_ok(&self) -> bool {
        self.eigenvalue_law.iter().all(|r| r.prediction_error <= r.bound)
            && self
                .couplings
                .iter()
                .all(|c| c.scaled_phase_error < SCALED_PHASE_TOL && c.spread < COUPLING_SPREAD_TOL)
    }

    pub fn bound_ok(&self) -> bool {
        self.bound_constancy < BOUND_RESIDUAL_TOL
    }

    pub fn passes(&self) -> bool {
        self.violations.is_empty() && self.split_ok() && self.law_ok() && self.bound_ok()
    }
}

/// Classify every eigenvalue family of `U₀` at `phi`, check that pairing
/// happens exactly at shared active eigenvalues, and compare paired
/// families against first-order perturbation theory.
pub fn verify_pairing_theorems(graph: &StarGraph, phi: f64, eps_list: &[f64]) -> Result<TheoremReport> {
    check_eps_list(eps_list)?;
    let spectrum = label_graph(graph, phi, ACTIVITY_TOL)?;
    let space = crate::operator::StateSpace::collective(graph);
    let (centers, groups) = limit_clusters(&spectrum);
    let spectra = spectra_on_grid(graph, phi, eps_list)?;
    let tracked = track_families(&centers, eps_list, &spectra);

    let mut report = TheoremReport {
        phi,
        epsilons: eps_list.to_vec(),
        pairing_found: false,
        matched_eigenvalues: Vec::new(),
        families: Vec::new(),
        violations: Vec::new(),
        left_right_split: Vec::new(),
        eigenvalue_law: Vec::new(),
        couplings: Vec::new(),
        bound_constancy: 0.0,
    };

    for ((group, tracked), &(lambda0, _)) in groups.iter().zip(tracked).zip(&centers) {
        let active = |side: SideLabel| {
            group.iter().any(|&i| {
                let l = &spectrum.labels[i];
                l.side == side && l.activity == Activity::Active
            })
        };
        let (left_active, right_active) = (active(SideLabel::Left), active(SideLabel::Right));
        let matched = left_active && right_active;
        if matched {
            report.pairing_found = true;
            report.matched_eigenvalues.push(lambda0);
        }

        let mut family = FamilyReport {
            lambda0,
            multiplicity: group.len(),
            left_active,
            right_active,
            family_case: None,
            b: None,
            c_fit: None,
            exponent: None,
            error: None,
        };
        let (fit, rows) = match classify_family(lambda0, tracked, eps_list, &spectra) {
            Ok(ok) => ok,
            Err(e) => {
                report
                    .violations
                    .push(format!("family at {lambda0:.6} not classified: {e}"));
                family.error = Some(e.to_string());
                report.families.push(family);
                continue;
            }
        };
        family.family_case = Some(fit.family_case);
        family.b = fit.b;
        family.c_fit = fit.c_fit;
        family.exponent = fit.exponent;
        report.families.push(family);

        let paired = fit.family_case == FamilyCase::Paired;
        if paired != matched {
            report.violations.push(format!(
                "family at {lambda0:.6}: {:?} but shared active eigenvalue is {matched}",
                fit.family_case
            ));
            continue;
        }
        if !paired {
            continue;
        }

        let opts = ClassifyOptions {
            lambda0: Some(lambda0),
            ..ClassifyOptions::default()
        };
        let classification = select_match(spectrum.clone(), &space, &opts)?;
        let last = eps_list.len() - 1;
        let moving: Vec<usize> = (0..group.len())
            .filter(|&m| (fit.members[last][m] - lambda0).norm() > MOVING_TOL)
            .collect();
        // order the two moving members as (+, −) by the sign of their phase
        let (plus, minus) = if (fit.members[last][moving[0]] / lambda0).arg() > 0.0 {
            (moving[0], moving[1])
        } else {
            (moving[1], moving[0])
        };
        let mut smallest_scaled = 0.0f64;
        for (k, &eps) in eps_list.iter().enumerate() {
            let vp = &spectra[k][rows[k][plus]];
            let vm = &spectra[k][rows[k][minus]];
            let wp = space.side_weight(&vp.vector, Side::Left);
            let wm = space.side_weight(&vm.vector, Side::Left);
            report.left_right_split.push(SplitRow {
                lambda0,
                epsilon: eps,
                left_weight_plus: wp,
                left_weight_minus: wm,
                deviation: (wp - 0.5).abs().max((wm - 0.5).abs()),
                bound: 3.0 * eps.sqrt(),
            });

            let prediction = perturbative_pair_prediction(
                &classification.l0,
                &classification.r0,
                lambda0,
                classification.delta,
                eps,
            )?;
            let sp = (vp.value / lambda0).arg().abs() / eps.sqrt();
            let sm = (vm.value / lambda0).arg().abs() / eps.sqrt();
            report.eigenvalue_law.push(LawRow {
                lambda0,
                epsilon: eps,
                lambda_plus: vp.value,
                lambda_minus: vm.value,
                scaled_phase_plus: sp,
                scaled_phase_minus: sm,
                prediction_error: (vp.value - prediction.lambda_plus)
                    .norm()
                    .max((vm.value - prediction.lambda_minus).norm()),
                bound: 10.0 * eps,
            });
            if k == last {
                smallest_scaled = sp.max(sm);
                let low = sp.min(sm);
                if (low - classification.c).abs() > (smallest_scaled - classification.c).abs() {
                    smallest_scaled = low;
                }
            }
        }

        let c_closed = classification.c;
        let c_fit = fit.c_fit.unwrap_or(f64::NAN);
        let c_limit = coupling_constant_limit(graph, phi, &classification.l0, &classification.r0, eps_list)?.c;
        let estimates = [c_closed, c_fit, c_limit];
        let mut spread = 0.0f64;
        for i in 0..3 {
            for j in i + 1..3 {
                spread = spread.max((estimates[i] - estimates[j]).abs() / c_closed);
            }
        }
        report.couplings.push(CouplingComparison {
            lambda0,
            c_closed,
            c_fit,
            c_limit,
            spread,
            scaled_phase_error: (smallest_scaled - c_closed).abs() / c_closed,
        });
    }

    let bound: Vec<&Eigenpair> = spectrum.bound_indices().map(|i| &spectrum.eigenpairs[i]).collect();
    let residuals: Vec<f64> = eps_list
        .par_iter()
        .map(|&eps| -> Result<f64> {
            let u = build_collective_step_operator(graph, eps, phi)?;
            Ok(bound
                .iter()
                .map(|p| (u.apply(&p.vector) - &p.vector * p.value).norm())
                .fold(0.0, f64::max))
        })
        .collect::<Result<_>>()?;
    report.bound_constancy = residuals.into_iter().fold(0.0, f64::max);
    Ok(report)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ScalingRow {
    pub n: usize,
    pub m_star: usize,
    pub p_star: f64,
    pub m_predicted: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingReport {
    pub phi: f64,
    pub branch: Branch,
    /// Coupling constant of the matched pair, if there is one.
    pub c: Option<f64>,
    pub rows: Vec<ScalingRow>,
    /// Least-squares `a` in `m_star ≈ a√N`.
    pub a: f64,
    pub r_squared: f64,
    /// `π/(2c)`
    pub a_predicted: Option<f64>,
}

/// Fit `m ≈ a√N` through the origin; `R²` is taken about the mean of `m`.
pub fn fit_sqrt_scaling(rows: &[ScalingRow]) -> (f64, f64) {
    let x: Vec<f64> = rows.iter().map(|r| (r.n as f64).sqrt()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.m_star as f64).collect();
    let a = x.iter().zip(&y).map(|(x, y)| x * y).sum::<f64>() / x.iter().map(|x| x * x).sum::<f64>();
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_res: f64 = x.iter().zip(&y).map(|(x, y)| (y - a * x).powi(2)).sum();
    let ss_tot: f64 = y.iter().map(|y| (y - mean).powi(2)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 0.0 };
    (a, r2)
}

/// Run [`find_optimal_m`] for the template at each `N` and fit `m ≈ a√N`.
///
/// Without a matched pair the horizon is the one a coupling of 1 would give.
pub fn scan_scaling(
    template: &AnomalyGraphSpec,
    phi: f64,
    branch: Branch,
    n_list: &[usize],
) -> Result<ScalingReport> {
    if n_list.len() < 4 {
        return Err(Error::InvalidArgument("scan needs at least four values of N".into()));
    }
    if let Some(&n) = n_list.iter().find(|&&n| n < 8) {
        return Err(Error::InvalidArgument(format!("N = {n} below the scan minimum of 8")));
    }
    let opts = ClassifyOptions {
        lambda0: Some(branch.left_eigenvalue(phi)),
        ..ClassifyOptions::default()
    };
    let (probe, _) = build_graph(&template.with_n_spokes(n_list[0]))?;
    let c = analyze(&probe, phi, &opts).ok().map(|cl| cl.c);

    let rows: Vec<ScalingRow> = n_list
        .par_iter()
        .map(|&n| -> Result<ScalingRow> {
            let (graph, basis) = build_graph(&template.with_n_spokes(n))?;
            let u = build_step_operator(&graph, &basis, 1.0 / n as f64, phi)?;
            let psi = initial_state(&basis, n, phi, branch)?;
            let m_predicted = c.map(|c| optimal_step_count(c, n)).transpose()?;
            let reference = optimal_step_count(c.unwrap_or(1.0), n)?;
            let (m_star, p_star) = find_optimal_m(&u, &psi, &basis, 2 * reference)?;
            Ok(ScalingRow {
                n,
                m_star,
                p_star,
                m_predicted,
            })
        })
        .collect::<Result<_>>()?;
    let (a, r_squared) = fit_sqrt_scaling(&rows);
    Ok(ScalingReport {
        phi,
        branch,
        c,
        rows,
        a,
        r_squared,
        a_predicted: c.map(|c| std::f64::consts::PI / (2.0 * c)),
    })
}

pub fn write_scaling_csv<W: Write>(report: &ScalingReport, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["n", "m_star", "p_star", "m_predicted"])?;
    for r in &report.rows {
        w.write_record([
            r.n.to_string(),
            r.m_star.to_string(),
            r.p_star.to_string(),
            r.m_predicted.map(|m| m.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Per-ε rows of a theorem report as CSV.
pub fn write_theorem_csv<W: Write>(report: &TheoremReport, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "lambda0_re",
        "lambda0_im",
        "epsilon",
        "left_weight_plus",
        "left_weight_minus",
        "scaled_phase_plus",
        "scaled_phase_minus",
        "prediction_error",
    ])?;
    for (s, l) in report.left_right_split.iter().zip(&report.eigenvalue_law) {
        w.write_record([
            s.lambda0.re.to_string(),
            s.lambda0.im.to_string(),
            s.epsilon.to_string(),
            s.left_weight_plus.to_string(),
            s.left_weight_minus.to_string(),
            l.scaled_phase_plus.to_string(),
            l.scaled_phase_minus.to_string(),
            l.prediction_error.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Seeded small connected anomaly graphs on `"1"` plus 2 to 6 vertices
/// `"g1"`, `"g2"`, ... with default behaviors.
pub fn random_anomaly_suite(seed: u64, count: usize, n_spokes: usize) -> Vec<AnomalyGraphSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut suite = Vec::with_capacity(count);
    while suite.len() < count {
        let extra = rng.random_range(2..=6usize);
        let mut labels = vec!["1".to_string()];
        labels.extend((1..=extra).map(|i| format!("g{i}")));
        let mut edges = Vec::new();
        for i in 0..labels.len() {
            for j in i + 1..labels.len() {
                if rng.random_bool(0.5) {
                    edges.push((labels[i].clone(), labels[j].clone()));
                }
            }
        }
        let spec = AnomalyGraphSpec {
            n_spokes,
            attachment_spoke: "1".into(),
            anomaly_edges: edges,
            vertex_behaviors: BTreeMap::new(),
            leaf_phase: 0.0,
        };
        let used: std::collections::BTreeSet<&String> =
            spec.anomaly_edges.iter().flat_map(|(u, v)| [u, v]).collect();
        if used.len() == labels.len() && build_graph(&spec).is_ok() {
            suite.push(spec);
        }
    }
    suite
}

/// Leaf phase whose left eigenvalues `±e^{iφ/2}` stay farthest from the
/// right spectrum, searched on a grid of 2048 points in `[0, 2π)`.
pub fn detuned_phase(graph: &StarGraph) -> Result<f64> {
    let spectrum = label_graph(graph, 0.0, ACTIVITY_TOL)?;
    let right: Vec<Complex64> = spectrum
        .eigenpairs
        .iter()
        .zip(&spectrum.labels)
        .filter(|(_, l)| l.side == SideLabel::Right)
        .map(|(p, _)| p.value)
        .collect();
    let gap = |phi: f64| {
        let half = Complex64::from_polar(1.0, phi / 2.0);
        right
            .iter()
            .map(|z| (z - half).norm().min((z + half).norm()))
            .fold(f64::INFINITY, f64::min)
    };
    const STEPS: usize = 2048;
    let best = (0..STEPS)
        .map(|k| TAU * k as f64 / STEPS as f64)
        .max_by(|a, b| gap(*a).total_cmp(&gap(*b)).then(b.total_cmp(a)))
        .expect("non-empty grid");
    Ok(best)
}

/// Three leaf phases for a suite graph: tuned to its most strongly
/// coupled right eigenvalue, maximally detuned, and `2π`.
pub fn suite_phases(graph: &StarGraph) -> Result<[f64; 3]> {
    let spectrum = label_graph(graph, 0.0, ACTIVITY_TOL)?;
    let best = spectrum
        .active_indices(SideLabel::Right)
        .max_by(|&a, &b| spectrum.labels[a].contact.total_cmp(&spectrum.labels[b].contact))
        .map(|i| spectrum.eigenpairs[i].value)
        .ok_or_else(|| Error::InvalidArgument("graph has no active right eigenvector".into()))?;
    let tuned = tune_phase(best)[0].phi;
    Ok([tuned, detuned_phase(graph)?, TAU])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid() {
        let eps = default_eps_list();
        assert_eq!(eps.len(), 6);
        assert_eq!(eps[0], 1.0 / 64.0);
        assert_eq!(eps[5], 1.0 / 65536.0);
        assert!(check_eps_list(&eps).is_ok());
        assert!(check_eps_list(&eps[..3]).is_err());
        assert!(check_eps_list(&[0.1, 0.2, 0.05, 0.01]).is_err());
    }

    #[test]
    fn sqrt_fit_exact_data() {
        let rows: Vec<ScalingRow> = [16usize, 64, 256, 1024]
            .iter()
            .map(|&n| ScalingRow {
                n,
                m_star: 3 * (n as f64).sqrt() as usize,
                p_star: 0.5,
                m_predicted: None,
            })
            .collect();
        let (a, r2) = fit_sqrt_scaling(&rows);
        assert!((a - 3.0).abs() < 1e-12);
        assert!((r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn suite_is_reproducible_and_valid() {
        let a = random_anomaly_suite(11, 8, 16);
        let b = random_anomaly_suite(11, 8, 16);
        assert_eq!(a, b);
        for spec in &a {
            let vertices: std::collections::BTreeSet<&String> =
                spec.anomaly_edges.iter().flat_map(|(u, v)| [u, v]).collect();
            assert!((3..=7).contains(&vertices.len()));
            assert!(build_graph(spec).is_ok());
        }
    }
}
