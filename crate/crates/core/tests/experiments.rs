use std::f64::consts::TAU;

use num_complex::Complex64;
use starwalk::experiments::{
    default_eps_list, detuned_phase, fit_eigenvalue_family, random_anomaly_suite, scan_scaling,
    suite_phases, verify_pairing_theorems, write_scaling_csv, write_theorem_csv, FamilyCase,
};
use starwalk::graph_file::{parse_graph_list_str, to_json_list_string};
use starwalk::spectral::{analyze, label_graph, SideLabel, ACTIVITY_TOL};
use starwalk::{build_graph, AnomalyGraphSpec, Branch, ClassifyOptions, Error};

const SUITE: &str = include_str!("../fixtures/random-suite.json");

fn triangle() -> starwalk::StarGraph {
    build_graph(&AnomalyGraphSpec::triangle(64)).unwrap().0
}

#[test]
fn shared_eigenvalue_splits_into_a_pair() {
    let g = triangle();
    let fit = fit_eigenvalue_family(&g, TAU, Complex64::new(-1.0, 0.0), &default_eps_list()).unwrap();
    assert_eq!(fit.family_case, FamilyCase::Paired);
    assert_eq!(fit.multiplicity, 2);
    let c = fit.c_fit.unwrap();
    assert!((c - 2.0 / 7f64.sqrt()).abs() / c < 0.02, "c_fit {c}");
    assert!((fit.exponent.unwrap() - 0.5).abs() < 0.05);
    assert_eq!(fit.members.len(), default_eps_list().len());
    assert!(fit.members.iter().all(|row| row.len() == 2));
}

#[test]
fn bound_and_lone_active_families() {
    let g = triangle();
    let eps = default_eps_list();
    // bound right eigenvector of the triangle
    let bound = fit_eigenvalue_family(&g, TAU, Complex64::from_polar(1.0, TAU / 3.0), &eps).unwrap();
    assert_eq!(bound.family_case, FamilyCase::Constant);
    for row in &bound.members {
        assert!(row.iter().all(|z| (z - Complex64::from_polar(1.0, TAU / 3.0)).norm() < 1e-10));
    }

    // an active right eigenvalue with no left partner moves linearly
    let spectrum = label_graph(&g, TAU, ACTIVITY_TOL).unwrap();
    let lone = spectrum
        .active_eigenvalues(SideLabel::Right)
        .into_iter()
        .find(|z| (z + 1.0).norm() > 1e-3)
        .unwrap();
    let fit = fit_eigenvalue_family(&g, TAU, lone, &eps).unwrap();
    assert_eq!(fit.family_case, FamilyCase::LinearPhase);
    assert!(fit.b.is_some() && fit.c_fit.is_none());

    assert!(matches!(
        fit_eigenvalue_family(&g, TAU, Complex64::new(0.3, 0.1), &eps),
        Err(Error::InvalidArgument(_))
    ));
    assert!(fit_eigenvalue_family(&g, TAU, lone, &eps[..3]).is_err());
}

#[test]
fn detuned_phase_never_pairs() {
    let g = triangle();
    let phi = detuned_phase(&g).unwrap();
    let report = verify_pairing_theorems(&g, phi, &default_eps_list()).unwrap();
    assert!(!report.pairing_found);
    assert!(report.passes(), "{:?}", report.violations);
    assert!(report
        .families
        .iter()
        .all(|f| f.family_case != Some(FamilyCase::Paired)));
    assert!(matches!(
        analyze(&g, phi, &ClassifyOptions::default()),
        Err(Error::NoMatch { .. } | Error::PhaseDegeneracy { .. })
    ));
}

#[test]
fn triangle_pairing_checks_pass() {
    let g = triangle();
    let report = verify_pairing_theorems(&g, TAU, &default_eps_list()).unwrap();
    assert!(report.pairing_found);
    assert!(report.passes(), "{:?}", report.violations);
    assert_eq!(report.matched_eigenvalues.len(), 1);
    assert!((report.matched_eigenvalues[0] + 1.0).norm() < 1e-9);
    assert!(report.bound_constancy < 1e-10);
    let coupling = &report.couplings[0];
    assert!((coupling.c_closed - 2.0 / 7f64.sqrt()).abs() < 1e-9);
    assert!(coupling.spread < 0.02);

    let mut csv = Vec::new();
    write_theorem_csv(&report, &mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.lines().count() > 1);
}

#[test]
fn fixture_suite_is_reproducible() {
    let fixture = parse_graph_list_str(SUITE).unwrap();
    let regenerated = random_anomaly_suite(2024, 24, 16);
    assert_eq!(fixture, regenerated);
    assert_eq!(to_json_list_string(&regenerated) + "\n", SUITE);
}

#[test]
fn suite_phases_on_a_small_sample() {
    for spec in parse_graph_list_str(SUITE).unwrap().into_iter().take(4) {
        let (g, _) = build_graph(&spec).unwrap();
        let phases = suite_phases(&g).unwrap();
        assert_eq!(phases[2], TAU);
        for phi in phases {
            let report = verify_pairing_theorems(&g, phi, &default_eps_list()).unwrap();
            assert!(report.passes(), "{:?} at {phi}: {:?}", spec.anomaly_edges, report.violations);
        }
        // tuned phase always produces a pair
        let tuned = verify_pairing_theorems(&g, phases[0], &default_eps_list()).unwrap();
        assert!(tuned.pairing_found);
    }
}

#[test]
fn scan_rejects_bad_arguments() {
    let t = AnomalyGraphSpec::triangle(16);
    assert!(matches!(
        scan_scaling(&t, TAU, Branch::Plus, &[16, 32, 64]),
        Err(Error::InvalidArgument(_))
    ));
    assert!(matches!(
        scan_scaling(&t, TAU, Branch::Plus, &[4, 16, 32, 64]),
        Err(Error::InvalidArgument(_))
    ));
}

#[test]
fn small_scans() {
    let report = scan_scaling(&AnomalyGraphSpec::triangle(16), TAU, Branch::Plus, &[16, 32, 64, 128])
        .unwrap();
    let c = report.c.unwrap();
    assert!((c - 2.0 / 7f64.sqrt()).abs() < 1e-9);
    assert!(report.r_squared > 0.9);
    for row in &report.rows {
        assert!(row.p_star > 0.5);
        assert_eq!(row.m_predicted, starwalk::walk::optimal_step_count(c, row.n).ok());
    }
    let mut csv = Vec::new();
    write_scaling_csv(&report, &mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 5);

    let null = scan_scaling(&AnomalyGraphSpec::empty(16), TAU, Branch::Plus, &[16, 32, 64, 128]).unwrap();
    assert!(null.c.is_none());
    for row in &null.rows {
        assert!(row.p_star < 5.0 / row.n as f64);
    }
}
