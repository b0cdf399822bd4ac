use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use starwalk::graph_file::parse_graph_list_str;
use starwalk::operator::{
    build_collective_limit_operator, build_collective_step_operator, build_limit_operator,
    build_perturbation, build_step_operator, lift_collective, StateSpace,
};
use starwalk::{build_graph, AnomalyGraphSpec, Side};

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn max_abs(v: &DVector<Complex64>) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn suite() -> Vec<AnomalyGraphSpec> {
    parse_graph_list_str(include_str!("../fixtures/random-suite.json")).unwrap()
}

#[test]
fn every_operator_is_unitary() {
    let mut specs = vec![AnomalyGraphSpec::triangle(8), AnomalyGraphSpec::empty(5), AnomalyGraphSpec::triangle(2)];
    specs.extend(suite());
    for spec in specs {
        let (g, b) = build_graph(&spec).unwrap();
        let n = spec.n_spokes as f64;
        for phi in [0.0, 1.3, 2.0 * PI] {
            let ops = [
                build_step_operator(&g, &b, 1.0 / n, phi).unwrap(),
                build_limit_operator(&g, &b, phi).unwrap(),
                build_collective_step_operator(&g, 1e-3, phi).unwrap(),
                build_collective_limit_operator(&g, phi).unwrap(),
            ];
            for u in ops {
                assert!(u.unitarity_defect() < 1e-12, "{:?}", spec.anomaly_edges);
                assert!(u.unitarity_check() < 1e-12);
            }
        }
    }
}

#[test]
fn hub_coin_entries() {
    let n = 6;
    let (g, b) = build_graph(&AnomalyGraphSpec::triangle(n)).unwrap();
    let u = build_step_operator(&g, &b, 1.0 / n as f64, 0.4).unwrap();
    let t = 2.0 / n as f64;
    for j in 1..=n {
        for k in 1..=n {
            let want = if j == k { t - 1.0 } else { t };
            assert!((u.matrix()[(b.hub_out(k), b.hub_in(j))] - c(want)).norm() < 1e-15);
        }
    }
    // leaves reflect with the phase; vertex 1 scatters with a degree-3 Grover coin
    let leaf = Complex64::from_polar(1.0, 0.4);
    for j in 2..=n {
        assert!((u.matrix()[(b.hub_in(j), b.hub_out(j))] - leaf).norm() < 1e-15);
    }
    assert!((u.matrix()[(b.hub_in(1), b.hub_out(1))] - c(-1.0 / 3.0)).norm() < 1e-15);
}

#[test]
fn epsilon_only_enters_hub_columns() {
    let n = 10;
    let (g, b) = build_graph(&AnomalyGraphSpec::triangle(n)).unwrap();
    let u = build_step_operator(&g, &b, 0.1, 2.0).unwrap();
    let u0 = build_limit_operator(&g, &b, 2.0).unwrap();
    let space = StateSpace::edges(&b);
    for col in 0..b.dim() {
        if space.is_hub_incoming(col) {
            continue;
        }
        for row in 0..b.dim() {
            assert_eq!(u.matrix()[(row, col)], u0.matrix()[(row, col)]);
        }
    }
}

#[test]
fn limit_operator_is_block_diagonal() {
    for spec in suite().into_iter().chain([AnomalyGraphSpec::triangle(7)]) {
        let (g, b) = build_graph(&spec).unwrap();
        let u0 = build_limit_operator(&g, &b, 0.9).unwrap();
        for i in 0..b.dim() {
            for j in 0..b.dim() {
                if b.side_of(i) != b.side_of(j) {
                    assert_eq!(u0.matrix()[(i, j)], c(0.0));
                }
            }
        }
    }
}

#[test]
fn limit_operator_on_collective_left_states() {
    let n = 9;
    let phi = 0.77;
    let (g, b) = build_graph(&AnomalyGraphSpec::triangle(n)).unwrap();
    let u0 = build_limit_operator(&g, &b, phi).unwrap();
    let space = StateSpace::edges(&b);
    let vin = space.in_state();
    let vout = space.out_state();
    assert!(max_abs(&(u0.apply(vin) - vout)) < 1e-14);
    assert!(max_abs(&(u0.apply(vout) - vin * Complex64::from_polar(1.0, phi))) < 1e-14);
    // (|out⟩ ± e^{iφ/2}|in⟩)/√2 are eigenvectors with eigenvalues ±e^{iφ/2}
    for sign in [1.0, -1.0] {
        let lambda = Complex64::from_polar(sign, phi / 2.0);
        let v = (vout + vin * lambda) / c(2f64.sqrt());
        assert!(max_abs(&(u0.apply(&v) - &v * lambda)) < 1e-14);
    }
    // U₀|1,0⟩ = −|0,1⟩
    let mut e = DVector::zeros(b.dim());
    e[b.hub_in(1)] = c(1.0);
    let mut want = DVector::zeros(b.dim());
    want[b.hub_out(1)] = c(-1.0);
    assert_eq!(u0.apply(&e), want);
}

/// Hub action of `U(ε)` on `|j,0⟩` written out from the coin rule.
fn hub_image(n: usize, j: usize, b: &starwalk::EdgeBasis) -> DVector<Complex64> {
    let t = 2.0 / n as f64;
    let mut v = DVector::zeros(b.dim());
    for k in 1..=n {
        v[b.hub_out(k)] = c(if k == j { t - 1.0 } else { t });
    }
    v
}

#[test]
fn perturbation_relations() {
    for n in [4usize, 16, 50] {
        let eps = 1.0 / n as f64;
        let (g, b) = build_graph(&AnomalyGraphSpec::triangle(n)).unwrap();
        let u = build_step_operator(&g, &b, eps, 2.0 * PI).unwrap();
        let u0 = build_limit_operator(&g, &b, 2.0 * PI).unwrap();
        let u1 = build_perturbation(&u, &u0).unwrap();
        let space = StateSpace::edges(&b);
        let (vin, vout) = (space.in_state(), space.out_state());
        let leak = 2.0 * (eps - eps * eps).sqrt();

        // oracle for U(ε)|in⟩ from the coin rule, minus U₀|in⟩ = |out⟩
        let mut u_in = DVector::zeros(b.dim());
        for j in 2..=n {
            u_in += hub_image(n, j, &b) / c(((n - 1) as f64).sqrt());
        }
        let mut expected = vout * c(-2.0 * eps);
        expected[b.hub_out(1)] += c(leak);
        assert!(max_abs(&(&u_in - vout - &expected)) < 1e-14);
        assert!(max_abs(&(&u1 * vin - &expected)) < 1e-14);

        let mut e10 = DVector::zeros(b.dim());
        e10[b.hub_in(1)] = c(1.0);
        let mut expected = vout * c(leak);
        expected[b.hub_out(1)] += c(2.0 * eps);
        assert!(max_abs(&(&u1 * &e10 - &expected)) < 1e-14);

        // U₁ annihilates |out⟩, |0,1⟩ and every state inside G
        assert!(max_abs(&(&u1 * vout)) < 1e-15);
        for col in 0..b.dim() {
            let edge = b.edge(col);
            if (edge.tail != "0" && edge.head != "0") || edge.tail == "0" {
                assert!(u1.column(col).iter().all(|z| *z == c(0.0)), "column {edge}");
            }
        }
    }
}

#[test]
fn perturbation_vanishes_with_epsilon() {
    let spec = AnomalyGraphSpec::triangle(4);
    let mut last = f64::INFINITY;
    for n in [4usize, 16, 64, 256] {
        let (g, b) = build_graph(&spec.with_n_spokes(n)).unwrap();
        let u1 = build_perturbation(
            &build_step_operator(&g, &b, 1.0 / n as f64, 0.0).unwrap(),
            &build_limit_operator(&g, &b, 0.0).unwrap(),
        )
        .unwrap();
        let norm = u1.norm();
        assert!(norm < last);
        last = norm;
    }
}

#[test]
fn collective_operator_is_the_restriction() {
    for spec in [AnomalyGraphSpec::triangle(12), suite()[3].clone(), AnomalyGraphSpec::empty(6)] {
        let (g, b) = build_graph(&spec).unwrap();
        let n = spec.n_spokes;
        for (full, coll) in [
            (
                build_step_operator(&g, &b, 1.0 / n as f64, 1.1).unwrap(),
                build_collective_step_operator(&g, 1.0 / n as f64, 1.1).unwrap(),
            ),
            (
                build_limit_operator(&g, &b, 1.1).unwrap(),
                build_collective_limit_operator(&g, 1.1).unwrap(),
            ),
        ] {
            for i in 0..coll.dim() {
                let mut e = DVector::zeros(coll.dim());
                e[i] = c(1.0);
                let lifted = lift_collective(&g, &b, &e).unwrap();
                let image = lift_collective(&g, &b, &coll.apply(&e)).unwrap();
                assert!(max_abs(&(full.apply(&lifted) - image)) < 1e-14);
            }
            let space = coll.space();
            assert_eq!(space.side(0), Side::Left);
            assert_eq!(space.side(space.attach_out()), Side::Right);
        }
    }
}

#[test]
fn norm_is_preserved_over_many_steps() {
    let (g, b) = build_graph(&AnomalyGraphSpec::triangle(64)).unwrap();
    let u = build_step_operator(&g, &b, 1.0 / 64.0, 2.0 * PI).unwrap();
    let mut v = DVector::from_fn(b.dim(), |i, _| Complex64::new((i as f64).sin(), (i as f64 * 0.3).cos()));
    v /= c(v.norm());
    let mut next = DVector::zeros(b.dim());
    for _ in 0..10_000 {
        u.matrix().mul_to(&v, &mut next);
        std::mem::swap(&mut v, &mut next);
    }
    assert!((v.norm() - 1.0).abs() < 1e-10);
}

#[test]
fn custom_unitary_vertex() {
    // a Hadamard-like scatterer at a degree-2 vertex
    let s = 1.0 / 2f64.sqrt();
    let h = DMatrix::from_row_slice(2, 2, &[c(s), c(s), c(s), c(-s)]);
    let mut spec = AnomalyGraphSpec::triangle(5);
    spec.vertex_behaviors.insert("a".into(), starwalk::VertexBehavior::CustomUnitary(h));
    let (g, b) = build_graph(&spec).unwrap();
    let u = build_step_operator(&g, &b, 0.2, 0.0).unwrap();
    assert!(u.unitarity_defect() < 1e-12);
    // entering a from 1 (neighbor 0 in order [1, b]) leaves to 1 and to b
    let col = b.index_of("1", "a").unwrap();
    assert!((u.matrix()[(b.index_of("a", "1").unwrap(), col)] - c(s)).norm() < 1e-15);
    assert!((u.matrix()[(b.index_of("a", "b").unwrap(), col)] - c(s)).norm() < 1e-15);
}
