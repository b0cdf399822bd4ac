use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;
use starwalk::graph_file::{parse_graph_str, to_json_string};
use starwalk::operator::build_collective_step_operator;
use starwalk::spectral::tune_phase;
use starwalk::walk::initial_state;
use starwalk::{build_graph, AnomalyGraphSpec, VertexBehavior};

/// Connected graph on "1", "g1".."gk": a random spanning tree plus extra
/// edges, with a few vertices given non-default behaviors.
fn spec_strategy() -> impl Strategy<Value = AnomalyGraphSpec> {
    (1usize..=5, 2usize..40, 0.0..TAU, any::<u64>()).prop_map(|(k, n, phi, bits)| {
        let labels: Vec<String> =
            std::iter::once("1".to_string()).chain((1..=k).map(|i| format!("g{i}"))).collect();
        let mut bits = bits;
        let mut take = |m: u64| {
            let v = bits % m;
            bits /= m;
            v as usize
        };
        let mut edges = BTreeSet::new();
        for i in 1..labels.len() {
            let parent = take(i as u64);
            edges.insert((labels[parent].clone(), labels[i].clone()));
        }
        for i in 0..labels.len() {
            for j in i + 1..labels.len() {
                if take(4) == 0 {
                    edges.insert((labels[i].clone(), labels[j].clone()));
                }
            }
        }
        let degree = |v: &str| {
            edges.iter().filter(|(a, b)| a == v || b == v).count() + usize::from(v == "1")
        };
        let mut behaviors = BTreeMap::new();
        for label in &labels {
            let d = degree(label);
            match take(4) {
                1 => {
                    behaviors.insert(label.clone(), VertexBehavior::GroverCoin);
                }
                2 => {
                    let phases = DMatrix::from_fn(d, d, |i, j| {
                        if i == j {
                            Complex64::from_polar(1.0, 0.37 * (i + 1) as f64 + phi)
                        } else {
                            Complex64::new(0.0, 0.0)
                        }
                    });
                    behaviors.insert(label.clone(), VertexBehavior::CustomUnitary(phases));
                }
                3 if d == 1 => {
                    behaviors.insert(label.clone(), VertexBehavior::Reflect(phi / 3.0));
                }
                _ => {}
            }
        }
        AnomalyGraphSpec {
            n_spokes: n,
            attachment_spoke: "1".into(),
            anomaly_edges: edges.into_iter().collect(),
            vertex_behaviors: behaviors,
            leaf_phase: phi,
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn graph_json_round_trip(spec in spec_strategy()) {
        prop_assert!(build_graph(&spec).is_ok());
        let text = to_json_string(&spec);
        let back = parse_graph_str(&text).unwrap();
        prop_assert_eq!(&back, &spec);
        prop_assert_eq!(to_json_string(&back), text);
    }

    #[test]
    fn evolution_preserves_norm(spec in spec_strategy(), eps in 1e-6..0.5f64, seed in any::<u32>()) {
        let (g, _) = build_graph(&spec).unwrap();
        let u = build_collective_step_operator(&g, eps, spec.leaf_phase).unwrap();
        let s = seed as f64;
        let mut v = DVector::from_fn(u.dim(), |i, _| {
            Complex64::new((s + i as f64).sin(), (s * 0.5 + 2.0 * i as f64).cos())
        });
        v /= Complex64::new(v.norm(), 0.0);
        for _ in 0..50 {
            v = u.apply(&v);
        }
        prop_assert!((v.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tuned_phase_reproduces_the_eigenvalue(theta in 0.0..TAU) {
        let lambda = Complex64::from_polar(1.0, theta);
        for cand in tune_phase(lambda) {
            prop_assert!((0.0..2.0 * TAU).contains(&cand.phi));
            prop_assert!((cand.branch.left_eigenvalue(cand.phi) - lambda).norm() < 1e-12);
        }
    }

    #[test]
    fn initial_state_is_a_unit_vector(n in 2usize..200, phi in 0.0..2.0 * TAU, plus in any::<bool>()) {
        let (_, b) = build_graph(&AnomalyGraphSpec::triangle(n)).unwrap();
        let branch = if plus { starwalk::Branch::Plus } else { starwalk::Branch::Minus };
        let psi = initial_state(&b, n, phi, branch).unwrap();
        prop_assert!((psi.norm() - 1.0).abs() < 1e-12);
    }
}
