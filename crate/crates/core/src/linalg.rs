//! Dense linear algebra helpers for unitary (normal) matrices.
//!
//! The complex Schur form of a normal matrix is diagonal, so the Schur
//! vectors are an orthonormal eigenbasis, degenerate eigenspaces included.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Accepted `‖Mv − λv‖` for a returned eigenpair.
pub const EIGEN_RESIDUAL_TOL: f64 = 1e-9;

/// Partition indices into connected components of the sparsity graph of `m`.
pub fn block_components(m: &DMatrix<Complex64>) -> Vec<Vec<usize>> {
    let n = m.nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for j in 0..n {
        for i in 0..n {
            if m[(i, j)].re != 0.0 || m[(i, j)].im != 0.0 {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let root = find(&mut parent, i);
        if slot[root] == usize::MAX {
            slot[root] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[root]].push(i);
    }
    groups
}

fn random_unitary(n: usize, seed: u64) -> DMatrix<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = DMatrix::from_fn(n, n, |_, _| {
        Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    });
    a.qr().q()
}

/// Schur vectors and diagonal of a normal matrix.
///
/// Exactly structured inputs (cyclic permutations, say) can stall the
/// shifted QR iteration; those are retried after a seeded random unitary
/// similarity.
fn schur_normal(m: &DMatrix<Complex64>) -> Result<(DMatrix<Complex64>, DVector<Complex64>)> {
    let n = m.nrows();
    let max_iter = 60 * n + 200;
    if let Some(s) = m.clone().try_schur(f64::EPSILON, max_iter) {
        let (q, t) = s.unpack();
        return Ok((q, t.diagonal()));
    }
    for seed in 1..=3u64 {
        let w = random_unitary(n, seed);
        let similar = w.adjoint() * m * &w;
        if let Some(s) = similar.try_schur(f64::EPSILON, max_iter) {
            let (q, t) = s.unpack();
            return Ok((w * q, t.diagonal()));
        }
    }
    Err(Error::EigensolverFailure(format!(
        "Schur iteration did not converge for a {n}x{n} block"
    )))
}

/// Eigenpairs of a normal matrix, solved block by block.
pub fn eigen_normal(m: &DMatrix<Complex64>) -> Result<Vec<(Complex64, DVector<Complex64>)>> {
    let n = m.nrows();
    let mut pairs = Vec::with_capacity(n);
    for block in block_components(m) {
        let k = block.len();
        let sub = DMatrix::from_fn(k, k, |i, j| m[(block[i], block[j])]);
        let (q, diag) = schur_normal(&sub)?;
        let mut local: Vec<(Complex64, DVector<Complex64>)> = (0..k)
            .map(|c| {
                let mut v = DVector::zeros(n);
                for (r, &i) in block.iter().enumerate() {
                    v[i] = q[(r, c)];
                }
                let v = v.normalize();
                (diag[c], fix_global_phase(v))
            })
            .collect();
        local.sort_by(|a, b| arg_2pi(a.0).total_cmp(&arg_2pi(b.0)));
        pairs.extend(local);
    }
    for (lambda, v) in &pairs {
        let r = (m * v - v * *lambda).norm();
        if r.is_nan() || r >= EIGEN_RESIDUAL_TOL {
            return Err(Error::EigensolverFailure(format!(
                "eigenpair residual {r:.3e} for eigenvalue {lambda:.6}"
            )));
        }
    }
    Ok(pairs)
}

/// Argument mapped into `[0, 2π)`.
pub fn arg_2pi(z: Complex64) -> f64 {
    let a = z.arg();
    if a < 0.0 {
        a + std::f64::consts::TAU
    } else {
        a
    }
}

/// Rotate `v` so its largest-magnitude component (first one on ties) is
/// real and positive.
pub fn fix_global_phase(v: DVector<Complex64>) -> DVector<Complex64> {
    let max = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return v;
    }
    let pivot = v
        .iter()
        .position(|z| z.norm() >= max * (1.0 - 1e-9))
        .expect("maximum exists");
    let phase = v[pivot].conj() / v[pivot].norm();
    v * phase
}

/// Single-linkage clusters of values closer than `tol`.
pub fn cluster(values: &[Complex64], tol: f64) -> Vec<Vec<usize>> {
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    let mut assigned = vec![false; values.len()];
    for start in 0..values.len() {
        if assigned[start] {
            continue;
        }
        assigned[start] = true;
        let mut group = vec![start];
        let mut k = 0;
        while k < group.len() {
            let cur = values[group[k]];
            for j in 0..values.len() {
                if !assigned[j] && (values[j] - cur).norm() < tol {
                    assigned[j] = true;
                    group.push(j);
                }
            }
            k += 1;
        }
        group.sort_unstable();
        clusters.push(group);
    }
    clusters
}

/// Orthonormalize `candidates` in order, dropping those whose remainder
/// falls below `drop_tol`. Stops after `limit` vectors.
pub fn gram_schmidt(
    candidates: impl IntoIterator<Item = DVector<Complex64>>,
    drop_tol: f64,
    limit: usize,
) -> Vec<DVector<Complex64>> {
    let mut basis: Vec<DVector<Complex64>> = Vec::new();
    for mut v in candidates {
        if basis.len() == limit {
            break;
        }
        // two passes keep the result orthogonal to rounding
        for _ in 0..2 {
            for b in &basis {
                let proj = b.dotc(&v);
                v -= b * proj;
            }
        }
        let norm = v.norm();
        if norm >= drop_tol {
            basis.push(v / Complex64::new(norm, 0.0));
        }
    }
    basis
}

/// Ordinary least squares `y ≈ intercept + slope·x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub intercept: f64,
    pub slope: f64,
    /// Largest absolute residual.
    pub max_residual: f64,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> LineFit {
    assert_eq!(x.len(), y.len());
    assert!(x.len() >= 2, "line fit needs two points");
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|xi| (xi - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(xi, yi)| (xi - mx) * (yi - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let max_residual = x
        .iter()
        .zip(y)
        .map(|(xi, yi)| (yi - intercept - slope * xi).abs())
        .fold(0.0, f64::max);
    LineFit {
        intercept,
        slope,
        max_residual,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn cyclic_permutation_is_diagonalized() {
        for n in [3usize, 6, 8, 20] {
            let p = DMatrix::from_fn(n, n, |i, j| if i == (j + 1) % n { c(1.0, 0.0) } else { c(0.0, 0.0) });
            let pairs = eigen_normal(&p).unwrap();
            assert_eq!(pairs.len(), n);
            for (lambda, _) in &pairs {
                assert!((lambda.powu(n as u32) - c(1.0, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn degenerate_eigenspace_is_orthonormal() {
        let mut m = DMatrix::from_diagonal_element(5, 5, c(0.0, 1.0));
        m[(4, 4)] = c(-1.0, 0.0);
        let w = random_unitary(5, 42);
        let m = &w * m * w.adjoint();
        let pairs = eigen_normal(&m).unwrap();
        let v = DMatrix::from_columns(&pairs.iter().map(|p| p.1.clone()).collect::<Vec<_>>());
        let gram = v.adjoint() * &v;
        assert!((gram - DMatrix::identity(5, 5)).iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn blocks_follow_sparsity() {
        let mut m = DMatrix::from_element(4, 4, c(0.0, 0.0));
        m[(0, 2)] = c(1.0, 0.0);
        m[(2, 0)] = c(1.0, 0.0);
        m[(1, 1)] = c(1.0, 0.0);
        m[(3, 3)] = c(0.0, 1.0);
        assert_eq!(block_components(&m), vec![vec![0, 2], vec![1], vec![3]]);
    }

    #[test]
    fn phase_convention() {
        let v = DVector::from_vec(vec![c(0.0, 0.3), c(0.0, -0.8), c(0.5, 0.0)]);
        let w = fix_global_phase(v);
        assert!((w[1] - c(0.8, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn line_fit_recovers_coefficients() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|x| 2.0 - 0.5 * x).collect();
        let fit = fit_line(&x, &y);
        assert!((fit.intercept - 2.0).abs() < 1e-14);
        assert!((fit.slope + 0.5).abs() < 1e-14);
    }
}
