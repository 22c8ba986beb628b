//! Iterative eigensolvers shared by the ED oracle and DMRG.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Result of a Lanczos run: the `k` lowest Ritz pairs found.
pub struct LanczosResult {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub converged: bool,
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        for x in v.iter_mut() {
            *x /= n;
        }
    }
    n
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Lowest eigenpairs of a symmetric operator given as a matrix-vector
/// product, by restarted Lanczos with full reorthogonalization within each
/// cycle. Deterministic for a fixed seed.
///
/// `apply` must compute `out = H * v`. Iterates until the lowest Ritz pair
/// has residual `max|Hv - lambda v| < tol` or the cycle budget runs out.
pub fn lanczos_lowest<F>(
    dim: usize,
    mut apply: F,
    n_pairs: usize,
    seed: u64,
    tol: f64,
    init: Option<&[f64]>,
) -> LanczosResult
where
    F: FnMut(&[f64], &mut [f64]),
{
    let n_pairs = n_pairs.max(1).min(dim);
    let basis_cap = (dim).min(60.max(2 * n_pairs + 10));
    let max_cycles = 60;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v0: Vec<f64> = match init {
        Some(v) => v.to_vec(),
        None => (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
    };
    if normalize(&mut v0) == 0.0 {
        v0 = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        normalize(&mut v0);
    }

    let mut ritz_vecs: Vec<Vec<f64>> = vec![v0];
    let mut ritz_vals: Vec<f64> = vec![];
    let mut hv = vec![0.0; dim];

    for _cycle in 0..max_cycles {
        // build a Krylov basis seeded with the current Ritz vectors
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(basis_cap);
        for v in &ritz_vecs {
            let mut w = v.clone();
            for b in &basis {
                let c = dot(&w, b);
                for (x, y) in w.iter_mut().zip(b) {
                    *x -= c * y;
                }
            }
            if normalize(&mut w) > 1e-12 {
                basis.push(w);
            }
        }
        if basis.is_empty() {
            let mut w: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            normalize(&mut w);
            basis.push(w);
        }
        while basis.len() < basis_cap {
            let last = basis.last().unwrap();
            apply(last, &mut hv);
            let mut w = hv.clone();
            // full reorthogonalization, twice for stability
            for _ in 0..2 {
                for b in &basis {
                    let c = dot(&w, b);
                    for (x, y) in w.iter_mut().zip(b) {
                        *x -= c * y;
                    }
                }
            }
            if normalize(&mut w) < 1e-12 {
                // invariant subspace found; pad with a random direction
                let mut r: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
                for b in &basis {
                    let c = dot(&r, b);
                    for (x, y) in r.iter_mut().zip(b) {
                        *x -= c * y;
                    }
                }
                if normalize(&mut r) < 1e-12 {
                    break;
                }
                w = r;
            }
            basis.push(w);
        }

        // Rayleigh-Ritz on the subspace
        let m = basis.len();
        let mut h_proj = DMatrix::<f64>::zeros(m, m);
        let mut applied: Vec<Vec<f64>> = Vec::with_capacity(m);
        for b in &basis {
            apply(b, &mut hv);
            applied.push(hv.clone());
        }
        for i in 0..m {
            for j in 0..m {
                h_proj[(i, j)] = dot(&basis[i], &applied[j]);
            }
        }
        // symmetrize against round-off
        let h_sym = (&h_proj + h_proj.transpose()) * 0.5;
        let eig = h_sym.symmetric_eigen();
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());

        let keep = n_pairs.min(m);
        ritz_vals = order.iter().take(keep).map(|&i| eig.eigenvalues[i]).collect();
        ritz_vecs = order
            .iter()
            .take(keep)
            .map(|&col| {
                let coeffs: DVector<f64> = eig.eigenvectors.column(col).into();
                let mut v = vec![0.0; dim];
                for (ci, b) in coeffs.iter().zip(&basis) {
                    for (x, y) in v.iter_mut().zip(b) {
                        *x += ci * y;
                    }
                }
                normalize(&mut v);
                v
            })
            .collect();

        // residual of the lowest pair
        apply(&ritz_vecs[0], &mut hv);
        let lam = ritz_vals[0];
        let res = hv
            .iter()
            .zip(&ritz_vecs[0])
            .map(|(h, v)| (h - lam * v).abs())
            .fold(0.0f64, f64::max);
        if res < tol {
            return LanczosResult {
                values: ritz_vals,
                vectors: ritz_vecs,
                converged: true,
            };
        }
    }
    LanczosResult {
        values: ritz_vals,
        vectors: ritz_vecs,
        converged: false,
    }
}

/// All eigenvalues (ascending) and eigenvectors of a dense symmetric matrix
/// given in row-major order.
pub fn symmetric_eigen_dense(n: usize, data: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let m = DMatrix::from_row_slice(n, n, data);
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = order
        .iter()
        .map(|&i| eig.eigenvectors.column(i).iter().cloned().collect())
        .collect();
    (vals, vecs)
}
