//! Real-orthogonal gates on `m` qubits, parametrized by the exponential map.
//!
//! A gate is `G(theta) = exp(sum_i theta_i A_i)` where `{A_i}` is the
//! canonical basis of antisymmetric `2^m x 2^m` matrices: one generator per
//! index pair `(r, c)` with `r < c`, ordered lexicographically, carrying `-1`
//! at `(r, c)` and `+1` at `(c, r)`. With this sign convention
//! `theta = (pi/2, 0, ...)` realizes the Givens rotation that maps rows 0, 1
//! to `(0, -1)` and `(1, 0)`.
//!
//! The parametrization is surjective onto SO(2^m) and smooth everywhere, so
//! unconstrained optimizers can act on `theta` directly; two qubits give the
//! 6-parameter SO(4) gate used throughout the circuit ansatze.

use crate::error::{QtnError, Result};
use crate::tensor::{matmul, Tensor};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Number of generators of SO(2^m): `2^(m-1) * (2^m - 1)`.
pub fn param_count(m: usize) -> usize {
    let n = 1usize << m;
    n * (n - 1) / 2
}

/// Index pairs `(r, c)`, `r < c`, in lexicographic order by `(row, col)`.
pub fn generator_pairs(m: usize) -> Vec<(usize, usize)> {
    let n = 1usize << m;
    let mut pairs = Vec::with_capacity(param_count(m));
    for r in 0..n {
        for c in (r + 1)..n {
            pairs.push((r, c));
        }
    }
    pairs
}

/// Angle vector for a real-orthogonal gate on `m` qubits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateParams {
    pub m: usize,
    pub theta: Vec<f64>,
}

impl GateParams {
    pub fn identity(m: usize) -> Self {
        GateParams {
            m,
            theta: vec![0.0; param_count(m)],
        }
    }

    pub fn new(m: usize, theta: Vec<f64>) -> Result<Self> {
        if theta.len() != param_count(m) {
            return Err(QtnError::InvalidArgument(format!(
                "gate on {} qubits needs {} angles, got {}",
                m,
                param_count(m),
                theta.len()
            )));
        }
        Ok(GateParams { m, theta })
    }

    pub fn dim(&self) -> usize {
        1 << self.m
    }

    pub fn is_identity(&self) -> bool {
        self.theta.iter().all(|&t| t == 0.0)
    }

    /// The antisymmetric generator `sum_i theta_i A_i` as a dense matrix.
    pub fn generator(&self) -> Vec<f64> {
        let n = self.dim();
        let mut a = vec![0.0; n * n];
        for (k, &(r, c)) in generator_pairs(self.m).iter().enumerate() {
            a[r * n + c] -= self.theta[k];
            a[c * n + r] += self.theta[k];
        }
        a
    }
}

/// Uniformly perturbed identity parameters: every angle drawn from
/// `[-strength, strength]` with the seeded generator. Strength 0 gives the
/// exact identity.
pub fn perturbed_identity(m: usize, strength: f64, seed: u64) -> Result<GateParams> {
    if strength < 0.0 {
        return Err(QtnError::InvalidArgument(
            "perturbation strength must be >= 0".into(),
        ));
    }
    let mut p = GateParams::identity(m);
    if strength > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for t in p.theta.iter_mut() {
            *t = rng.random_range(-strength..=strength);
        }
    }
    Ok(p)
}

/// Matrix exponential by scaling-and-squaring with a Taylor series,
/// specialized to small dense matrices (row-major, n x n).
pub fn expm(n: usize, a: &[f64]) -> Vec<f64> {
    let norm1 = (0..n)
        .map(|j| (0..n).map(|i| a[i * n + j].abs()).sum::<f64>())
        .fold(0.0f64, f64::max);
    let s = if norm1 > 0.5 {
        (norm1 / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scale = 1.0 / (1u64 << s) as f64;
    let b: Vec<f64> = a.iter().map(|x| x * scale).collect();

    // Taylor with running term; ||b|| <= 0.5 so ~20 terms reach 1e-16
    let mut result = vec![0.0; n * n];
    for i in 0..n {
        result[i * n + i] = 1.0;
    }
    let mut term = result.clone();
    let mut next = vec![0.0; n * n];
    for k in 1..=24 {
        matmul(n, n, n, &term, &b, &mut next);
        let kf = 1.0 / k as f64;
        for x in next.iter_mut() {
            *x *= kf;
        }
        std::mem::swap(&mut term, &mut next);
        let mut max_t = 0.0f64;
        for (r, t) in result.iter_mut().zip(&term) {
            *r += t;
            max_t = max_t.max(t.abs());
        }
        if max_t < 1e-17 {
            break;
        }
    }
    // undo scaling by repeated squaring
    let mut sq = vec![0.0; n * n];
    for _ in 0..s {
        matmul(n, n, n, &result, &result, &mut sq);
        std::mem::swap(&mut result, &mut sq);
    }
    result
}

/// Realize the gate matrix `G = exp(sum theta_i A_i)` as a `2^m x 2^m` tensor.
pub fn realize_gate(p: &GateParams) -> Tensor {
    let n = p.dim();
    let g = expm(n, &p.generator());
    Tensor::from_data(&[n, n], g).expect("gate matrix is finite")
}

/// Analytic parameter derivatives `dG/dtheta_i`, one tensor per angle.
///
/// Each slice is the top-right block of `exp([[A, A_i], [0, A]])`, the exact
/// directional derivative of the exponential map.
pub fn gate_jacobian(p: &GateParams) -> Vec<Tensor> {
    let n = p.dim();
    let a = p.generator();
    let pairs = generator_pairs(p.m);
    let mut out = Vec::with_capacity(pairs.len());
    let nn = 2 * n;
    for &(r, c) in &pairs {
        let mut block = vec![0.0; nn * nn];
        for i in 0..n {
            for j in 0..n {
                block[i * nn + j] = a[i * n + j];
                block[(n + i) * nn + (n + j)] = a[i * n + j];
            }
        }
        // direction A_i in the top-right block
        block[r * nn + (n + c)] = -1.0;
        block[c * nn + (n + r)] = 1.0;
        let e = expm(nn, &block);
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                d[i * n + j] = e[i * nn + (n + j)];
            }
        }
        out.push(Tensor::from_data(&[n, n], d).expect("finite derivative"));
    }
    out
}

/// Orthogonality and determinant diagnostics for a realized gate.
pub fn orthogonality_residual(g: &Tensor) -> f64 {
    let n = g.shape()[0];
    let mut res = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let mut dot = 0.0;
            for k in 0..n {
                dot += g.get(&[k, i]) * g.get(&[k, j]);
            }
            let expect = if i == j { 1.0 } else { 0.0 };
            res = res.max((dot - expect).abs());
        }
    }
    res
}

pub fn determinant(g: &Tensor) -> f64 {
    let n = g.shape()[0];
    DMatrix::from_row_slice(n, n, g.data()).determinant()
}

/// The special-orthogonal matrix maximizing `tr(Wᵀ M)` (constrained
/// Procrustes): from `M = U S Vᵀ`, `W = U diag(1, .., 1, det(U Vᵀ)) Vᵀ`.
pub fn so_polar_max(n: usize, m: &[f64]) -> Vec<f64> {
    let mat = DMatrix::from_row_slice(n, n, m);
    let svd = mat.svd(true, true);
    let u = svd.u.unwrap();
    let vt = svd.v_t.unwrap();
    let det = (&u * &vt).determinant();
    let mut d = DMatrix::<f64>::identity(n, n);
    if det < 0.0 {
        d[(n - 1, n - 1)] = -1.0;
    }
    let w = u * d * vt;
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = w[(i, j)];
        }
    }
    out
}

/// The special-orthogonal matrix minimizing `tr(Wᵀ M)`.
pub fn so_polar_min(n: usize, m: &[f64]) -> Vec<f64> {
    let neg: Vec<f64> = m.iter().map(|x| -x).collect();
    so_polar_max(n, &neg)
}

/// Principal real logarithm of a special-orthogonal matrix, returned as the
/// angle vector in the canonical generator basis, so that
/// `realize_gate(log) == W`.
///
/// Uses the real Schur form: rotation blocks contribute their angle, `-1`
/// eigenvalues come in pairs (det is +1) and are joined into pi-rotations.
pub fn log_so(m_qubits: usize, w: &[f64]) -> Result<GateParams> {
    let n = 1usize << m_qubits;
    let mat = DMatrix::from_row_slice(n, n, w);
    let schur = mat.clone().schur();
    let (q, t) = schur.unpack();

    // Assemble the antisymmetric logarithm in the Schur basis.
    let mut lam = DMatrix::<f64>::zeros(n, n);
    let mut minus_ones: Vec<usize> = Vec::new();
    let mut i = 0usize;
    while i < n {
        let is_block = i + 1 < n && t[(i + 1, i)].abs() > 1e-9;
        if is_block {
            let angle = t[(i + 1, i)].atan2(t[(i, i)]);
            lam[(i, i + 1)] = -angle;
            lam[(i + 1, i)] = angle;
            i += 2;
        } else {
            if t[(i, i)] < 0.0 {
                minus_ones.push(i);
            }
            i += 1;
        }
    }
    if minus_ones.len() % 2 != 0 {
        return Err(QtnError::InvalidArgument(
            "matrix logarithm: determinant is not +1".into(),
        ));
    }
    for pair in minus_ones.chunks(2) {
        let (a, b) = (pair[0], pair[1]);
        lam[(a, b)] = -std::f64::consts::PI;
        lam[(b, a)] = std::f64::consts::PI;
    }
    let log = &q * lam * q.transpose();
    // antisymmetrize against round-off
    let pairs = generator_pairs(m_qubits);
    let mut theta = Vec::with_capacity(pairs.len());
    for (r, c) in pairs {
        theta.push(0.5 * (log[(c, r)] - log[(r, c)]));
    }
    let params = GateParams::new(m_qubits, theta)?;
    // branch check: the log must reproduce the input
    let back = realize_gate(&params);
    let mut err = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            err = err.max((back.get(&[i, j]) - w[i * n + j]).abs());
        }
    }
    if err > 1e-9 {
        return Err(QtnError::InvalidArgument(format!(
            "matrix logarithm branch failure, residual {err:.2e}"
        )));
    }
    Ok(params)
}
