//! Dense statevector simulation.
//!
//! States over `n` qubits are length-`2^n` real vectors indexed big-endian:
//! qubit 0 is the most significant bit, so a state reshaped to `[2; n]` has
//! qubit `k` on axis `k`. This matches the row-major tensor layout used by
//! the rest of the crate.

use crate::error::{QtnError, Result};
use crate::tensor::Tensor;

/// Maximum qubit count accepted by dense realization.
pub const MAX_STATEVECTOR_QUBITS: usize = 26;

/// `|0...0>` on `n` qubits.
pub fn zero_state(n: usize) -> Result<Vec<f64>> {
    if n > MAX_STATEVECTOR_QUBITS {
        return Err(QtnError::SizeLimit(format!(
            "{} qubits exceeds the dense statevector limit of {}",
            n, MAX_STATEVECTOR_QUBITS
        )));
    }
    let mut v = vec![0.0; 1 << n];
    v[0] = 1.0;
    Ok(v)
}

/// Apply a `2^m x 2^m` gate (row-major) to the listed wires of a state on
/// `n` qubits, in place. `wires[0]` is the most significant wire of the
/// gate's local index.
pub fn apply_gate(state: &mut [f64], n: usize, gate: &[f64], wires: &[usize]) {
    let m = wires.len();
    debug_assert_eq!(gate.len(), (1 << m) * (1 << m));
    debug_assert!(state.len() == 1 << n);
    // bit position (from LSB) of each wire
    let pos: Vec<usize> = wires.iter().map(|&w| n - 1 - w).collect();
    if m == 2 {
        apply_gate2(state, gate, pos[0], pos[1]);
        return;
    }
    let dim = 1usize << m;
    let mask: usize = pos.iter().map(|&p| 1usize << p).sum();
    let full = state.len();
    let mut amps = vec![0.0; dim];
    let mut out = vec![0.0; dim];
    // iterate over base indices with zero bits at all gate positions
    let mut base = 0usize;
    loop {
        // gather
        for loc in 0..dim {
            let mut idx = base;
            for (b, &p) in pos.iter().enumerate() {
                if (loc >> (m - 1 - b)) & 1 == 1 {
                    idx |= 1 << p;
                }
            }
            amps[loc] = state[idx];
        }
        for (r, o) in out.iter_mut().enumerate() {
            let row = &gate[r * dim..(r + 1) * dim];
            *o = row.iter().zip(&amps).map(|(g, a)| g * a).sum();
        }
        for loc in 0..dim {
            let mut idx = base;
            for (b, &p) in pos.iter().enumerate() {
                if (loc >> (m - 1 - b)) & 1 == 1 {
                    idx |= 1 << p;
                }
            }
            state[idx] = out[loc];
        }
        // next base index skipping gate bits
        base = ((base | mask) + 1) & !mask;
        if base >= full {
            break;
        }
    }
}

fn apply_gate2(state: &mut [f64], gate: &[f64], p0: usize, p1: usize) {
    let b0 = 1usize << p0;
    let b1 = 1usize << p1;
    let mask = b0 | b1;
    let full = state.len();
    let mut base = 0usize;
    loop {
        let i00 = base;
        let i01 = base | b1;
        let i10 = base | b0;
        let i11 = base | mask;
        let a00 = state[i00];
        let a01 = state[i01];
        let a10 = state[i10];
        let a11 = state[i11];
        state[i00] = gate[0] * a00 + gate[1] * a01 + gate[2] * a10 + gate[3] * a11;
        state[i01] = gate[4] * a00 + gate[5] * a01 + gate[6] * a10 + gate[7] * a11;
        state[i10] = gate[8] * a00 + gate[9] * a01 + gate[10] * a10 + gate[11] * a11;
        state[i11] = gate[12] * a00 + gate[13] * a01 + gate[14] * a10 + gate[15] * a11;
        base = ((base | mask) + 1) & !mask;
        if base >= full {
            break;
        }
    }
}

/// Apply the transpose of a gate; for orthogonal gates this is the inverse.
pub fn apply_gate_transposed(state: &mut [f64], n: usize, gate: &[f64], wires: &[usize]) {
    let dim = 1usize << wires.len();
    let mut gt = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in 0..dim {
            gt[j * dim + i] = gate[i * dim + j];
        }
    }
    apply_gate(state, n, &gt, wires);
}

/// Apply a single-qubit operator (2x2 row-major) in place.
pub fn apply_single(state: &mut [f64], n: usize, op: &[f64; 4], wire: usize) {
    let p = n - 1 - wire;
    let b = 1usize << p;
    let full = state.len();
    let mut base = 0usize;
    loop {
        let i0 = base;
        let i1 = base | b;
        let a0 = state[i0];
        let a1 = state[i1];
        state[i0] = op[0] * a0 + op[1] * a1;
        state[i1] = op[2] * a0 + op[3] * a1;
        base = ((base | b) + 1) & !b;
        if base >= full {
            break;
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Partial inner product of two equal-length states over all qubits except
/// the listed wires: returns the `2^m x 2^m` matrix
/// `E[a, b] = sum_rest bra[(a, rest)] ket[(b, rest)]`.
pub fn partial_inner(bra: &[f64], ket: &[f64], n: usize, wires: &[usize]) -> Tensor {
    let m = wires.len();
    let dim = 1usize << m;
    let pos: Vec<usize> = wires.iter().map(|&w| n - 1 - w).collect();
    let mask: usize = pos.iter().map(|&p| 1usize << p).sum();
    let full = bra.len();
    let mut env = vec![0.0; dim * dim];
    let mut idxs = vec![0usize; dim];
    let mut base = 0usize;
    loop {
        for (loc, slot) in idxs.iter_mut().enumerate() {
            let mut idx = base;
            for (b, &p) in pos.iter().enumerate() {
                if (loc >> (m - 1 - b)) & 1 == 1 {
                    idx |= 1 << p;
                }
            }
            *slot = idx;
        }
        for a in 0..dim {
            let bv = bra[idxs[a]];
            if bv == 0.0 {
                continue;
            }
            let row = &mut env[a * dim..(a + 1) * dim];
            for (b, slot) in row.iter_mut().enumerate() {
                *slot += bv * ket[idxs[b]];
            }
        }
        base = ((base | mask) + 1) & !mask;
        if base >= full {
            break;
        }
    }
    Tensor::from_data(&[dim, dim], env).expect("finite environment")
}

/// View a statevector as a rank-n tensor of qubit axes.
pub fn as_tensor(state: &[f64], n: usize) -> Tensor {
    Tensor::from_data(&vec![2; n], state.to_vec()).expect("finite state")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gates::{perturbed_identity, realize_gate};
    use crate::tensor::contract_pair;

    #[test]
    fn single_gate_matches_kron_oracle() {
        // 3 qubits, gate on wires (0, 2)
        let g = realize_gate(&perturbed_identity(2, 0.7, 5).unwrap());
        let mut state = zero_state(3).unwrap();
        // start from a non-trivial product state
        let h = [0.6, 0.8, -0.8, 0.6];
        apply_single(&mut state, 3, &h, 0);
        apply_single(&mut state, 3, &h, 1);
        let before = state.clone();
        apply_gate(&mut state, 3, g.data(), &[0, 2]);

        // oracle: contract gate tensor against the state tensor
        let st = as_tensor(&before, 3);
        let gt = g.reshape(&[2, 2, 2, 2]).unwrap();
        // gate axes: (out0, out2, in0, in2); contract in0 with qubit0, in2 with qubit2
        let out = contract_pair(&gt, &st, &[(2, 0), (3, 2)]).unwrap();
        // result axes: out0, out2, qubit1 -> permute to qubit order
        let out = out.permute(&[0, 2, 1]).unwrap();
        for (a, b) in out.data().iter().zip(&state) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn orthogonal_gates_preserve_norm() {
        let mut state = zero_state(4).unwrap();
        for seed in 0..6u64 {
            let g = realize_gate(&perturbed_identity(2, 1.2, seed).unwrap());
            let w = seed as usize % 3;
            apply_gate(&mut state, 4, g.data(), &[w, w + 1]);
        }
        assert!((norm(&state) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn transpose_undoes_gate() {
        let g = realize_gate(&perturbed_identity(2, 0.9, 2).unwrap());
        let mut state = zero_state(3).unwrap();
        apply_single(&mut state, 3, &[0.6, 0.8, -0.8, 0.6], 1);
        let before = state.clone();
        apply_gate(&mut state, 3, g.data(), &[1, 2]);
        apply_gate_transposed(&mut state, 3, g.data(), &[1, 2]);
        for (a, b) in before.iter().zip(&state) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn partial_inner_traces_out_rest() {
        let mut a = zero_state(3).unwrap();
        let mut b = zero_state(3).unwrap();
        apply_single(&mut a, 3, &[0.6, 0.8, -0.8, 0.6], 0);
        apply_single(&mut b, 3, &[0.0, 1.0, 1.0, 0.0], 2);
        let env = partial_inner(&a, &b, 3, &[1]);
        // full dot equals the trace of the environment
        let full_dot = dot(&a, &b);
        let tr = env.get(&[0, 0]) + env.get(&[1, 1]);
        assert!((full_dot - tr).abs() < 1e-14);
    }

    #[test]
    fn size_limit_is_enforced() {
        assert!(zero_state(MAX_STATEVECTOR_QUBITS + 1).is_err());
    }
}
