//! Dense MPS/MPO machinery: canonical forms, overlaps, expectation values,
//! circuit-to-MPS conversion and the two-site DMRG baseline.
//!
//! Site tensors are `[left_bond, phys, right_bond]`; MPO cores are
//! `[left_bond, phys_out, phys_in, right_bond]`. Boundary bonds have
//! dimension 1. Site 0 is the most significant qubit of the densified state,
//! matching the statevector convention.

use crate::ansatz::AnsatzDescriptor;
use crate::error::{QtnError, Result};
use crate::gates::realize_gate;
use crate::linalg::lanczos_lowest;
use crate::statevector;
use crate::tensor::{contract_pair, FactorSide, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::io::{Read, Write};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CanonicalForm {
    None,
    Left,
    Right,
    Mixed(usize),
}

/// Dense matrix product state.
#[derive(Debug, Clone)]
pub struct Mps {
    pub tensors: Vec<Tensor>,
    pub canonical: CanonicalForm,
}

/// Dense matrix product operator.
#[derive(Debug, Clone)]
pub struct Mpo {
    pub tensors: Vec<Tensor>,
}

impl Mps {
    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn phys_dim(&self) -> usize {
        self.tensors.first().map(|t| t.shape()[1]).unwrap_or(0)
    }

    pub fn max_bond(&self) -> usize {
        self.tensors
            .iter()
            .map(|t| t.shape()[2])
            .max()
            .unwrap_or(0)
    }

    pub fn bond_dims(&self) -> Vec<usize> {
        self.tensors.iter().map(|t| t.shape()[2]).collect()
    }

    /// Product state `|0...0>` of `l` qubits.
    pub fn zero_product(l: usize) -> Self {
        let tensors = (0..l)
            .map(|_| Tensor::from_data(&[1, 2, 1], vec![1.0, 0.0]).unwrap())
            .collect();
        Mps {
            tensors,
            canonical: CanonicalForm::Right,
        }
    }

    /// Random MPS with bonds capped at `max_bond`, right-canonicalized.
    pub fn random(l: usize, max_bond: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bond = |i: usize| -> usize {
            let left = 1usize << i.min(20);
            let right = 1usize << (l - i).min(20);
            left.min(right).min(max_bond)
        };
        let tensors: Vec<Tensor> = (0..l)
            .map(|i| {
                let (dl, dr) = (bond(i), bond(i + 1));
                let data = (0..dl * 2 * dr)
                    .map(|_| rng.random_range(-1.0..1.0))
                    .collect();
                Tensor::from_data(&[dl, 2, dr], data).unwrap()
            })
            .collect();
        let mut m = Mps {
            tensors,
            canonical: CanonicalForm::None,
        };
        m.canonicalize(CanonicalForm::Right);
        m
    }

    pub fn norm(&self) -> f64 {
        overlap(self, self).max(0.0).sqrt()
    }

    /// Bring into the requested canonical form; normalizes to 1 and leaves
    /// the state unchanged up to a global sign.
    pub fn canonicalize(&mut self, form: CanonicalForm) {
        match form {
            CanonicalForm::Left => {
                self.sweep_left_canonical(self.len());
                self.canonical = CanonicalForm::Left;
            }
            CanonicalForm::Right => {
                self.sweep_right_canonical(0);
                self.canonical = CanonicalForm::Right;
            }
            CanonicalForm::Mixed(c) => {
                let c = c.min(self.len() - 1);
                self.sweep_right_canonical(0);
                self.sweep_left_canonical(c);
                // normalize the center tensor
                let n = self.tensors[c].norm();
                if n > 0.0 {
                    self.tensors[c] = self.tensors[c].scale(1.0 / n);
                }
                self.canonical = CanonicalForm::Mixed(c);
            }
            CanonicalForm::None => self.canonical = CanonicalForm::None,
        }
    }

    /// QR sweep making sites `0..stop` left-isometric.
    fn sweep_left_canonical(&mut self, stop: usize) {
        let l = self.len();
        for i in 0..stop {
            let (q, r) = self.tensors[i].qr_or_lq(2, FactorSide::Left).unwrap();
            if i + 1 < l {
                self.tensors[i] = q;
                self.tensors[i + 1] = contract_pair(&r, &self.tensors[i + 1], &[(1, 0)]).unwrap();
            } else {
                // discard the trailing scalar: normalizes up to global sign
                self.tensors[i] = q;
            }
        }
    }

    /// LQ sweep making sites `start..L` right-isometric.
    fn sweep_right_canonical(&mut self, start: usize) {
        for i in (start..self.len()).rev() {
            let (l_fac, q) = self.tensors[i].qr_or_lq(1, FactorSide::Right).unwrap();
            if i > start {
                self.tensors[i] = q;
                self.tensors[i - 1] =
                    contract_pair(&self.tensors[i - 1], &l_fac, &[(2, 0)]).unwrap();
            } else if i == 0 {
                self.tensors[i] = q;
            } else {
                self.tensors[i] = q;
                self.tensors[i - 1] =
                    contract_pair(&self.tensors[i - 1], &l_fac, &[(2, 0)]).unwrap();
            }
        }
    }

    /// Largest deviation from the site-wise isometry condition of the form.
    pub fn isometry_residual(&self, form: CanonicalForm) -> f64 {
        let mut worst = 0.0f64;
        for (i, t) in self.tensors.iter().enumerate() {
            let check_left = match form {
                CanonicalForm::Left => true,
                CanonicalForm::Mixed(c) => i < c,
                _ => false,
            };
            let check_right = match form {
                CanonicalForm::Right => true,
                CanonicalForm::Mixed(c) => i > c,
                _ => false,
            };
            if check_left {
                let g = contract_pair(t, t, &[(0, 0), (1, 1)]).unwrap();
                let n = g.shape()[0];
                for a in 0..n {
                    for b in 0..n {
                        let expect = if a == b { 1.0 } else { 0.0 };
                        worst = worst.max((g.get(&[a, b]) - expect).abs());
                    }
                }
            }
            if check_right {
                let g = contract_pair(t, t, &[(1, 1), (2, 2)]).unwrap();
                let n = g.shape()[0];
                for a in 0..n {
                    for b in 0..n {
                        let expect = if a == b { 1.0 } else { 0.0 };
                        worst = worst.max((g.get(&[a, b]) - expect).abs());
                    }
                }
            }
        }
        worst
    }

    /// Exact bond trimming: two SVD sweeps dropping singular values below
    /// `cutoff` relative to the largest; ends right-canonical.
    pub fn trim(&mut self, cutoff: f64) {
        let l = self.len();
        // left-to-right: absorb into the next site
        for i in 0..l - 1 {
            let (u, s, vt, _w) = self.tensors[i].svd_truncated(2, usize::MAX, cutoff).unwrap();
            let k = s.shape()[0];
            let mut sv = vt.clone();
            for a in 0..k {
                for b in 0..sv.shape()[1] {
                    let v = sv.get(&[a, b]) * s.get(&[a]);
                    sv.set(&[a, b], v);
                }
            }
            self.tensors[i] = u;
            self.tensors[i + 1] = contract_pair(&sv, &self.tensors[i + 1], &[(1, 0)]).unwrap();
        }
        // right-to-left: back to right-canonical
        for i in (1..l).rev() {
            let (u, s, vt, _w) = self.tensors[i].svd_truncated(1, usize::MAX, cutoff).unwrap();
            let k = s.shape()[0];
            let mut us = u.clone();
            for a in 0..us.shape()[0] {
                for b in 0..k {
                    let v = us.get(&[a, b]) * s.get(&[b]);
                    us.set(&[a, b], v);
                }
            }
            self.tensors[i] = vt;
            self.tensors[i - 1] = contract_pair(&self.tensors[i - 1], &us, &[(2, 0)]).unwrap();
        }
        // leading site may carry the norm; keep it
        self.canonical = CanonicalForm::Right;
    }

    /// Densify into a statevector (site 0 = most significant qubit).
    pub fn densify(&self) -> Result<Vec<f64>> {
        let l = self.len();
        if l > statevector::MAX_STATEVECTOR_QUBITS {
            return Err(QtnError::SizeLimit(format!(
                "cannot densify {} sites",
                l
            )));
        }
        let mut acc = self.tensors[0].clone(); // [1, d, r]
        let mut phys: usize = acc.shape()[1];
        for t in &self.tensors[1..] {
            acc = contract_pair(&acc, t, &[(acc.rank() - 1, 0)]).unwrap();
            phys *= t.shape()[1];
        }
        // shape [1, d, d, ..., d, 1]
        let flat = acc.reshape(&[phys]).unwrap();
        Ok(flat.into_data())
    }

    /// Exact MPS factorization of a dense statevector by successive SVDs,
    /// dropping singular values below `cutoff` relative to the largest.
    /// Returned right-canonical and normalized.
    pub fn from_statevector(v: &[f64], cutoff: f64) -> Result<Self> {
        let len = v.len();
        if !len.is_power_of_two() || len < 2 {
            return Err(QtnError::Shape(format!(
                "statevector length {len} is not a power of two"
            )));
        }
        let l = len.trailing_zeros() as usize;
        let mut tensors: Vec<Tensor> = Vec::with_capacity(l);
        let mut rest = Tensor::from_data(&[1, len], v.to_vec())?;
        for site in 0..l {
            let bond = rest.shape()[0];
            let cols = rest.shape()[1] / 2;
            let m = rest.reshape(&[bond * 2, cols])?;
            if site + 1 == l {
                tensors.push(m.reshape(&[bond, 2, cols])?);
                break;
            }
            let (u, s, vt, _w) = m.svd_truncated(1, usize::MAX, cutoff)?;
            let k = s.shape()[0];
            tensors.push(u.reshape(&[bond, 2, k])?);
            let mut sv = vt;
            {
                let data = sv.data_mut();
                for a in 0..k {
                    let f = s.get(&[a]);
                    for c in 0..cols {
                        data[a * cols + c] *= f;
                    }
                }
            }
            rest = sv;
        }
        let mut mps = Mps {
            tensors,
            canonical: CanonicalForm::None,
        };
        mps.canonicalize(CanonicalForm::Right);
        Ok(mps)
    }

    /// Binary checkpoint: shapes and raw little-endian doubles.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf: Vec<u8> = Vec::new();
        buf.extend_from_slice(b"QMPS");
        buf.extend_from_slice(&1u32.to_le_bytes());
        buf.extend_from_slice(&(self.len() as u64).to_le_bytes());
        for t in &self.tensors {
            for d in t.shape() {
                buf.extend_from_slice(&(*d as u64).to_le_bytes());
            }
            for x in t.data() {
                buf.extend_from_slice(&x.to_le_bytes());
            }
        }
        let mut f = std::fs::File::create(path)
            .map_err(|e| QtnError::io(path.display().to_string(), e))?;
        f.write_all(&buf)
            .map_err(|e| QtnError::io(path.display().to_string(), e))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| QtnError::io(path.display().to_string(), e))?;
        let mut pos = 0usize;
        let take = |pos: &mut usize, n: usize| -> Result<&[u8]> {
            if *pos + n > bytes.len() {
                return Err(QtnError::Shape("truncated MPS checkpoint".into()));
            }
            let s = &bytes[*pos..*pos + n];
            *pos += n;
            Ok(s)
        };
        if take(&mut pos, 4)? != b"QMPS" {
            return Err(QtnError::Shape("bad MPS checkpoint magic".into()));
        }
        let _ver = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap());
        let l = u64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap()) as usize;
        let mut tensors = Vec::with_capacity(l);
        for _ in 0..l {
            let mut shape = [0usize; 3];
            for s in shape.iter_mut() {
                *s = u64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap()) as usize;
            }
            let n: usize = shape.iter().product();
            let mut data = Vec::with_capacity(n);
            for _ in 0..n {
                data.push(f64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap()));
            }
            tensors.push(Tensor::from_data(&shape, data)?);
        }
        Ok(Mps {
            tensors,
            canonical: CanonicalForm::None,
        })
    }
}

/// Inner product `<a|b>` by left-to-right transfer contraction.
pub fn overlap(a: &Mps, b: &Mps) -> f64 {
    assert_eq!(a.len(), b.len(), "overlap needs equal lengths");
    let mut env = Tensor::eye(1);
    for (ta, tb) in a.tensors.iter().zip(&b.tensors) {
        assert_eq!(ta.shape()[1], tb.shape()[1], "physical dimension mismatch");
        // env [la, lb] * A [la, s, ra] -> [lb, s, ra]
        let t = contract_pair(&env, ta, &[(0, 0)]).unwrap();
        // [lb, s, ra] * B [lb, s, rb] -> [ra, rb]
        env = contract_pair(&t, tb, &[(0, 0), (1, 1)]).unwrap();
    }
    env.scalar_value().expect("closed transfer chain")
}

/// Exact `<m|H|m>` with no truncation.
pub fn mpo_expectation(m: &Mps, h: &Mpo) -> f64 {
    assert_eq!(m.len(), h.tensors.len(), "mpo_expectation length mismatch");
    let mut env = Tensor::from_data(&[1, 1, 1], vec![1.0]).unwrap();
    for (a, w) in m.tensors.iter().zip(&h.tensors) {
        env = transfer_left(&env, a, w, a);
    }
    env.scalar_value().expect("closed sandwich chain")
}

/// One-site step of the bra/MPO/ket sandwich transfer from the left:
/// env [a, w, b] -> [a', w', b'].
pub fn transfer_left(env: &Tensor, bra: &Tensor, w: &Tensor, ket: &Tensor) -> Tensor {
    // env [a, w, b] * bra [a, s', a'] -> [w, b, s', a']
    let t1 = contract_pair(env, bra, &[(0, 0)]).unwrap();
    // * W [w, s', s, w'] over (w, s') -> [b, a', s, w']
    let t2 = contract_pair(&t1, w, &[(0, 0), (2, 1)]).unwrap();
    // * ket [b, s, b'] over (b, s) -> [a', w', b']
    contract_pair(&t2, ket, &[(0, 0), (2, 1)]).unwrap()
}

/// Mirror of [`transfer_left`] moving right-to-left.
pub fn transfer_right(env: &Tensor, bra: &Tensor, w: &Tensor, ket: &Tensor) -> Tensor {
    // env [a', w', b'] * bra [a, s', a'] -> [w', b', a, s']
    let t1 = contract_pair(env, bra, &[(0, 2)]).unwrap();
    // * W [w, s', s, w'] over (w', s') -> [b', a, w, s]
    let t2 = contract_pair(&t1, w, &[(0, 3), (3, 1)]).unwrap();
    // * ket [b, s, b'] over (b', s) -> [a, w, b]
    let t3 = contract_pair(&t2, ket, &[(0, 2), (3, 1)]).unwrap();
    t3
}

// ---------------------------------------------------------------------------
// circuit-to-MPS conversion
// ---------------------------------------------------------------------------

/// Forward data of the sequential block construction, kept for the adjoint
/// pass of the MPS-path gradients.
pub struct BlockForward {
    /// Per block: unitary stored input-major (`u[in][out]`), width in wires,
    /// fresh wire count.
    pub blocks: Vec<BlockUnitary>,
    pub mps: Mps,
}

pub struct BlockUnitary {
    pub u_in_out: Vec<f64>,
    pub width: usize,
    pub fresh: usize,
    /// Index of the produced MPS site (blocks here always emit one site).
    pub site: usize,
    /// Gate indices into the descriptor, execution order.
    pub gate_indices: Vec<usize>,
}

/// Build each block's unitary and the resulting site tensors without any
/// truncation. Requires a sequential (block-structured) descriptor.
/// Emission-2 blocks (regrouped brick-wall circuits) are split exactly with
/// LQ factorizations.
pub fn qmps_block_mps(desc: &AnsatzDescriptor) -> Result<Mps> {
    Ok(block_forward(desc)?.mps)
}

/// Conversion with exact rank trimming; right-canonical by construction.
pub fn qmps_to_dense_mps(desc: &AnsatzDescriptor) -> Result<Mps> {
    let mut m = qmps_block_mps(desc)?;
    m.trim(1e-14);
    m.canonical = CanonicalForm::Right;
    Ok(m)
}

pub fn block_forward(desc: &AnsatzDescriptor) -> Result<BlockForward> {
    if desc.blocks.is_empty() {
        return Err(QtnError::UnsupportedFamily(format!(
            "{} carries no sequential block structure",
            desc.family.as_str()
        )));
    }
    desc.validate()?;
    let emits = desc.block_emissions();
    let mut site_tensors: Vec<Tensor> = Vec::with_capacity(desc.l);
    let mut blocks_fwd: Vec<BlockUnitary> = Vec::new();
    let mut pending: Option<Tensor> = None; // [mps_bond, register]
    let mut prev_hi: i64 = -1;

    for (b, span) in desc.blocks.iter().enumerate() {
        let w = span.width();
        if w > 24 {
            return Err(QtnError::SizeLimit(format!(
                "block width {w} too large for dense block construction"
            )));
        }
        let dim = 1usize << w;
        let fresh = (span.hi as i64 - prev_hi).max(0) as usize;
        let bond_in_wires = w - fresh;
        prev_hi = span.hi as i64;

        // unitary stored input-major: row `in` is the block's action on that
        // basis input, a state over the out register
        let mut u = vec![0.0; dim * dim];
        for i in 0..dim {
            u[i * dim + i] = 1.0;
        }
        let gate_indices: Vec<usize> = desc
            .gates
            .iter()
            .enumerate()
            .filter(|(_, g)| g.block == b)
            .map(|(k, _)| k)
            .collect();
        for &gi in &gate_indices {
            let g = &desc.gates[gi];
            let mat = realize_gate(&g.params);
            let local: Vec<usize> = g.wires.iter().map(|&x| x - span.lo).collect();
            for row in u.chunks_mut(dim) {
                statevector::apply_gate(row, w, mat.data(), &local);
            }
        }

        // restrict to |0> on the fresh wires (low bits of the input index)
        let bond_dim = 1usize << bond_in_wires;
        let mut mega_rows: Vec<f64> = Vec::with_capacity(bond_dim * dim);
        for l_idx in 0..bond_dim {
            let in_idx = l_idx << fresh;
            mega_rows.extend_from_slice(&u[in_idx * dim..(in_idx + 1) * dim]);
        }
        let e = emits[b];
        let mut mega = Tensor::from_data(&[bond_dim, 1 << e, dim >> e], mega_rows)?;
        if let Some(p) = pending.take() {
            mega = contract_pair(&p, &mega, &[(1, 0)])?;
        }
        blocks_fwd.push(BlockUnitary {
            u_in_out: u,
            width: w,
            fresh,
            site: site_tensors.len(),
            gate_indices,
        });
        if e == 0 {
            // pure bond transformation; carry into the next block
            let flat = mega.reshape(&[mega.shape()[0], mega.shape()[2]])?;
            pending = Some(flat);
            continue;
        }
        // peel the emitted sites off the front
        let mut rest = mega; // [bond, 2^e, r]
        for s in 0..e {
            let left = rest.shape()[0];
            let remaining = e - s - 1;
            let r = rest.shape()[2];
            let reshaped = rest.reshape(&[left, 2, (1 << remaining) * r])?;
            if remaining == 0 {
                site_tensors.push(reshaped);
                break;
            }
            let (l_fac, qf) = reshaped
                .reshape(&[left * 2, (1 << remaining) * r])?
                .qr_or_lq(1, FactorSide::Right)?;
            let k = l_fac.shape()[1];
            site_tensors.push(l_fac.reshape(&[left, 2, k])?);
            rest = qf.reshape(&[k, 1 << remaining, r])?;
        }
    }
    if pending.is_some() {
        return Err(QtnError::InvalidAnsatz(
            "block structure left a dangling bond".into(),
        ));
    }
    if site_tensors.len() != desc.l {
        return Err(QtnError::InvalidAnsatz(format!(
            "block construction produced {} sites for {} wires",
            site_tensors.len(),
            desc.l
        )));
    }
    Ok(BlockForward {
        blocks: blocks_fwd,
        mps: Mps {
            tensors: site_tensors,
            canonical: CanonicalForm::Right,
        },
    })
}

// ---------------------------------------------------------------------------
// DMRG
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct DmrgResult {
    pub mps: Mps,
    pub energy_trace: Vec<f64>,
    pub converged: bool,
}

/// Two-site DMRG ground-state search with bond cap `max_bond` and truncation
/// cutoff 1e-12. Deterministic for a fixed seed. Returns the trace of
/// per-sweep energies; `converged` reflects the relative-change criterion.
pub fn dmrg_ground_state(
    h: &Mpo,
    max_bond: usize,
    max_sweeps: usize,
    rel_tol: f64,
    seed: u64,
) -> Result<DmrgResult> {
    if max_bond < 1 {
        return Err(QtnError::InvalidArgument("bond dimension must be >= 1".into()));
    }
    let l = h.tensors.len();
    if l < 2 {
        return Err(QtnError::InvalidArgument("DMRG needs at least 2 sites".into()));
    }
    let cutoff = 1e-12;
    let mut mps = Mps::random(l, max_bond, seed);

    // right environments re[i] covers sites i..L-1; re[L] = scalar 1
    let one3 = Tensor::from_data(&[1, 1, 1], vec![1.0]).unwrap();
    let mut re: Vec<Tensor> = vec![one3.clone(); l + 1];
    for i in (2..l).rev() {
        re[i] = transfer_right(&re[i + 1], &mps.tensors[i], &h.tensors[i], &mps.tensors[i]);
    }
    let mut le: Vec<Tensor> = vec![one3.clone(); l + 1]; // le[i+1] covers 0..=i

    let mut trace: Vec<f64> = Vec::new();
    let mut converged = false;

    for _sweep in 0..max_sweeps {
        // left-to-right
        for i in 0..l - 1 {
            let theta = solve_two_site(&mps, h, &le[i], &re[i + 2], i);
            let (u, s, vt, _w) = theta.svd_truncated(2, max_bond, cutoff)?;
            let k = s.shape()[0];
            let sn: f64 = (0..k).map(|a| s.get(&[a]).powi(2)).sum::<f64>().sqrt();
            // absorb the renormalized spectrum into the right tensor
            let mut svt = vt.clone();
            let r_cols: usize = svt.shape()[1] * svt.shape()[2];
            {
                let data = svt.data_mut();
                for a in 0..k {
                    let f = s.get(&[a]) / sn;
                    for c in 0..r_cols {
                        data[a * r_cols + c] *= f;
                    }
                }
            }
            mps.tensors[i] = u;
            mps.tensors[i + 1] = svt;
            le[i + 1] = transfer_left(&le[i], &mps.tensors[i], &h.tensors[i], &mps.tensors[i]);
        }
        // right-to-left
        let mut last_energy = 0.0;
        for i in (0..l - 1).rev() {
            let theta = solve_two_site(&mps, h, &le[i], &re[i + 2], i);
            let (u, s, vt, _w) = theta.svd_truncated(2, max_bond, cutoff)?;
            let k = s.shape()[0];
            let sn: f64 = (0..k).map(|a| s.get(&[a]).powi(2)).sum::<f64>().sqrt();
            let mut us = u.clone();
            {
                let rows = us.shape()[0] * us.shape()[1];
                let data = us.data_mut();
                for r in 0..rows {
                    for a in 0..k {
                        data[r * k + a] *= s.get(&[a]) / sn;
                    }
                }
            }
            mps.tensors[i] = us;
            mps.tensors[i + 1] = vt;
            re[i + 1] = transfer_right(
                &re[i + 2],
                &mps.tensors[i + 1],
                &h.tensors[i + 1],
                &mps.tensors[i + 1],
            );
            if i == 0 {
                last_energy = mpo_expectation(&mps, h);
            }
        }
        trace.push(last_energy);
        let n = trace.len();
        if n >= 2 {
            let (e0, e1) = (trace[n - 2], trace[n - 1]);
            if (e1 - e0).abs() / e0.abs().max(1e-300) < rel_tol {
                converged = true;
                break;
            }
        }
    }
    mps.canonical = CanonicalForm::Mixed(0);
    Ok(DmrgResult {
        mps,
        energy_trace: trace,
        converged,
    })
}

/// Lowest eigenvector of the two-site effective Hamiltonian at `(i, i+1)`,
/// warm-started from the current tensors.
fn solve_two_site(mps: &Mps, h: &Mpo, le: &Tensor, re: &Tensor, i: usize) -> Tensor {
    let theta0 = contract_pair(&mps.tensors[i], &mps.tensors[i + 1], &[(2, 0)]).unwrap();
    let shape = theta0.shape().to_vec(); // [a, s1, s2, b]
    let dim = theta0.len();
    let wi = &h.tensors[i];
    let wj = &h.tensors[i + 1];
    let apply = |x: &[f64], out: &mut [f64]| {
        let xt = Tensor::from_data(&shape, x.to_vec()).unwrap();
        // le [a', w, a] * x [a, s1, s2, b] -> [a', w, s1, s2, b]
        let t1 = contract_pair(le, &xt, &[(2, 0)]).unwrap();
        // * Wi [w, s1', s1, wm] over (w, s1) -> [a', s2, b, s1', wm]
        let t2 = contract_pair(&t1, wi, &[(1, 0), (2, 2)]).unwrap();
        // * Wj [wm, s2', s2, wr] over (wm, s2) -> [a', b, s1', s2', wr]
        let t3 = contract_pair(&t2, wj, &[(4, 0), (1, 2)]).unwrap();
        // * re [b', wr, b] over (b, wr) -> [a', s1', s2', b']
        let t4 = contract_pair(&t3, re, &[(1, 2), (4, 1)]).unwrap();
        out.copy_from_slice(t4.data());
    };
    let init: Vec<f64> = theta0.data().to_vec();
    let res = lanczos_lowest(dim, apply, 1, 7, 1e-11, Some(&init));
    Tensor::from_data(&shape, res.vectors[0].clone()).unwrap()
}

// ---------------------------------------------------------------------------
// MPO utilities
// ---------------------------------------------------------------------------

impl Mpo {
    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn bond_dims(&self) -> Vec<usize> {
        self.tensors.iter().map(|t| t.shape()[3]).collect()
    }

    /// Densify into a `2^L x 2^L` row-major matrix (tests and small oracles).
    pub fn densify(&self) -> Result<Tensor> {
        let l = self.len();
        if l > 12 {
            return Err(QtnError::SizeLimit("MPO densify capped at 12 sites".into()));
        }
        // acc [out, in, r]
        let mut acc = Tensor::from_data(&[1, 1, 1], vec![1.0]).unwrap();
        for w in &self.tensors {
            // acc [o, i, r] * w [r, s', s, r'] -> [o, i, s', s, r']
            let t = contract_pair(&acc, w, &[(2, 0)]).unwrap();
            let (o, i) = (t.shape()[0], t.shape()[1]);
            let rp = t.shape()[4];
            // -> [o, s', i, s, r'] -> [(o s'), (i s), r']
            acc = t
                .permute(&[0, 2, 1, 3, 4])
                .unwrap()
                .reshape(&[o * 2, i * 2, rp])
                .unwrap();
        }
        let n = acc.shape()[0];
        acc.reshape(&[n, n])
    }

    /// Bond compression: QR sweep left-to-right, then an SVD sweep back with
    /// the given relative cutoff.
    pub fn compress(&mut self, cutoff: f64) {
        let l = self.len();
        if l < 2 {
            return;
        }
        for i in 0..l - 1 {
            let (q, r) = self.tensors[i].qr_or_lq(3, FactorSide::Left).unwrap();
            self.tensors[i] = q;
            self.tensors[i + 1] = contract_pair(&r, &self.tensors[i + 1], &[(1, 0)]).unwrap();
        }
        for i in (1..l).rev() {
            let (u, s, vt, _w) = self.tensors[i].svd_truncated(1, usize::MAX, cutoff).unwrap();
            let k = s.shape()[0];
            let mut us = u.clone();
            {
                let rows = us.shape()[0];
                let data = us.data_mut();
                for r in 0..rows {
                    for a in 0..k {
                        data[r * k + a] *= s.get(&[a]);
                    }
                }
            }
            self.tensors[i] = vt;
            self.tensors[i - 1] = contract_pair(&self.tensors[i - 1], &us, &[(3, 0)]).unwrap();
        }
    }
}
