//! Dense real tensors with row-major storage.
//!
//! Contractions follow an explicit permute-then-matrix-multiply strategy:
//! contracted axes are moved to the back (front) of the left (right) operand,
//! both operands are matricized and multiplied. Factorizations (QR/LQ, SVD)
//! operate on a matricization defined by splitting the axis list at a given
//! position; callers permute first if they need a different grouping.

use crate::error::{QtnError, Result};
use nalgebra::DMatrix;

/// Dense multi-dimensional real array. The universal contraction currency.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
    labels: Option<Vec<String>>,
}

/// Which side of a matricized tensor receives the orthogonal factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorSide {
    /// `M = Q R` with `Q` column-orthonormal and `R` upper-triangular.
    Left,
    /// `M = L Q` with `Q` row-orthonormal and `L` lower-triangular.
    Right,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; len],
            labels: None,
        }
    }

    pub fn from_data(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let expect: usize = shape.iter().product();
        if expect != data.len() {
            return Err(QtnError::Shape(format!(
                "shape {:?} wants {} entries, got {}",
                shape,
                expect,
                data.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(QtnError::Shape("non-finite entry in tensor data".into()));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
            labels: None,
        })
    }

    pub fn scalar(x: f64) -> Self {
        Tensor {
            shape: vec![],
            data: vec![x],
            labels: None,
        }
    }

    /// Identity matrix as a rank-2 tensor.
    pub fn eye(n: usize) -> Self {
        let mut t = Tensor::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.shape.len() {
            return Err(QtnError::Shape(format!(
                "{} labels for rank-{} tensor",
                labels.len(),
                self.shape.len()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// Value of the single entry of a rank-0 tensor.
    pub fn scalar_value(&self) -> Result<f64> {
        if self.data.len() != 1 {
            return Err(QtnError::Shape(format!(
                "expected scalar, shape is {:?}",
                self.shape
            )));
        }
        Ok(self.data[0])
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.flat_index(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: f64) {
        let k = self.flat_index(idx);
        self.data[k] = v;
    }

    fn flat_index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.shape.len());
        let mut k = 0;
        for (i, &x) in idx.iter().enumerate() {
            debug_assert!(x < self.shape[i]);
            k = k * self.shape[i] + x;
        }
        k
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn scale(&self, a: f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|x| a * x).collect(),
            labels: self.labels.clone(),
        }
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        if self.shape != other.shape {
            return Err(QtnError::Shape(format!(
                "add shape mismatch {:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Tensor {
            shape: self.shape.clone(),
            data,
            labels: None,
        })
    }

    /// Reinterpret the data with a new shape of the same total length.
    pub fn reshape(&self, new_shape: &[usize]) -> Result<Tensor> {
        let expect: usize = new_shape.iter().product();
        if expect != self.data.len() {
            return Err(QtnError::Shape(format!(
                "cannot reshape {:?} ({} entries) into {:?} ({} entries)",
                self.shape,
                self.data.len(),
                new_shape,
                expect
            )));
        }
        Ok(Tensor {
            shape: new_shape.to_vec(),
            data: self.data.clone(),
            labels: None,
        })
    }

    /// Reorder axes. `perm[k]` is the source axis that becomes axis `k`.
    pub fn permute(&self, perm: &[usize]) -> Result<Tensor> {
        let r = self.shape.len();
        if perm.len() != r {
            return Err(QtnError::Shape(format!(
                "permutation {:?} for rank-{} tensor",
                perm, r
            )));
        }
        let mut seen = vec![false; r];
        for &p in perm {
            if p >= r || seen[p] {
                return Err(QtnError::Shape(format!("invalid permutation {:?}", perm)));
            }
            seen[p] = true;
        }
        if perm.iter().enumerate().all(|(k, &p)| k == p) {
            return Ok(self.clone());
        }
        let new_shape: Vec<usize> = perm.iter().map(|&p| self.shape[p]).collect();
        // strides of the source tensor
        let mut src_strides = vec![1usize; r];
        for i in (0..r.saturating_sub(1)).rev() {
            src_strides[i] = src_strides[i + 1] * self.shape[i + 1];
        }
        let perm_strides: Vec<usize> = perm.iter().map(|&p| src_strides[p]).collect();
        let mut data = vec![0.0; self.data.len()];
        let mut idx = vec![0usize; r];
        let mut src = 0usize;
        for slot in data.iter_mut() {
            *slot = self.data[src];
            // odometer increment over the destination index
            for ax in (0..r).rev() {
                idx[ax] += 1;
                src += perm_strides[ax];
                if idx[ax] < new_shape[ax] {
                    break;
                }
                src -= perm_strides[ax] * new_shape[ax];
                idx[ax] = 0;
            }
        }
        let labels = self
            .labels
            .as_ref()
            .map(|ls| perm.iter().map(|&p| ls[p].clone()).collect());
        Ok(Tensor {
            shape: new_shape,
            data,
            labels,
        })
    }

    /// Permute axes, then regroup into a new shape. Bijective on entries:
    /// composing with the inverse permutation/grouping restores the input
    /// exactly.
    pub fn permute_reshape(&self, perm: &[usize], new_shape: &[usize]) -> Result<Tensor> {
        self.permute(perm)?.reshape(new_shape)
    }

    fn matricize(&self, split_at: usize) -> Result<(usize, usize)> {
        if split_at > self.shape.len() {
            return Err(QtnError::Shape(format!(
                "split {} beyond rank {}",
                split_at,
                self.shape.len()
            )));
        }
        let rows: usize = self.shape[..split_at].iter().product();
        let cols: usize = self.shape[split_at..].iter().product();
        if rows == 0 || cols == 0 {
            return Err(QtnError::Shape("zero dimension in matricization".into()));
        }
        Ok((rows, cols))
    }

    /// QR (left) or LQ (right) factorization of the tensor matricized by
    /// splitting its axes at `split_at`.
    ///
    /// Left: returns `(Q, R)` with `Q` shaped as the row axes plus a new bond
    /// of size `min(rows, cols)` and `QᵀQ = I`. Right: returns `(L, Q)` with
    /// `Q` row-orthonormal on the column axes. The contraction of the two
    /// factors over the bond reconstructs the input.
    pub fn qr_or_lq(&self, split_at: usize, side: FactorSide) -> Result<(Tensor, Tensor)> {
        let (rows, cols) = self.matricize(split_at)?;
        let k = rows.min(cols);
        match side {
            FactorSide::Left => {
                let m = DMatrix::from_row_slice(rows, cols, &self.data);
                let qr = m.qr();
                let (q, r) = (qr.q(), qr.r());
                let mut q_shape: Vec<usize> = self.shape[..split_at].to_vec();
                q_shape.push(k);
                let mut r_shape = vec![k];
                r_shape.extend_from_slice(&self.shape[split_at..]);
                let q_t = Tensor::from_data(&q_shape, row_major(&q))?;
                let r_t = Tensor::from_data(&r_shape, row_major(&r))?;
                Ok((q_t, r_t))
            }
            FactorSide::Right => {
                // LQ of M is the transpose of the QR of Mᵀ.
                let mt = DMatrix::from_row_slice(rows, cols, &self.data).transpose();
                let qr = mt.qr();
                let (q, r) = (qr.q(), qr.r());
                let l = r.transpose(); // rows x k
                let qt = q.transpose(); // k x cols
                let mut l_shape: Vec<usize> = self.shape[..split_at].to_vec();
                l_shape.push(k);
                let mut q_shape = vec![k];
                q_shape.extend_from_slice(&self.shape[split_at..]);
                let l_t = Tensor::from_data(&l_shape, row_major(&l))?;
                let q_t = Tensor::from_data(&q_shape, row_major(&qt))?;
                Ok((l_t, q_t))
            }
        }
    }

    /// Truncated SVD of the matricization at `split_at`.
    ///
    /// Keeps at most `max_rank` singular values and drops any with
    /// `s[i] <= cutoff * s[0]`; at least one value is always kept. Returns
    /// `(U, S, Vt, discarded_weight)` where `U` carries the row axes plus the
    /// kept bond, `S` is the kept spectrum (descending), `Vt` carries the bond
    /// plus the column axes, and `discarded_weight` is the sum of squares of
    /// the dropped singular values.
    pub fn svd_truncated(
        &self,
        split_at: usize,
        max_rank: usize,
        cutoff: f64,
    ) -> Result<(Tensor, Tensor, Tensor, f64)> {
        if max_rank == 0 {
            return Err(QtnError::InvalidArgument("max_rank must be >= 1".into()));
        }
        if cutoff < 0.0 {
            return Err(QtnError::InvalidArgument("cutoff must be >= 0".into()));
        }
        let (rows, cols) = self.matricize(split_at)?;
        let m = DMatrix::from_row_slice(rows, cols, &self.data);
        let svd = m.svd(true, true);
        let u = svd.u.as_ref().expect("svd requested u");
        let vt = svd.v_t.as_ref().expect("svd requested v_t");
        let s = &svd.singular_values;
        let full = s.len();
        let smax = if full > 0 { s[0] } else { 0.0 };
        let mut keep = 0usize;
        for i in 0..full {
            if keep >= max_rank {
                break;
            }
            if i > 0 && s[i] <= cutoff * smax {
                break;
            }
            keep += 1;
        }
        keep = keep.max(1).min(full);
        let discarded: f64 = (keep..full).map(|i| s[i] * s[i]).sum();

        let mut u_shape: Vec<usize> = self.shape[..split_at].to_vec();
        u_shape.push(keep);
        let mut u_data = vec![0.0; rows * keep];
        for r in 0..rows {
            for c in 0..keep {
                u_data[r * keep + c] = u[(r, c)];
            }
        }
        let mut vt_shape = vec![keep];
        vt_shape.extend_from_slice(&self.shape[split_at..]);
        let mut vt_data = vec![0.0; keep * cols];
        for r in 0..keep {
            for c in 0..cols {
                vt_data[r * cols + c] = vt[(r, c)];
            }
        }
        let s_t = Tensor::from_data(&[keep], s.iter().take(keep).cloned().collect())?;
        Ok((
            Tensor::from_data(&u_shape, u_data)?,
            s_t,
            Tensor::from_data(&vt_shape, vt_data)?,
            discarded,
        ))
    }
}

/// Contract `a` and `b` over the given `(a_axis, b_axis)` pairs. Result axes
/// are the unpaired axes of `a` followed by the unpaired axes of `b`, in
/// their original order.
pub fn contract_pair(a: &Tensor, b: &Tensor, pairs: &[(usize, usize)]) -> Result<Tensor> {
    for &(ai, bi) in pairs {
        if ai >= a.rank() || bi >= b.rank() {
            return Err(QtnError::Shape(format!(
                "contraction pair ({}, {}) out of range for ranks ({}, {})",
                ai,
                bi,
                a.rank(),
                b.rank()
            )));
        }
        if a.shape[ai] != b.shape[bi] {
            return Err(QtnError::ContractionMismatch {
                a_axis: ai,
                a_len: a.shape[ai],
                b_axis: bi,
                b_len: b.shape[bi],
            });
        }
    }
    let mut a_free: Vec<usize> = (0..a.rank()).collect();
    let mut b_free: Vec<usize> = (0..b.rank()).collect();
    a_free.retain(|ax| !pairs.iter().any(|p| p.0 == *ax));
    b_free.retain(|ax| !pairs.iter().any(|p| p.1 == *ax));

    // left operand: free axes then contracted axes
    let mut a_perm = a_free.clone();
    a_perm.extend(pairs.iter().map(|p| p.0));
    // right operand: contracted axes then free axes
    let mut b_perm: Vec<usize> = pairs.iter().map(|p| p.1).collect();
    b_perm.extend(b_free.iter().cloned());

    let ap = a.permute(&a_perm)?;
    let bp = b.permute(&b_perm)?;

    let m: usize = a_free.iter().map(|&ax| a.shape[ax]).product();
    let k: usize = pairs.iter().map(|&(ax, _)| a.shape[ax]).product();
    let n: usize = b_free.iter().map(|&ax| b.shape[ax]).product();

    let mut out = vec![0.0; m * n];
    matmul(m, k, n, &ap.data, &bp.data, &mut out);

    let mut shape: Vec<usize> = a_free.iter().map(|&ax| a.shape[ax]).collect();
    shape.extend(b_free.iter().map(|&ax| b.shape[ax]));
    let labels = match (&a.labels, &b.labels) {
        (Some(la), Some(lb)) => {
            let mut ls: Vec<String> = a_free.iter().map(|&ax| la[ax].clone()).collect();
            ls.extend(b_free.iter().map(|&ax| lb[ax].clone()));
            Some(ls)
        }
        _ => None,
    };
    let mut t = Tensor::from_data(&shape, out)?;
    t.labels = labels;
    Ok(t)
}

/// Row-major matrix product `out[m x n] = a[m x k] * b[k x n]`.
pub fn matmul(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], out: &mut [f64]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    out.fill(0.0);
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let orow = &mut out[i * n..(i + 1) * n];
        for (p, &av) in arow.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let (r, c) = m.shape();
    let mut out = Vec::with_capacity(r * c);
    for i in 0..r {
        for j in 0..c {
            out.push(m[(i, j)]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tensor(shape: &[usize], seed: u64) -> Tensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let len = shape.iter().product();
        let data = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
        Tensor::from_data(shape, data).unwrap()
    }

    #[test]
    fn identity_contraction_passes_vector_through() {
        let id = Tensor::eye(2);
        let v = Tensor::from_data(&[2], vec![3.0, 4.0]).unwrap();
        let out = contract_pair(&id, &v, &[(1, 0)]).unwrap();
        assert_eq!(out.shape(), &[2]);
        assert_eq!(out.data(), &[3.0, 4.0]);
    }

    #[test]
    fn dot_product() {
        let a = Tensor::from_data(&[2], vec![1.0, 2.0]).unwrap();
        let b = Tensor::from_data(&[2], vec![3.0, 4.0]).unwrap();
        let out = contract_pair(&a, &b, &[(0, 0)]).unwrap();
        assert_eq!(out.rank(), 0);
        assert_eq!(out.scalar_value().unwrap(), 11.0);
    }

    #[test]
    fn contraction_matches_naive_loop() {
        let a = random_tensor(&[2, 3, 4], 7);
        let b = random_tensor(&[4, 3], 8);
        // contract a axis 2 with b axis 0 and a axis 1 with b axis 1
        let out = contract_pair(&a, &b, &[(2, 0), (1, 1)]).unwrap();
        assert_eq!(out.shape(), &[2]);
        for i in 0..2 {
            let mut acc = 0.0;
            for j in 0..3 {
                for k in 0..4 {
                    acc += a.get(&[i, j, k]) * b.get(&[k, j]);
                }
            }
            assert!((out.get(&[i]) - acc).abs() < 1e-13);
        }
    }

    #[test]
    fn contraction_dimension_mismatch_names_axes() {
        let a = random_tensor(&[2, 3], 1);
        let b = random_tensor(&[4], 2);
        let err = contract_pair(&a, &b, &[(1, 0)]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("axis 1") && msg.contains("axis 0"), "{msg}");
    }

    #[test]
    fn contraction_is_bilinear() {
        let a = random_tensor(&[3, 4], 10);
        let b = random_tensor(&[4, 2], 11);
        let ab = contract_pair(&a, &b, &[(1, 0)]).unwrap();
        let scaled = contract_pair(&a.scale(2.5), &b, &[(1, 0)]).unwrap();
        for (x, y) in ab.data().iter().zip(scaled.data()) {
            assert!((2.5 * x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn qr_of_identity_is_identity_up_to_signs() {
        let id = Tensor::eye(4);
        let (q, r) = id.qr_or_lq(1, FactorSide::Left).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((q.get(&[i, j]).abs() - expect).abs() < 1e-12);
                assert!((r.get(&[i, j]).abs() - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn qr_q_is_isometric() {
        let t = random_tensor(&[6, 3], 3);
        let (q, _r) = t.qr_or_lq(1, FactorSide::Left).unwrap();
        let qtq = contract_pair(&q, &q, &[(0, 0)]).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((qtq.get(&[i, j]) - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn qr_and_lq_reconstruct_rank3_tensor() {
        let t = random_tensor(&[2, 2, 2], 4);
        for side in [FactorSide::Left, FactorSide::Right] {
            let (x, y) = t.qr_or_lq(2, side).unwrap();
            let back = contract_pair(&x, &y, &[(2, 0)]).unwrap();
            let err: f64 = back
                .data()
                .iter()
                .zip(t.data())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            assert!(err / t.norm() < 1e-12);
        }
    }

    #[test]
    fn lq_q_has_orthonormal_rows() {
        let t = random_tensor(&[3, 8], 5);
        let (_l, q) = t.qr_or_lq(1, FactorSide::Right).unwrap();
        let qqt = contract_pair(&q, &q, &[(1, 1)]).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((qqt.get(&[i, j]) - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rank_deficient_qr_still_isometric() {
        // two identical columns
        let t = Tensor::from_data(&[3, 2], vec![1.0, 1.0, 2.0, 2.0, -1.0, -1.0]).unwrap();
        let (q, r) = t.qr_or_lq(1, FactorSide::Left).unwrap();
        let back = contract_pair(&q, &r, &[(1, 0)]).unwrap();
        for (a, b) in back.data().iter().zip(t.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn svd_identity_keeps_unit_spectrum() {
        let id = Tensor::eye(2);
        let (_u, s, _vt, w) = id.svd_truncated(1, 2, 0.0).unwrap();
        assert_eq!(s.shape(), &[2]);
        assert!((s.get(&[0]) - 1.0).abs() < 1e-14);
        assert!((s.get(&[1]) - 1.0).abs() < 1e-14);
        assert_eq!(w, 0.0);
    }

    #[test]
    fn svd_rank_one_truncates_cleanly() {
        // outer((1,0),(0,1))
        let t = Tensor::from_data(&[2, 2], vec![0.0, 1.0, 0.0, 0.0]).unwrap();
        let (_u, s, _vt, w) = t.svd_truncated(1, 1, 0.0).unwrap();
        assert_eq!(s.shape(), &[1]);
        assert!((s.get(&[0]) - 1.0).abs() < 1e-14);
        assert!(w < 1e-28);
    }

    #[test]
    fn svd_discarded_weight_matches_full_decomposition() {
        let t = random_tensor(&[8, 8], 6);
        let (_u, s_full, _vt, _w) = t.svd_truncated(1, 8, 0.0).unwrap();
        let (_u4, _s4, _vt4, w4) = t.svd_truncated(1, 4, 0.0).unwrap();
        let expect: f64 = (4..8).map(|i| s_full.get(&[i]).powi(2)).sum();
        assert!((w4 - expect).abs() < 1e-12);
    }

    #[test]
    fn svd_full_rank_reconstructs() {
        let t = random_tensor(&[4, 6], 9);
        let (u, s, vt, w) = t.svd_truncated(1, 6, 0.0).unwrap();
        assert_eq!(w, 0.0);
        let k = s.shape()[0];
        let mut us = u.clone();
        for r in 0..4 {
            for c in 0..k {
                let v = us.get(&[r, c]) * s.get(&[c]);
                us.set(&[r, c], v);
            }
        }
        let back = contract_pair(&us, &vt, &[(1, 0)]).unwrap();
        let err: f64 = back
            .data()
            .iter()
            .zip(t.data())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert!(err / t.norm() < 1e-12);
    }

    #[test]
    fn permute_reshape_roundtrip_is_exact() {
        let v = Tensor::from_data(&[4], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let m = v.permute_reshape(&[0], &[2, 2]).unwrap();
        let back = m.permute_reshape(&[0, 1], &[4]).unwrap();
        assert_eq!(back.data(), v.data());
    }

    #[test]
    fn transpose_moves_entries() {
        let t = random_tensor(&[2, 3], 12);
        let tt = t.permute(&[1, 0]).unwrap();
        for i in 0..2 {
            for j in 0..3 {
                assert_eq!(t.get(&[i, j]), tt.get(&[j, i]));
            }
        }
    }

    #[test]
    fn permute_matches_index_arithmetic_oracle() {
        let t = random_tensor(&[2, 2, 2], 13);
        let p = t.permute(&[2, 0, 1]).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    // new axis order (old2, old0, old1)
                    assert_eq!(p.get(&[k, i, j]), t.get(&[i, j, k]));
                }
            }
        }
    }

    #[test]
    fn inconsistent_grouping_is_an_error() {
        let t = random_tensor(&[2, 3], 14);
        assert!(t.permute_reshape(&[0, 1], &[4, 2]).is_err());
    }

    #[test]
    fn operations_are_deterministic() {
        let a = random_tensor(&[5, 7], 20);
        let b = random_tensor(&[7, 3], 21);
        let c1 = contract_pair(&a, &b, &[(1, 0)]).unwrap();
        let c2 = contract_pair(&a, &b, &[(1, 0)]).unwrap();
        assert_eq!(c1.data(), c2.data());
        let (q1, r1) = a.qr_or_lq(1, FactorSide::Left).unwrap();
        let (q2, r2) = a.qr_or_lq(1, FactorSide::Left).unwrap();
        assert_eq!(q1.data(), q2.data());
        assert_eq!(r1.data(), r2.data());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn scaling_left_operand_scales_result(seed in 0u64..1000, alpha in -3.0f64..3.0) {
                let a = random_tensor(&[3, 5], seed);
                let b = random_tensor(&[5, 2], seed + 1);
                let ab = contract_pair(&a, &b, &[(1, 0)]).unwrap();
                let scaled = contract_pair(&a.scale(alpha), &b, &[(1, 0)]).unwrap();
                for (x, y) in ab.data().iter().zip(scaled.data()) {
                    prop_assert!((alpha * x - y).abs() < 1e-13);
                }
            }

            #[test]
            fn permute_then_inverse_is_identity(seed in 0u64..1000) {
                let t = random_tensor(&[2, 3, 4], seed);
                let perm = [2usize, 0, 1];
                let mut inv = [0usize; 3];
                for (k, &p) in perm.iter().enumerate() {
                    inv[p] = k;
                }
                let back = t.permute(&perm).unwrap().permute(&inv).unwrap();
                prop_assert_eq!(back.data(), t.data());
            }

            #[test]
            fn qr_isometry_residual_small(seed in 0u64..100, rows in 1usize..64, cols in 1usize..16) {
                let t = random_tensor(&[rows, cols], seed);
                let (q, _r) = t.qr_or_lq(1, FactorSide::Left).unwrap();
                let k = rows.min(cols);
                let qtq = contract_pair(&q, &q, &[(0, 0)]).unwrap();
                for i in 0..k {
                    for j in 0..k {
                        let expect = if i == j { 1.0 } else { 0.0 };
                        prop_assert!((qtq.get(&[i, j]) - expect).abs() < 1e-12);
                    }
                }
            }
        }
    }
}
