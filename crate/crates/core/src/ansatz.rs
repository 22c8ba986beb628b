//! Symbolic circuit descriptors for the ansatz families.
//!
//! A descriptor is an ordered gate list over `l` wires; list order is
//! execution order. Sequentially-structured families (the qMPS variants and
//! regrouped global circuits) additionally carry a block decomposition: block
//! `b` acts on the contiguous wire span `[lo_b, hi_b]`, blocks execute in
//! ascending order, fresh `|0>` wires enter at the top of each span and a
//! block's lowest wires are emitted as physical sites once no later block
//! touches them. This is the structure that converts exactly to a dense MPS.
//!
//! Families:
//! * `qmps-b` / `qmps-l` / `qmps-m` — MPS staircase of blocks on `q+1` wires
//!   filled with a brick-wall / ladder / small binary-MERA circuit of depth
//!   `tau`.
//! * `qmera-b` — binary MERA over `l = 2^k` wires with `q` bond qubits per
//!   coarse site; every disentangler and isometry block is a brick-wall
//!   circuit of depth `tau`.
//! * `qc-b` / `qc-l` — global brick-wall / ladder circuits of depth `tau`.
//! * `dense-block-mera` — the qMERA layout with each block a single dense
//!   orthogonal gate on all of its wires.

use crate::error::{QtnError, Result};
use crate::gates::{self, GateParams};
use crate::statevector;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    QmpsB,
    QmpsL,
    QmpsM,
    QmeraB,
    QcB,
    QcL,
    DenseBlockMera,
}

impl Family {
    pub fn is_qmps(&self) -> bool {
        matches!(self, Family::QmpsB | Family::QmpsL | Family::QmpsM)
    }
    pub fn is_global_circuit(&self) -> bool {
        matches!(self, Family::QcB | Family::QcL)
    }
    pub fn as_str(&self) -> &'static str {
        match self {
            Family::QmpsB => "qmps-b",
            Family::QmpsL => "qmps-l",
            Family::QmpsM => "qmps-m",
            Family::QmeraB => "qmera-b",
            Family::QcB => "qc-b",
            Family::QcL => "qc-l",
            Family::DenseBlockMera => "dense-block-mera",
        }
    }
}

/// One gate in the circuit. `block`, `sub`, `layer` and `rung` identify the
/// structural slot the gate occupies (owning block, sub-block for nested
/// layouts, depth layer, position within the layer); depth growth matches
/// slots across descriptors of different `tau`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatePlacement {
    pub wires: Vec<usize>,
    pub params: GateParams,
    pub block: usize,
    pub sub: usize,
    pub layer: usize,
    pub rung: usize,
}

/// Inclusive wire span of a sequential block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSpan {
    pub lo: usize,
    pub hi: usize,
}

impl BlockSpan {
    pub fn width(&self) -> usize {
        self.hi - self.lo + 1
    }
    pub fn contains(&self, w: usize) -> bool {
        self.lo <= w && w <= self.hi
    }
}

/// Symbolic circuit graph for any of the ansatz families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnsatzDescriptor {
    pub family: Family,
    /// Site count; one qubit per site, so also the wire count.
    pub l: usize,
    /// Bond qubits for sequential/MERA families (D = 2^q); 0 for global circuits.
    pub q: usize,
    pub tau: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub q_m: Option<usize>,
    /// Block spans in execution order; empty for non-sequential families.
    #[serde(default)]
    pub blocks: Vec<BlockSpan>,
    pub gates: Vec<GatePlacement>,
}

struct LocalGate {
    wires: Vec<usize>,
    sub: usize,
    layer: usize,
    rung: usize,
}

fn brickwall_gates(wires: &[usize], tau: usize, sub: usize) -> Vec<LocalGate> {
    let w = wires.len();
    let mut out = Vec::new();
    for layer in 0..tau {
        let mut p = layer % 2;
        while p + 1 < w {
            out.push(LocalGate {
                wires: vec![wires[p], wires[p + 1]],
                sub,
                layer,
                rung: p,
            });
            p += 2;
        }
    }
    out
}

fn ladder_gates(wires: &[usize], tau: usize, sub: usize) -> Vec<LocalGate> {
    let w = wires.len();
    let mut out = Vec::new();
    for layer in 0..tau {
        for p in 0..w.saturating_sub(1) {
            out.push(LocalGate {
                wires: vec![wires[p], wires[p + 1]],
                sub,
                layer,
                rung: p,
            });
        }
    }
    out
}

/// Binary-MERA node layout over an ordered wire list, with `q_bond` carrier
/// wires per coarse interval. Used for the global qMERA (wires = the whole
/// chain) and for the local MERA inside qMPS-m blocks.
///
/// Intervals come from recursive halving down to `leaf_max` wires; a node's
/// carrier is the first `min(q_bond, len)` wires of its interval. Generation
/// order: top block on the root's two children, then level by level
/// isometries (parent carrier plus fresh wires -> children carriers)
/// followed by disentanglers between adjacent intervals of different parents.
fn mera_node_wires(wires: &[usize], q_bond: usize, leaf_max: usize) -> Vec<Vec<usize>> {
    #[derive(Clone)]
    struct Interval {
        start: usize,
        len: usize,
        parent: usize,
    }
    let n = wires.len();
    let carrier =
        |iv: &Interval| -> Vec<usize> { wires[iv.start..iv.start + q_bond.min(iv.len)].to_vec() };
    // level 0: the root's two halves
    let mut levels: Vec<Vec<Interval>> = Vec::new();
    let half = n.div_ceil(2);
    levels.push(vec![
        Interval {
            start: 0,
            len: half,
            parent: 0,
        },
        Interval {
            start: half,
            len: n - half,
            parent: 0,
        },
    ]);
    loop {
        let last = levels.last().unwrap();
        if last.iter().all(|iv| iv.len <= leaf_max) {
            break;
        }
        let mut next = Vec::new();
        for (pi, iv) in last.iter().enumerate() {
            if iv.len <= leaf_max {
                next.push(Interval {
                    start: iv.start,
                    len: iv.len,
                    parent: pi,
                });
            } else {
                let h = iv.len.div_ceil(2);
                next.push(Interval {
                    start: iv.start,
                    len: h,
                    parent: pi,
                });
                next.push(Interval {
                    start: iv.start + h,
                    len: iv.len - h,
                    parent: pi,
                });
            }
        }
        levels.push(next);
    }

    let mut nodes: Vec<Vec<usize>> = Vec::new();
    // top block acts on the carriers of the two root children
    let mut top = carrier(&levels[0][0]);
    top.extend(carrier(&levels[0][1]));
    nodes.push(top);
    for d in 1..levels.len() {
        let (parents, children) = (&levels[d - 1], &levels[d]);
        // isometries: expand each split parent into its children's carriers
        for (pi, parent) in parents.iter().enumerate() {
            let kids: Vec<&Interval> = children.iter().filter(|c| c.parent == pi).collect();
            if kids.len() == 2 {
                let mut ws = carrier(kids[0]);
                ws.extend(carrier(kids[1]));
                debug_assert!(carrier(parent).iter().all(|w| ws.contains(w)));
                nodes.push(ws);
            }
        }
        // disentanglers between adjacent children of different parents
        for c in 0..children.len().saturating_sub(1) {
            if children[c].parent != children[c + 1].parent {
                let mut ws = carrier(&children[c]);
                ws.extend(carrier(&children[c + 1]));
                if ws.len() >= 2 {
                    nodes.push(ws);
                }
            }
        }
    }
    nodes
}

fn local_mera_gates(wires: &[usize], tau: usize, q_m: usize) -> Vec<LocalGate> {
    if wires.len() < 2 {
        return Vec::new();
    }
    if wires.len() <= 2 * q_m {
        // too small for a tree; fall back to a single brick-wall block
        return brickwall_gates(wires, tau, 0);
    }
    let mut out = Vec::new();
    for (sub, node) in mera_node_wires(wires, q_m, q_m).into_iter().enumerate() {
        out.extend(brickwall_gates(&node, tau, sub));
    }
    out
}

/// Build a descriptor for `family` on `l` sites with every gate initialized
/// to identity parameters.
pub fn build_ansatz(
    family: Family,
    l: usize,
    q: usize,
    tau: usize,
    q_m: Option<usize>,
) -> Result<AnsatzDescriptor> {
    if l < 2 {
        return Err(QtnError::InvalidAnsatz("need at least two sites".into()));
    }
    match family {
        Family::QmpsB | Family::QmpsL | Family::QmpsM => {
            if q < 1 || q >= l {
                return Err(QtnError::InvalidAnsatz(format!(
                    "qMPS needs 1 <= q < L, got q={q}, L={l}"
                )));
            }
            if tau < 1 {
                return Err(QtnError::InvalidAnsatz("tau must be >= 1".into()));
            }
            if family == Family::QmpsM {
                let qm = q_m.ok_or_else(|| {
                    QtnError::InvalidAnsatz("qMPS-m requires the q_m parameter".into())
                })?;
                if qm < 1 || qm > q + 1 {
                    return Err(QtnError::InvalidAnsatz(format!(
                        "qMPS-m needs 1 <= q_m <= q+1, got q_m={qm}"
                    )));
                }
            }
            let mut blocks = Vec::with_capacity(l);
            let mut gates = Vec::new();
            for b in 0..l {
                let span = BlockSpan {
                    lo: b,
                    hi: (b + q).min(l - 1),
                };
                let ws: Vec<usize> = (span.lo..=span.hi).collect();
                let local = match family {
                    Family::QmpsB => brickwall_gates(&ws, tau, 0),
                    Family::QmpsL => ladder_gates(&ws, tau, 0),
                    Family::QmpsM => local_mera_gates(&ws, tau, q_m.unwrap()),
                    _ => unreachable!(),
                };
                for lg in local {
                    gates.push(GatePlacement {
                        wires: lg.wires,
                        params: GateParams::identity(2),
                        block: b,
                        sub: lg.sub,
                        layer: lg.layer,
                        rung: lg.rung,
                    });
                }
                blocks.push(span);
            }
            let desc = AnsatzDescriptor {
                family,
                l,
                q,
                tau,
                q_m: if family == Family::QmpsM { q_m } else { None },
                blocks,
                gates,
            };
            desc.validate()?;
            Ok(desc)
        }
        Family::QmeraB | Family::DenseBlockMera => {
            if !l.is_power_of_two() || l < 4 {
                return Err(QtnError::InvalidAnsatz(format!(
                    "MERA families need L a power of two >= 4, got {l}"
                )));
            }
            if q < 1 {
                return Err(QtnError::InvalidAnsatz("q must be >= 1".into()));
            }
            if family == Family::QmeraB && tau < 1 {
                return Err(QtnError::InvalidAnsatz("tau must be >= 1".into()));
            }
            let all: Vec<usize> = (0..l).collect();
            // leaf_max = 1: coarse-grain all the way down to physical wires
            let nodes = mera_node_wires(&all, q, 1);
            let mut gates = Vec::new();
            for (node_id, ws) in nodes.into_iter().enumerate() {
                match family {
                    Family::QmeraB => {
                        for lg in brickwall_gates(&ws, tau, 0) {
                            gates.push(GatePlacement {
                                wires: lg.wires,
                                params: GateParams::identity(2),
                                block: node_id,
                                sub: 0,
                                layer: lg.layer,
                                rung: lg.rung,
                            });
                        }
                    }
                    Family::DenseBlockMera => {
                        let m = ws.len();
                        gates.push(GatePlacement {
                            params: GateParams::identity(m),
                            wires: ws,
                            block: node_id,
                            sub: 0,
                            layer: 0,
                            rung: 0,
                        });
                    }
                    _ => unreachable!(),
                }
            }
            let desc = AnsatzDescriptor {
                family,
                l,
                q,
                tau: if family == Family::DenseBlockMera { 0 } else { tau },
                q_m: None,
                blocks: Vec::new(),
                gates,
            };
            desc.validate()?;
            Ok(desc)
        }
        Family::QcB | Family::QcL => {
            if tau < 1 {
                return Err(QtnError::InvalidAnsatz("tau must be >= 1".into()));
            }
            let all: Vec<usize> = (0..l).collect();
            let local = match family {
                Family::QcB => brickwall_gates(&all, tau, 0),
                Family::QcL => ladder_gates(&all, tau, 0),
                _ => unreachable!(),
            };
            let gates = local
                .into_iter()
                .map(|lg| GatePlacement {
                    wires: lg.wires,
                    params: GateParams::identity(2),
                    block: 0,
                    sub: 0,
                    layer: lg.layer,
                    rung: lg.rung,
                })
                .collect();
            let desc = AnsatzDescriptor {
                family,
                l,
                q: 0,
                tau,
                q_m: None,
                blocks: Vec::new(),
                gates,
            };
            desc.validate()?;
            Ok(desc)
        }
    }
}

impl AnsatzDescriptor {
    pub fn validate(&self) -> Result<()> {
        for (gi, g) in self.gates.iter().enumerate() {
            if g.wires.len() != g.params.m {
                return Err(QtnError::InvalidAnsatz(format!(
                    "gate {gi}: {} wires but params act on {} qubits",
                    g.wires.len(),
                    g.params.m
                )));
            }
            let mut sorted = g.wires.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != g.wires.len() {
                return Err(QtnError::InvalidAnsatz(format!("gate {gi}: repeated wire")));
            }
            if g.wires.iter().any(|&w| w >= self.l) {
                return Err(QtnError::InvalidAnsatz(format!(
                    "gate {gi}: wire out of range"
                )));
            }
            if !self.blocks.is_empty() {
                let span = self.blocks.get(g.block).ok_or_else(|| {
                    QtnError::InvalidAnsatz(format!("gate {gi}: block {} missing", g.block))
                })?;
                if g.wires.iter().any(|&w| !span.contains(w)) {
                    return Err(QtnError::InvalidAnsatz(format!(
                        "gate {gi}: wire outside its block span"
                    )));
                }
            }
        }
        if !self.blocks.is_empty() {
            for b in 1..self.blocks.len() {
                if self.blocks[b].lo < self.blocks[b - 1].lo
                    || self.blocks[b].hi < self.blocks[b - 1].hi
                {
                    return Err(QtnError::InvalidAnsatz(
                        "block spans must ascend with execution order".into(),
                    ));
                }
            }
            // gates must appear grouped by block in execution order
            let mut prev = 0usize;
            for g in &self.gates {
                if g.block < prev {
                    return Err(QtnError::InvalidAnsatz(
                        "gates must be ordered by block".into(),
                    ));
                }
                prev = g.block;
            }
            // spans must cover every wire
            let covered: std::collections::BTreeSet<usize> =
                self.blocks.iter().flat_map(|s| s.lo..=s.hi).collect();
            if covered.len() != self.l {
                return Err(QtnError::InvalidAnsatz(
                    "block spans must cover all wires".into(),
                ));
            }
        }
        Ok(())
    }

    /// How many of each block's wires are emitted after it runs: the wires no
    /// later block touches. The final block emits its whole remaining span.
    pub fn block_emissions(&self) -> Vec<usize> {
        let nb = self.blocks.len();
        let mut emit = vec![0usize; nb];
        if nb == 0 {
            return emit;
        }
        let mut emitted_to = -1i64; // highest wire emitted so far
        for b in 0..nb {
            let hi_later = if b + 1 < nb {
                self.blocks[b + 1].lo as i64 - 1
            } else {
                self.blocks[b].hi as i64
            };
            let e = (hi_later - emitted_to).max(0) as usize;
            emit[b] = e;
            emitted_to += e as i64;
        }
        emit
    }

    pub fn total_parameters(&self) -> usize {
        self.gates.iter().map(|g| g.params.theta.len()).sum()
    }

    /// Flatten all gate angles into one vector, in descriptor order.
    pub fn flat_theta(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.total_parameters());
        for g in &self.gates {
            out.extend_from_slice(&g.params.theta);
        }
        out
    }

    pub fn set_flat_theta(&mut self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.total_parameters() {
            return Err(QtnError::InvalidArgument(format!(
                "expected {} parameters, got {}",
                self.total_parameters(),
                theta.len()
            )));
        }
        let mut k = 0;
        for g in self.gates.iter_mut() {
            let n = g.params.theta.len();
            g.params.theta.copy_from_slice(&theta[k..k + n]);
            k += n;
        }
        Ok(())
    }

    /// Offset of each gate's angles within the flat parameter vector.
    pub fn param_offsets(&self) -> Vec<usize> {
        let mut offs = Vec::with_capacity(self.gates.len());
        let mut k = 0;
        for g in &self.gates {
            offs.push(k);
            k += g.params.theta.len();
        }
        offs
    }

    /// Dense realization: apply all gates in execution order to `|0...0>`.
    pub fn realize_statevector(&self) -> Result<Vec<f64>> {
        let mut state = statevector::zero_state(self.l)?;
        for g in &self.gates {
            let mat = gates::realize_gate(&g.params);
            statevector::apply_gate(&mut state, self.l, mat.data(), &g.wires);
        }
        Ok(state)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let d: AnsatzDescriptor = serde_json::from_str(s)?;
        d.validate()?;
        Ok(d)
    }
}

/// Count of variational parameters in a descriptor.
pub fn count_parameters(a: &AnsatzDescriptor) -> usize {
    a.total_parameters()
}

/// Independent real parameters of a canonical dense MPS: `L * D(3D-1)/2`.
pub fn dense_mps_parameter_count(l: usize, d: usize) -> usize {
    l * d * (3 * d - 1) / 2
}

/// Regroup a global brick-wall or ladder circuit into an exactly equivalent
/// sequential (qMPS) descriptor.
///
/// Ladder circuits with `tau` layers become staircase blocks on `tau + 1`
/// wires advancing one site per block (`q = tau`); brick-wall circuits become
/// blocks advancing two sites with overlap `tau - 1` (`q = tau - 1`). In both
/// cases each bulk block holds `tau` of the original gates arranged as a
/// ladder running against the staircase direction, and the realized state is
/// unchanged.
pub fn regroup_qc_as_qmps(a: &AnsatzDescriptor) -> Result<AnsatzDescriptor> {
    match a.family {
        Family::QcB => regroup_qcb(a),
        Family::QcL => regroup_qcl(a),
        _ => Err(QtnError::UnsupportedFamily(format!(
            "regroup_qc_as_qmps expects qc-b or qc-l, got {}",
            a.family.as_str()
        ))),
    }
}

fn regroup_qcl(a: &AnsatzDescriptor) -> Result<AnsatzDescriptor> {
    let (l, tau) = (a.l, a.tau);
    let q = tau.min(l - 1);
    // block i holds gate (w, w+1) at layer t with i = w + 1 + t - tau,
    // clamped into block 0 at the left edge
    let nb = l - 1;
    let mut per_block: Vec<Vec<&GatePlacement>> = vec![Vec::new(); nb];
    for g in &a.gates {
        let bi = (g.wires[0] + 1 + g.layer).saturating_sub(tau).min(nb - 1);
        per_block[bi].push(g);
    }
    let mut blocks = Vec::with_capacity(l);
    let mut gates = Vec::new();
    for (b, members) in per_block.iter().enumerate() {
        let span = BlockSpan {
            lo: b,
            hi: (b + q).min(l - 1),
        };
        let mut sorted: Vec<&&GatePlacement> = members.iter().collect();
        sorted.sort_by_key(|g| (g.layer, g.wires[0]));
        for g in sorted {
            gates.push(GatePlacement {
                wires: g.wires.clone(),
                params: g.params.clone(),
                block: b,
                sub: 0,
                layer: g.layer,
                rung: g.rung,
            });
        }
        blocks.push(span);
    }
    // width-1 tail block completes the site count
    blocks.push(BlockSpan {
        lo: l - 1,
        hi: l - 1,
    });
    let out = AnsatzDescriptor {
        family: Family::QmpsL,
        l,
        q,
        tau,
        q_m: None,
        blocks,
        gates,
    };
    out.validate()?;
    Ok(out)
}

fn regroup_qcb(a: &AnsatzDescriptor) -> Result<AnsatzDescriptor> {
    let (l, tau) = (a.l, a.tau);
    let q = (tau - 1).min(l.saturating_sub(2));
    // staircase k holds gate (w, w+1) at layer t with w + t = 2k
    let kmax = (l - 2 + tau - 1) / 2;
    let mut per_block: Vec<Vec<&GatePlacement>> = vec![Vec::new(); kmax + 1];
    for g in &a.gates {
        debug_assert_eq!((g.wires[0] + g.layer) % 2, 0);
        let k = (g.wires[0] + g.layer) / 2;
        per_block[k].push(g);
    }
    let mut blocks = Vec::with_capacity(kmax + 1);
    let mut gates = Vec::new();
    for (k, members) in per_block.iter().enumerate() {
        let lo = (2 * k + 1).saturating_sub(tau);
        let hi = (2 * k + 1).min(l - 1);
        let span = BlockSpan { lo, hi };
        let mut sorted: Vec<&&GatePlacement> = members.iter().collect();
        sorted.sort_by_key(|g| (g.layer, g.wires[0]));
        for g in sorted {
            gates.push(GatePlacement {
                wires: g.wires.clone(),
                params: g.params.clone(),
                block: k,
                sub: 0,
                layer: g.layer,
                rung: g.rung,
            });
        }
        blocks.push(span);
    }
    let out = AnsatzDescriptor {
        family: Family::QmpsL,
        l,
        q,
        tau,
        q_m: None,
        blocks,
        gates,
    };
    out.validate()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gates::perturbed_identity;
    use crate::statevector::{dot, norm};

    fn randomize(desc: &mut AnsatzDescriptor, seed: u64, strength: f64) {
        for (k, g) in desc.gates.iter_mut().enumerate() {
            g.params =
                perturbed_identity(g.params.m, strength, seed.wrapping_add(k as u64)).unwrap();
        }
    }

    #[test]
    fn qcb_l8_tau2_has_seven_gates() {
        let a = build_ansatz(Family::QcB, 8, 0, 2, None).unwrap();
        assert_eq!(a.gates.len(), 7);
        let even = a.gates.iter().filter(|g| g.layer == 0).count();
        let odd = a.gates.iter().filter(|g| g.layer == 1).count();
        assert_eq!(even, 4);
        assert_eq!(odd, 3);
        assert_eq!(count_parameters(&a), 42);
    }

    #[test]
    fn qmps_b_gate_count_fixture() {
        // exact boundary convention: blocks shrink at the right edge
        let a = build_ansatz(Family::QmpsB, 32, 4, 4, None).unwrap();
        // full blocks (w=5): 8 gates each; boundary w=4,3,2,1: 6,4,2,0
        assert_eq!(a.gates.len(), 28 * 8 + 6 + 4 + 2);
        assert_eq!(count_parameters(&a), 6 * a.gates.len());
    }

    #[test]
    fn qmera_l8_q1_tau1_matches_hand_enumeration() {
        // top(1) + two expansion levels: isometries 2 + 4, disentanglers 1 + 3
        let a = build_ansatz(Family::QmeraB, 8, 1, 1, None).unwrap();
        assert_eq!(a.gates.len(), 11);
        let expected: Vec<Vec<usize>> = vec![
            vec![0, 4], // top on the two level-2 carriers
            vec![0, 2], // isometry [0,4) -> [0,2), [2,4)
            vec![4, 6], // isometry [4,8)
            vec![2, 4], // disentangler between [2,4) and [4,6)
            vec![0, 1], // isometries down to physical sites
            vec![2, 3],
            vec![4, 5],
            vec![6, 7],
            vec![1, 2], // physical-level disentanglers
            vec![3, 4],
            vec![5, 6],
        ];
        let got: Vec<Vec<usize>> = a.gates.iter().map(|g| g.wires.clone()).collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn dense_mps_formula() {
        assert_eq!(dense_mps_parameter_count(32, 16), 12032);
    }

    #[test]
    fn gate_count_ratio_approaches_family_laws() {
        // count / (tau * L * (q+1)) tends to 1/2 (brick-wall), 1 (ladder)
        for (family, q, target) in [(Family::QmpsB, 9usize, 0.5f64), (Family::QmpsL, 9, 1.0)] {
            let mut prev_dev = f64::INFINITY;
            for l in [32usize, 64, 128] {
                let a = build_ansatz(family, l, q, 4, None).unwrap();
                let ratio = a.gates.len() as f64 / (4.0 * l as f64 * (q + 1) as f64);
                let dev = (ratio - target).abs() / target;
                assert!(dev <= prev_dev + 1e-12, "non-improving at L={l}");
                prev_dev = dev;
                if l == 128 {
                    assert!(dev < 0.15, "family {:?}: ratio {ratio} vs {target}", family);
                }
            }
        }
    }

    #[test]
    fn identity_circuits_realize_the_zero_state() {
        for (family, q, tau, qm) in [
            (Family::QmpsB, 2, 2, None),
            (Family::QmpsL, 2, 1, None),
            (Family::QmpsM, 3, 1, Some(2)),
            (Family::QmeraB, 1, 1, None),
            (Family::QcB, 0, 3, None),
            (Family::QcL, 0, 2, None),
            (Family::DenseBlockMera, 2, 0, None),
        ] {
            let a = build_ansatz(family, 8, q, tau, qm).unwrap();
            let v = a.realize_statevector().unwrap();
            assert!((v[0] - 1.0).abs() < 1e-14, "{:?}", family);
            assert!(v[1..].iter().all(|&x| x == 0.0), "{:?}", family);
        }
    }

    #[test]
    fn random_circuits_stay_normalized() {
        let mut a = build_ansatz(Family::QmpsB, 8, 2, 3, None).unwrap();
        randomize(&mut a, 5, 1.0);
        let v = a.realize_statevector().unwrap();
        assert!((norm(&v) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn statevector_size_limit_is_refused() {
        let a = build_ansatz(Family::QcB, 27, 0, 1, None);
        assert!(a.is_ok());
        assert!(a.unwrap().realize_statevector().is_err());
    }

    #[test]
    fn regroup_preserves_state_qcb() {
        for tau in 1..=4 {
            for l in [4usize, 6, 8] {
                let mut a = build_ansatz(Family::QcB, l, 0, tau, None).unwrap();
                randomize(&mut a, 100 + tau as u64, 0.8);
                let before = a.realize_statevector().unwrap();
                let r = regroup_qc_as_qmps(&a).unwrap();
                assert_eq!(r.q, (tau - 1).min(l - 2));
                assert_eq!(r.gates.len(), a.gates.len());
                let after = r.realize_statevector().unwrap();
                let fidelity = dot(&before, &after);
                assert!((fidelity - 1.0).abs() < 1e-12, "tau={tau} l={l}: {fidelity}");
            }
        }
    }

    #[test]
    fn regroup_preserves_state_qcl() {
        for tau in 1..=3 {
            for l in [4usize, 6, 7] {
                let mut a = build_ansatz(Family::QcL, l, 0, tau, None).unwrap();
                randomize(&mut a, 200 + tau as u64, 0.8);
                let before = a.realize_statevector().unwrap();
                let r = regroup_qc_as_qmps(&a).unwrap();
                assert_eq!(r.q, tau.min(l - 1));
                assert_eq!(r.gates.len(), a.gates.len());
                let after = r.realize_statevector().unwrap();
                let fidelity = dot(&before, &after);
                assert!((fidelity - 1.0).abs() < 1e-12, "tau={tau} l={l}: {fidelity}");
            }
        }
    }

    #[test]
    fn regroup_tau1_qcb_gives_disjoint_staircase() {
        let a = build_ansatz(Family::QcB, 8, 0, 1, None).unwrap();
        let r = regroup_qc_as_qmps(&a).unwrap();
        assert_eq!(r.q, 0);
        let v0 = a.realize_statevector().unwrap();
        let v1 = r.realize_statevector().unwrap();
        assert!((dot(&v0, &v1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn regroup_rejects_other_families() {
        let a = build_ansatz(Family::QmpsB, 6, 2, 2, None).unwrap();
        assert!(regroup_qc_as_qmps(&a).is_err());
    }

    #[test]
    fn emissions_cover_all_wires() {
        for (family, tau) in [(Family::QcB, 3), (Family::QcL, 2)] {
            let a = build_ansatz(family, 9, 0, tau, None).unwrap();
            let r = regroup_qc_as_qmps(&a).unwrap();
            let total: usize = r.block_emissions().iter().sum();
            assert_eq!(total, r.l);
        }
        let a = build_ansatz(Family::QmpsB, 7, 2, 1, None).unwrap();
        assert_eq!(a.block_emissions(), vec![1; 7]);
    }

    #[test]
    fn json_roundtrip() {
        let mut a = build_ansatz(Family::QmpsM, 8, 3, 2, Some(2)).unwrap();
        randomize(&mut a, 9, 0.5);
        let s = a.to_json().unwrap();
        let b = AnsatzDescriptor::from_json(&s).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_constructions_are_rejected() {
        assert!(build_ansatz(Family::QmpsB, 8, 0, 2, None).is_err());
        assert!(build_ansatz(Family::QmpsB, 8, 8, 2, None).is_err());
        assert!(build_ansatz(Family::QmeraB, 6, 1, 1, None).is_err());
        assert!(build_ansatz(Family::QmpsM, 8, 2, 2, None).is_err());
        assert!(build_ansatz(Family::QcB, 8, 0, 0, None).is_err());
    }
}
