//! Model Hamiltonians as qubit term lists and MPOs.
//!
//! Everything stays in real arithmetic: exchange terms use
//! `(S+ S- + S- S+)/2 + Sz Sz`, and fermionic hopping is written with the
//! real raising/lowering pair plus Jordan-Wigner parity strings. Factors of
//! `i Sy` carry the `i` in the stored matrix; builders account for the sign
//! of squared occurrences.
//!
//! Hubbard fermions are encoded with the up/down modes of site `i` on qubits
//! `2i, 2i+1`, which keeps the hopping strings short. Occupation maps to
//! qubit `|1>`.

use crate::error::{QtnError, Result};
use crate::mps::Mpo;
use crate::tensor::Tensor;
use serde::{Deserialize, Serialize};

/// Single-site operator tags. All matrices are real 2x2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OpTag {
    I,
    Sx,
    /// `i * Sy` — real; builders track the sign of paired occurrences.
    ISy,
    Sz,
    Sp,
    Sm,
    /// Occupation `n = diag(0, 1)`.
    NumOp,
    /// Local fermionic creation (`|0> -> |1>`).
    Create,
    /// Local fermionic annihilation (`|1> -> |0>`).
    Annihilate,
    /// Jordan-Wigner parity string factor `diag(1, -1)`.
    PauliZ,
}

impl OpTag {
    pub fn matrix(&self) -> [f64; 4] {
        match self {
            OpTag::I => [1.0, 0.0, 0.0, 1.0],
            OpTag::Sx => [0.0, 0.5, 0.5, 0.0],
            OpTag::ISy => [0.0, 0.5, -0.5, 0.0],
            OpTag::Sz => [0.5, 0.0, 0.0, -0.5],
            OpTag::Sp => [0.0, 1.0, 0.0, 0.0],
            OpTag::Sm => [0.0, 0.0, 1.0, 0.0],
            OpTag::NumOp => [0.0, 0.0, 0.0, 1.0],
            OpTag::Create => [0.0, 0.0, 1.0, 0.0],
            OpTag::Annihilate => [0.0, 1.0, 0.0, 0.0],
            OpTag::PauliZ => [1.0, 0.0, 0.0, -1.0],
        }
    }

    /// Action on a basis bit: `op |b> = amp |b'>`, or `None` when it
    /// annihilates the state. Every tag is monomial, which keeps dense
    /// assembly and matrix-free application linear in the Hilbert dimension.
    fn on_bit(&self, b: usize) -> Option<(usize, f64)> {
        let m = self.matrix();
        let (a0, a1) = (m[b], m[2 + b]); // column b
        match (a0 != 0.0, a1 != 0.0) {
            (true, false) => Some((0, a0)),
            (false, true) => Some((1, a1)),
            (false, false) => None,
            (true, true) => unreachable!("all tags are monomial"),
        }
    }
}

/// One product term: `coeff * prod_k op_k(site_k)`, sites strictly ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coeff: f64,
    pub factors: Vec<(usize, OpTag)>,
}

impl Term {
    pub fn new(coeff: f64, mut factors: Vec<(usize, OpTag)>) -> Self {
        factors.sort_by_key(|f| f.0);
        Term { coeff, factors }
    }
}

/// A sum of product terms over `qubit_count` qubits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermList {
    pub qubit_count: usize,
    pub terms: Vec<Term>,
}

impl TermList {
    pub fn new(qubit_count: usize) -> Self {
        TermList {
            qubit_count,
            terms: Vec::new(),
        }
    }

    pub fn push(&mut self, coeff: f64, factors: Vec<(usize, OpTag)>) {
        debug_assert!(factors.iter().all(|f| f.0 < self.qubit_count));
        self.terms.push(Term::new(coeff, factors));
    }

    /// `out += H v` (matrix-free term application).
    pub fn apply_add(&self, v: &[f64], out: &mut [f64]) {
        let n = self.qubit_count;
        debug_assert_eq!(v.len(), 1 << n);
        for term in &self.terms {
            'basis: for (idx, &amp_in) in v.iter().enumerate() {
                if amp_in == 0.0 {
                    continue;
                }
                let mut idx_out = idx;
                let mut amp = term.coeff * amp_in;
                for &(site, tag) in &term.factors {
                    let p = n - 1 - site;
                    let b = (idx >> p) & 1;
                    match tag.on_bit(b) {
                        Some((nb, a)) => {
                            amp *= a;
                            if nb != b {
                                idx_out ^= 1 << p;
                            }
                        }
                        None => continue 'basis,
                    }
                }
                out[idx_out] += amp;
            }
        }
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        self.apply_add(v, &mut out);
        out
    }

    /// `<v|H|v>`.
    pub fn expectation(&self, v: &[f64]) -> f64 {
        let hv = self.apply(v);
        v.iter().zip(&hv).map(|(a, b)| a * b).sum()
    }

    /// Dense row-major matrix; intended for small qubit counts.
    pub fn densify(&self) -> Result<Tensor> {
        let n = self.qubit_count;
        if n > 12 {
            return Err(QtnError::SizeLimit(
                "dense Hamiltonian assembly capped at 12 qubits".into(),
            ));
        }
        let dim = 1usize << n;
        let mut mat = vec![0.0; dim * dim];
        for term in &self.terms {
            'col: for col in 0..dim {
                let mut row = col;
                let mut amp = term.coeff;
                for &(site, tag) in &term.factors {
                    let p = n - 1 - site;
                    let b = (col >> p) & 1;
                    match tag.on_bit(b) {
                        Some((nb, a)) => {
                            amp *= a;
                            if nb != b {
                                row ^= 1 << p;
                            }
                        }
                        None => continue 'col,
                    }
                }
                mat[row * dim + col] += amp;
            }
        }
        Tensor::from_data(&[dim, dim], mat)
    }

    /// Merge with another list (same qubit count).
    pub fn extend(&mut self, other: &TermList) {
        debug_assert_eq!(self.qubit_count, other.qubit_count);
        self.terms.extend(other.terms.iter().cloned());
    }

    pub fn scaled(&self, f: f64) -> TermList {
        TermList {
            qubit_count: self.qubit_count,
            terms: self
                .terms
                .iter()
                .map(|t| Term {
                    coeff: f * t.coeff,
                    factors: t.factors.clone(),
                })
                .collect(),
        }
    }
}

fn default_j() -> f64 {
    1.0
}
fn default_t() -> f64 {
    1.0
}
fn default_u() -> f64 {
    3.0
}
fn default_mu() -> f64 {
    0.3
}

/// Which model, geometry and couplings to build.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum ModelSpec {
    #[serde(rename = "heisenberg-1d")]
    Heisenberg1d {
        l: usize,
        #[serde(default = "default_j")]
        j: f64,
    },
    #[serde(rename = "heisenberg-2d-snake")]
    Heisenberg2dSnake {
        rows: usize,
        cols: usize,
        #[serde(default = "default_j")]
        j: f64,
    },
    #[serde(rename = "fermi-hubbard-1d")]
    FermiHubbard1d {
        /// Fermionic site count; the qubit count is twice this.
        sites: usize,
        #[serde(default = "default_t")]
        t: f64,
        #[serde(default = "default_u")]
        u: f64,
        #[serde(default = "default_mu")]
        mu: f64,
    },
}

impl ModelSpec {
    pub fn heisenberg(l: usize) -> Self {
        ModelSpec::Heisenberg1d { l, j: 1.0 }
    }

    pub fn hubbard(sites: usize) -> Self {
        ModelSpec::FermiHubbard1d {
            sites,
            t: 1.0,
            u: 3.0,
            mu: 0.3,
        }
    }

    pub fn qubit_count(&self) -> usize {
        match self {
            ModelSpec::Heisenberg1d { l, .. } => *l,
            ModelSpec::Heisenberg2dSnake { rows, cols, .. } => rows * cols,
            ModelSpec::FermiHubbard1d { sites, .. } => 2 * sites,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Heisenberg1d { .. } => "heisenberg-1d",
            ModelSpec::Heisenberg2dSnake { .. } => "heisenberg-2d-snake",
            ModelSpec::FermiHubbard1d { .. } => "fermi-hubbard-1d",
        }
    }
}

/// Chain position of lattice coordinate `(r, c)` in snake (boustrophedon)
/// order: row-major with alternating row direction.
pub fn snake_index(r: usize, c: usize, cols: usize) -> usize {
    if r % 2 == 0 {
        r * cols + c
    } else {
        r * cols + (cols - 1 - c)
    }
}

/// Inverse of [`snake_index`].
pub fn snake_coords(idx: usize, cols: usize) -> (usize, usize) {
    let r = idx / cols;
    let c = idx % cols;
    if r % 2 == 0 {
        (r, c)
    } else {
        (r, cols - 1 - c)
    }
}

/// Nearest-neighbour bonds of the 2D lattice as snake-chain index pairs,
/// each with the lower index first, sorted.
pub fn snake_bonds(rows: usize, cols: usize) -> Vec<(usize, usize)> {
    let mut bonds = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let here = snake_index(r, c, cols);
            if c + 1 < cols {
                let right = snake_index(r, c + 1, cols);
                bonds.push((here.min(right), here.max(right)));
            }
            if r + 1 < rows {
                let down = snake_index(r + 1, c, cols);
                bonds.push((here.min(down), here.max(down)));
            }
        }
    }
    bonds.sort_unstable();
    bonds
}

fn exchange_terms(terms: &mut TermList, j: f64, a: usize, b: usize) {
    terms.push(0.5 * j, vec![(a, OpTag::Sp), (b, OpTag::Sm)]);
    terms.push(0.5 * j, vec![(a, OpTag::Sm), (b, OpTag::Sp)]);
    terms.push(j, vec![(a, OpTag::Sz), (b, OpTag::Sz)]);
}

/// Fermionic hopping `-t (c\dag_p c_q + c\dag_q c_p)` between modes `p < q`
/// with the Jordan-Wigner string on the modes in between.
fn hopping_terms(terms: &mut TermList, t: f64, p: usize, q: usize) {
    let string: Vec<(usize, OpTag)> = (p + 1..q).map(|k| (k, OpTag::PauliZ)).collect();
    let mut f1 = vec![(p, OpTag::Create)];
    f1.extend(string.iter().cloned());
    f1.push((q, OpTag::Annihilate));
    terms.push(-t, f1);
    let mut f2 = vec![(p, OpTag::Annihilate)];
    f2.extend(string.iter().cloned());
    f2.push((q, OpTag::Create));
    terms.push(-t, f2);
}

/// Build the model's qubit term list.
pub fn build_terms(spec: &ModelSpec) -> Result<TermList> {
    match spec {
        ModelSpec::Heisenberg1d { l, j } => {
            if *l < 2 {
                return Err(QtnError::InvalidArgument(
                    "Heisenberg chain needs L >= 2".into(),
                ));
            }
            let mut terms = TermList::new(*l);
            for i in 0..l - 1 {
                exchange_terms(&mut terms, *j, i, i + 1);
            }
            Ok(terms)
        }
        ModelSpec::Heisenberg2dSnake { rows, cols, j } => {
            if *rows < 1 || *cols < 1 || rows * cols < 2 {
                return Err(QtnError::InvalidArgument("degenerate 2D geometry".into()));
            }
            let mut terms = TermList::new(rows * cols);
            for (a, b) in snake_bonds(*rows, *cols) {
                exchange_terms(&mut terms, *j, a, b);
            }
            Ok(terms)
        }
        ModelSpec::FermiHubbard1d { sites, t, u, mu } => {
            if *sites < 1 {
                return Err(QtnError::InvalidArgument(
                    "Hubbard chain needs at least one site".into(),
                ));
            }
            let n = 2 * sites;
            let mut terms = TermList::new(n);
            for i in 0..*sites {
                let (up, dn) = (2 * i, 2 * i + 1);
                if i + 1 < *sites {
                    hopping_terms(&mut terms, *t, up, up + 2);
                    hopping_terms(&mut terms, *t, dn, dn + 2);
                }
                terms.push(*u, vec![(up, OpTag::NumOp), (dn, OpTag::NumOp)]);
                terms.push(-mu, vec![(up, OpTag::NumOp)]);
                terms.push(-mu, vec![(dn, OpTag::NumOp)]);
            }
            Ok(terms)
        }
    }
}

/// Total particle number for the Hubbard encoding (JW correctness checks).
pub fn hubbard_number_operator(sites: usize) -> TermList {
    let mut terms = TermList::new(2 * sites);
    for k in 0..2 * sites {
        terms.push(1.0, vec![(k, OpTag::NumOp)]);
    }
    terms
}

/// `S_a . S_b` as a term list for the model's site layout. For spin chains a
/// site is one qubit; for Hubbard the spin operator is built from the two
/// modes of the fermionic site.
pub fn spin_dot(spec: &ModelSpec, a: usize, b: usize) -> TermList {
    let n = spec.qubit_count();
    let mut terms = TermList::new(n);
    match spec {
        ModelSpec::Heisenberg1d { .. } | ModelSpec::Heisenberg2dSnake { .. } => {
            let (a, b) = (a.min(b), a.max(b));
            exchange_terms(&mut terms, 1.0, a, b);
        }
        ModelSpec::FermiHubbard1d { .. } => {
            let (ua, da) = (2 * a, 2 * a + 1);
            let (ub, db) = (2 * b, 2 * b + 1);
            // S+_a S-_b / 2 + S-_a S+_b / 2 with S+ = c\dag_up c_dn
            terms.push(
                0.5,
                vec![
                    (ua, OpTag::Create),
                    (da, OpTag::Annihilate),
                    (ub, OpTag::Annihilate),
                    (db, OpTag::Create),
                ],
            );
            terms.push(
                0.5,
                vec![
                    (ua, OpTag::Annihilate),
                    (da, OpTag::Create),
                    (ub, OpTag::Create),
                    (db, OpTag::Annihilate),
                ],
            );
            // Sz_a Sz_b with Sz = (n_up - n_dn)/2
            for (sa, fa) in [(ua, 0.5), (da, -0.5)] {
                for (sb, fb) in [(ub, 0.5), (db, -0.5)] {
                    terms.push(fa * fb, vec![(sa, OpTag::NumOp), (sb, OpTag::NumOp)]);
                }
            }
        }
    }
    terms
}

/// On-site `S_a^2`.
pub fn spin_square(spec: &ModelSpec, a: usize) -> TermList {
    let n = spec.qubit_count();
    let mut terms = TermList::new(n);
    match spec {
        ModelSpec::Heisenberg1d { .. } | ModelSpec::Heisenberg2dSnake { .. } => {
            terms.push(0.75, vec![]);
        }
        ModelSpec::FermiHubbard1d { .. } => {
            let (up, dn) = (2 * a, 2 * a + 1);
            terms.push(0.75, vec![(up, OpTag::NumOp)]);
            terms.push(0.75, vec![(dn, OpTag::NumOp)]);
            terms.push(-1.5, vec![(up, OpTag::NumOp), (dn, OpTag::NumOp)]);
        }
    }
    terms
}

/// Exact MPO from a term list by the finite-state-machine construction,
/// followed by an SVD compression pass at relative cutoff 1e-12.
pub fn terms_to_mpo(t: &TermList) -> Result<Mpo> {
    let l = t.qubit_count;
    if l < 1 {
        return Err(QtnError::InvalidArgument("empty term list".into()));
    }
    // carrier states per bond: 0 = ready, 1 = done, then one per open term
    // (term starts at its first factor's site, closes at its last)
    #[derive(Clone, Copy, PartialEq)]
    enum St {
        Ready,
        Done,
        Open(usize),
    }
    let bond_states = |bond: usize| -> Vec<St> {
        // bond between site `bond` and `bond + 1`
        let mut v = vec![St::Ready, St::Done];
        for (ti, term) in t.terms.iter().enumerate() {
            if term.factors.is_empty() {
                continue;
            }
            let first = term.factors[0].0;
            let last = term.factors[term.factors.len() - 1].0;
            if first <= bond && bond < last {
                v.push(St::Open(ti));
            }
        }
        v
    };

    let mut cores = Vec::with_capacity(l);
    for site in 0..l {
        let left: Vec<St> = if site == 0 {
            vec![St::Ready]
        } else {
            bond_states(site - 1)
        };
        let right: Vec<St> = if site == l - 1 {
            vec![St::Done]
        } else {
            bond_states(site)
        };
        let (dl, dr) = (left.len(), right.len());
        let mut core = Tensor::zeros(&[dl, 2, 2, dr]);
        let mut add = |li: usize, ri: usize, mat: [f64; 4], scale: f64| {
            for o in 0..2 {
                for i in 0..2 {
                    let v = core.get(&[li, o, i, ri]) + scale * mat[o * 2 + i];
                    core.set(&[li, o, i, ri], v);
                }
            }
        };
        for (li, ls) in left.iter().enumerate() {
            for (ri, rs) in right.iter().enumerate() {
                match (ls, rs) {
                    (St::Ready, St::Ready) => add(li, ri, OpTag::I.matrix(), 1.0),
                    (St::Done, St::Done) => add(li, ri, OpTag::I.matrix(), 1.0),
                    (St::Ready, St::Done) => {
                        // single-site terms and identity terms land here
                        for term in &t.terms {
                            if term.factors.is_empty() {
                                // constant term: spread evenly over sites
                                if site == 0 {
                                    add(li, ri, OpTag::I.matrix(), term.coeff);
                                }
                            } else if term.factors.len() == 1 && term.factors[0].0 == site {
                                add(li, ri, term.factors[0].1.matrix(), term.coeff);
                            } else if term.factors.len() > 1
                                && term.factors[0].0 == site
                                && term.factors[term.factors.len() - 1].0 == site
                            {
                                unreachable!("factors are sorted and distinct");
                            }
                        }
                    }
                    (St::Ready, St::Open(ti)) => {
                        let term = &t.terms[*ti];
                        if term.factors[0].0 == site {
                            add(li, ri, term.factors[0].1.matrix(), 1.0);
                        }
                    }
                    (St::Open(ti), St::Open(tj)) if ti == tj => {
                        let term = &t.terms[*ti];
                        let here = term
                            .factors
                            .iter()
                            .find(|f| f.0 == site)
                            .map(|f| f.1.matrix())
                            .unwrap_or(OpTag::I.matrix());
                        add(li, ri, here, 1.0);
                    }
                    (St::Open(ti), St::Done) => {
                        let term = &t.terms[*ti];
                        let last = term.factors[term.factors.len() - 1];
                        if last.0 == site {
                            add(li, ri, last.1.matrix(), term.coeff);
                        }
                    }
                    _ => {}
                }
            }
        }
        cores.push(core);
    }
    let mut mpo = Mpo { tensors: cores };
    mpo.compress(1e-12);
    Ok(mpo)
}
