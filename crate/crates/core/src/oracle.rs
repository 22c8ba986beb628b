//! Exact diagonalization for verification at small sizes.
//!
//! Dense eigensolve up to 10 qubits; matrix-free Lanczos with full
//! reorthogonalization up to 22. Degenerate ground spaces are flagged, not
//! resolved.

use crate::error::{QtnError, Result};
use crate::hamiltonian::{build_terms, ModelSpec, TermList};
use crate::linalg::{lanczos_lowest, symmetric_eigen_dense};

pub const ED_DENSE_LIMIT: usize = 10;
pub const ED_LANCZOS_LIMIT: usize = 22;
const DEGENERACY_GAP: f64 = 1e-8;
const RESIDUAL_TOL: f64 = 1e-9;

/// Ground-state eigenpair of a model Hamiltonian.
#[derive(Debug, Clone)]
pub struct EdResult {
    pub ground_energy: f64,
    pub ground_vector: Vec<f64>,
    pub qubit_count: usize,
    /// Gap to the next Ritz value was below 1e-8.
    pub degenerate: bool,
}

/// Lowest eigenpair of the model's Hamiltonian.
pub fn ed_ground_state(spec: &ModelSpec) -> Result<EdResult> {
    let terms = build_terms(spec)?;
    ed_ground_state_of_terms(&terms)
}

/// Lowest eigenpair of an arbitrary symmetric term list.
pub fn ed_ground_state_of_terms(terms: &TermList) -> Result<EdResult> {
    let n = terms.qubit_count;
    if n > ED_LANCZOS_LIMIT {
        return Err(QtnError::SizeLimit(format!(
            "exact diagonalization capped at {ED_LANCZOS_LIMIT} qubits, got {n}"
        )));
    }
    let dim = 1usize << n;
    let (e0, e1, v0) = if n <= ED_DENSE_LIMIT {
        let h = terms.densify()?;
        let (vals, vecs) = symmetric_eigen_dense(dim, h.data());
        (vals[0], vals.get(1).copied().unwrap_or(f64::INFINITY), vecs[0].clone())
    } else {
        let apply = |v: &[f64], out: &mut [f64]| {
            out.fill(0.0);
            terms.apply_add(v, out);
        };
        let res = lanczos_lowest(dim, apply, 2, 11, RESIDUAL_TOL, None);
        if !res.converged {
            return Err(QtnError::Reference(
                "Lanczos did not reach the requested residual".into(),
            ));
        }
        (
            res.values[0],
            res.values.get(1).copied().unwrap_or(f64::INFINITY),
            res.vectors[0].clone(),
        )
    };
    // residual check
    let hv = terms.apply(&v0);
    let res = hv
        .iter()
        .zip(&v0)
        .map(|(h, v)| (h - e0 * v).abs())
        .fold(0.0f64, f64::max);
    if res > RESIDUAL_TOL * 10.0 {
        return Err(QtnError::Reference(format!(
            "eigenpair residual {res:.2e} too large"
        )));
    }
    Ok(EdResult {
        ground_energy: e0,
        ground_vector: v0,
        qubit_count: n,
        degenerate: (e1 - e0).abs() < DEGENERACY_GAP,
    })
}

/// `<v|O|v>` for the stored ground vector.
pub fn ed_expectation(result: &EdResult, observable: &TermList) -> Result<f64> {
    if observable.qubit_count != result.qubit_count {
        return Err(QtnError::Shape(format!(
            "observable on {} qubits against a {}-qubit state",
            observable.qubit_count, result.qubit_count
        )));
    }
    Ok(observable.expectation(&result.ground_vector))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{spin_dot, OpTag};

    #[test]
    fn heisenberg_two_site_singlet() {
        let r = ed_ground_state(&ModelSpec::heisenberg(2)).unwrap();
        assert!((r.ground_energy + 0.75).abs() < 1e-10);
        assert!(!r.degenerate);
    }

    #[test]
    fn heisenberg_three_site_value() {
        let r = ed_ground_state(&ModelSpec::heisenberg(3)).unwrap();
        assert!((r.ground_energy + 1.0).abs() < 1e-10);
        // total spin 1/2 ground state: doubly degenerate
        assert!(r.degenerate);
    }

    #[test]
    fn lanczos_path_agrees_with_dense_path() {
        // L=11 goes through Lanczos, L=10 through the dense solver; compare
        // on the shared physics via an L=10 cross-check of both codepaths
        let spec = ModelSpec::heisenberg(10);
        let dense = ed_ground_state(&spec).unwrap();
        let terms = build_terms(&spec).unwrap();
        let apply = |v: &[f64], out: &mut [f64]| {
            out.fill(0.0);
            terms.apply_add(v, out);
        };
        let lan = lanczos_lowest(1 << 10, apply, 2, 5, 1e-10, None);
        assert!((dense.ground_energy - lan.values[0]).abs() < 1e-9);
    }

    #[test]
    fn residual_invariant_holds() {
        for spec in [ModelSpec::heisenberg(8), ModelSpec::hubbard(3)] {
            let terms = build_terms(&spec).unwrap();
            let r = ed_ground_state(&spec).unwrap();
            let hv = terms.apply(&r.ground_vector);
            let res = hv
                .iter()
                .zip(&r.ground_vector)
                .map(|(h, v)| (h - r.ground_energy * v).abs())
                .fold(0.0f64, f64::max);
            assert!(res < 1e-9);
            let norm: f64 = r.ground_vector.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn hubbard_single_site_degenerate_ground() {
        let r = ed_ground_state(&ModelSpec::hubbard(1)).unwrap();
        assert!((r.ground_energy + 0.3).abs() < 1e-10);
        assert!(r.degenerate);
    }

    #[test]
    fn identity_expectation_is_one() {
        let r = ed_ground_state(&ModelSpec::heisenberg(4)).unwrap();
        let mut id = TermList::new(4);
        id.push(1.0, vec![]);
        assert!((ed_expectation(&r, &id).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn singlet_spin_correlation() {
        let spec = ModelSpec::heisenberg(2);
        let r = ed_ground_state(&spec).unwrap();
        let obs = spin_dot(&spec, 0, 1);
        assert!((ed_expectation(&r, &obs).unwrap() + 0.75).abs() < 1e-10);
    }

    #[test]
    fn correlation_matches_dense_operator_route() {
        let spec = ModelSpec::heisenberg(10);
        let r = ed_ground_state(&spec).unwrap();
        let obs = spin_dot(&spec, 0, 5);
        let via_terms = ed_expectation(&r, &obs).unwrap();
        let dense = obs.densify().unwrap();
        let n = 1 << 10;
        let mut acc = 0.0;
        for row in 0..n {
            let mut hv = 0.0;
            for col in 0..n {
                hv += dense.get(&[row, col]) * r.ground_vector[col];
            }
            acc += r.ground_vector[row] * hv;
        }
        assert!((via_terms - acc).abs() < 1e-11);
    }

    #[test]
    fn size_cap_is_refused() {
        let spec = ModelSpec::heisenberg(23);
        assert!(ed_ground_state(&spec).is_err());
    }

    #[test]
    fn mismatched_observable_is_refused() {
        let r = ed_ground_state(&ModelSpec::heisenberg(4)).unwrap();
        let mut obs = TermList::new(5);
        obs.push(1.0, vec![(0, OpTag::Sz)]);
        assert!(ed_expectation(&r, &obs).is_err());
    }
}
