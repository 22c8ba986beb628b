//! Spin-spin correlation profiles `<S_0 . S_r> - <S_0^2>`.

use crate::Result;
use qctn::ansatz::AnsatzDescriptor;
use qctn::hamiltonian::{spin_dot, spin_square, terms_to_mpo, ModelSpec, TermList};
use qctn::mps::{mpo_expectation, qmps_to_dense_mps, Mps};

/// Where the state comes from.
pub enum CorrelationSource<'a> {
    Ansatz(&'a AnsatzDescriptor),
    Mps(&'a Mps),
    Vector(&'a [f64]),
}

/// Number of model sites (spin sites; fermionic sites for Hubbard).
pub fn model_sites(model: &ModelSpec) -> usize {
    match model {
        ModelSpec::Heisenberg1d { l, .. } => *l,
        ModelSpec::Heisenberg2dSnake { rows, cols, .. } => rows * cols,
        ModelSpec::FermiHubbard1d { sites, .. } => *sites,
    }
}

/// `<S_0 . S_r> - <S_0^2>` for `r = 1..=r_max` (site 0 fixed).
pub fn correlation_profile(
    source: CorrelationSource<'_>,
    model: &ModelSpec,
    r_max: usize,
) -> Result<Vec<(usize, f64)>> {
    let sites = model_sites(model);
    let r_max = r_max.min(sites.saturating_sub(1));
    let mut out = Vec::with_capacity(r_max);
    let sq = spin_square(model, 0);
    let expect = |obs: &TermList| -> Result<f64> {
        match &source {
            CorrelationSource::Ansatz(a) => {
                if !a.blocks.is_empty() {
                    let m = qmps_to_dense_mps(a)?;
                    Ok(mpo_expectation(&m, &terms_to_mpo(obs)?))
                } else {
                    let v = a.realize_statevector()?;
                    Ok(obs.expectation(&v))
                }
            }
            CorrelationSource::Mps(m) => Ok(mpo_expectation(m, &terms_to_mpo(obs)?)),
            CorrelationSource::Vector(v) => Ok(obs.expectation(v)),
        }
    };
    let s0sq = expect(&sq)?;
    for r in 1..=r_max {
        let dot = expect(&spin_dot(model, 0, r))?;
        out.push((r, dot - s0sq));
    }
    Ok(out)
}

pub fn profile_csv(profile: &[(usize, f64)]) -> String {
    let mut s = String::from("r,value\n");
    for (r, v) in profile {
        s.push_str(&format!("{r},{v:.16e}\n"));
    }
    s
}
