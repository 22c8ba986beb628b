use qctn::hamiltonian::{build_terms, terms_to_mpo, ModelSpec};
use qctn::mps::dmrg_ground_state;
use qctn::oracle::ed_ground_state;
use std::time::Instant;

fn main() {
    for (name, spec, d) in [
        ("heis L=12 D=64", ModelSpec::heisenberg(12), 64usize),
        ("hubbard 4 sites D=64", ModelSpec::hubbard(4), 64),
        ("heis L=16 D=16", ModelSpec::heisenberg(16), 16),
        ("heis L=16 D=256", ModelSpec::heisenberg(16), 256),
    ] {
        let t0 = Instant::now();
        let terms = build_terms(&spec).unwrap();
        let mpo = terms_to_mpo(&terms).unwrap();
        let res = dmrg_ground_state(&mpo, d, 60, 1e-12, 0).unwrap();
        let e_dmrg = *res.energy_trace.last().unwrap();
        let t1 = t0.elapsed().as_secs_f64();
        let ed = ed_ground_state(&spec).unwrap();
        println!(
            "{name}: dmrg={:.12} ed={:.12} diff={:.2e} sweeps={} conv={} dmrg_time={:.1}s ed_time={:.1}s",
            e_dmrg, ed.ground_energy, e_dmrg - ed.ground_energy,
            res.energy_trace.len(), res.converged, t1, t0.elapsed().as_secs_f64() - t1
        );
        // monotone trace check
        for w in res.energy_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "trace not monotone: {:?}", res.energy_trace);
        }
    }
}
