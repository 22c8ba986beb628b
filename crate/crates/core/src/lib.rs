//! Classical engine for quantum-circuit tensor networks.
//!
//! Builds, evaluates and variationally optimizes circuit ansatze whose
//! structure is derived from tensor networks (qMPS, qMERA), alongside the
//! dense networks they sparsify (MPS/DMRG, MERA) and generic global circuits
//! (brick-wall, ladder). Everything is real-valued: gates live in SO(2^m),
//! states and operators are real tensors.
//!
//! The crate is organized bottom-up:
//!
//! * [`tensor`] — dense row-major tensors, contraction and factorizations
//! * [`gates`] — exponential-map parametrization of SO(2^m) gates
//! * [`ansatz`] — symbolic circuit descriptors for the ansatz families
//! * [`statevector`] — dense state simulation, the desk-scale oracle
//! * [`hamiltonian`] — Heisenberg / Fermi-Hubbard term lists and MPOs
//! * [`mps`] — dense MPS/MPO machinery, circuit-to-MPS conversion, DMRG
//! * [`objective`] — energy and infidelity evaluation with gradients
//! * [`optimize`] — local gate sweeps, CG, L-BFGS, adaptive depth growth
//! * [`oracle`] — exact diagonalization for verification

pub mod ansatz;
pub mod error;
pub mod gates;
pub mod hamiltonian;
pub mod linalg;
pub mod mps;
pub mod objective;
pub mod optimize;
pub mod oracle;
pub mod statevector;
pub mod tensor;

pub use error::{QtnError, Result};
pub use tensor::Tensor;
