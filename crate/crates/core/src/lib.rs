//! Algebraic solution of the resonant two-mode Jaynes-Cummings model.
//!
//! A two-level atom couples to two degenerate cavity modes. An SU(2) rotation
//! of the mode operators produces two quasi-modes of which only the first
//! couples to the atom, so the dynamics reduce to a one-mode JC model. The
//! mode and quasi-mode Fock bases are related block-wise by Wigner
//! D-matrices whose Euler angles depend only on the coupling constants.
//!
//! Modules:
//! - [`fock`]: labels, states and density operators on the truncated
//!   two-mode Fock space.
//! - [`wigner`]: Wigner d/D matrices and coupling-derived Euler angles.
//! - [`quasimode`]: mode <-> quasi-mode basis transform.
//! - [`evolution`]: interaction-picture time evolution, partial trace and
//!   atom detection.
//! - [`schemes`]: single-step, conditional and non-conditional generation of
//!   entangled N-photon states.
//! - [`oracle`]: brute-force evolution of the truncated Hamiltonian.
//! - [`cli`]: command implementations behind the `twomode-jc` binary.

pub mod cli;
pub mod error;
pub mod evolution;
pub mod fock;
pub mod oracle;
pub mod quasimode;
pub mod schemes;
pub mod wigner;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
