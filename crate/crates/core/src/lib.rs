//! Simulation and analysis toolkit for impurity-induced particle growth and
//! operator scrambling in one-dimensional free-fermion chains.
//!
//! * [`lattice`]: chains, quadratic Hamiltonians, impurity descriptors
//! * [`freeprop`]: single-particle propagators, return probabilities, power-law fits
//! * [`gaussian`]: Gaussian-state engine (correlation matrices and Slater orbitals)
//! * [`monitored`]: measurement-and-feedback trajectories and ensembles
//! * [`exactmb`]: exact interacting dynamics in a Fock basis
//! * [`opdyn`]: Heisenberg operator weights, operator entanglement, Floquet and Majorana evolution
//! * [`renewal`]: renewal-equation solver, branching arithmetic, configuration entropy

// Chain and basis types expose `len` as a size, never as an empty container.
// Negated comparisons are deliberate so that NaN fails validation.
// Quadrature tables keep their published digits.
#![allow(clippy::len_without_is_empty, clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod error;
pub mod exactmb;
pub mod freeprop;
pub mod gaussian;
pub mod lattice;
pub mod linalg;
pub mod monitored;
pub mod opdyn;
pub mod renewal;

pub use error::{Error, Result};
