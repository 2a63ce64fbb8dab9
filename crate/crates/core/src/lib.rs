//! Approximate quantum state tomography of amplitude-encoded functions by
//! Chebyshev expansion.
//!
//! A pure state whose amplitudes sample a (complex) function on a uniform grid
//! is read out by estimating its overlaps with orthonormal Chebyshev basis
//! states. Each overlap is measured with a simulated Hadamard test, and the
//! state is rebuilt from the truncated series once the accumulated coefficient
//! energy reaches a threshold.
//!
//! Modules:
//!
//! * [`statevec`]: dense statevector simulator (gates, postselection, shots).
//! * [`chebyshev`]: classical Chebyshev core and the exact coefficient oracle.
//! * [`circuits`]: basis-preparation and Hadamard-test circuits, estimators.
//! * [`tomography`]: the shell-by-shell driver with its stopping rule.
//! * [`fields`]: test functions, flow-field encoding, spectra, file formats.
//! * [`cli`]: the `chebyqst` command-line front end.
//!
//! Bit convention used throughout: basis index `k = sum_j b_j 2^j`, where
//! qubit `j` carries bit `b_j` (qubit 0 is least significant). Multi-dimensional
//! grids are flattened row-major with dimension 1 slowest, so dimension 1 sits
//! on the most significant register qubits.
//!
//! Inner products conjugate their first argument everywhere.

pub mod chebyshev;
pub mod circuits;
pub mod cli;
mod error;
pub mod fields;
pub mod statevec;
pub mod tomography;

pub use error::{Error, Result};
pub use num_complex::Complex64;
