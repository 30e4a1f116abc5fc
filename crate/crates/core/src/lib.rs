//! Exact non-Markovian entanglement dynamics of two oscillators coupled to a
//! common bosonic bath.
//!
//! * [`gaussian`]: covariance matrices, symplectic spectra, logarithmic negativity.
//! * [`bath`]: Ohmic spectral density, thermal occupations and discretization.
//! * [`exact`]: exact Gaussian evolution of system plus discretized bath.
//! * [`rwa`]: amplitude equations and master-equation coefficients for the
//!   number-conserving coupling.
//! * [`asymptotics`]: equilibrium dispersions, the entanglement envelope and
//!   the SD/SDR/NSD classifier.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod exact;
pub mod arrowhead;
pub mod asymptotics;
pub mod bath;
pub mod gaussian;
pub mod quad;
pub mod rwa;

pub use error::{Error, Result};
