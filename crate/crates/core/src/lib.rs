//! Cat and squeezed-cat states of a cavity mode coupled to a SQUID charge
//! qubit.
//!
//! [`analytic`] holds the closed-form evolutions, [`hilbert`] the truncated
//! Fock-space machinery used to check them, [`model`] the device parameters
//! and Hamiltonians, [`measurement`] projective qubit readout, and
//! [`experiments`] the sweeps and consistency harness driven by the CLI.

pub mod analytic;
pub mod cli;
pub mod error;
pub mod experiments;
pub mod hilbert;
pub mod measurement;
pub mod model;

pub use error::{Error, Result};
pub use num_complex::Complex64;
