//! Spectral theory toolkit for even-order formally self-adjoint differential
//! operators with matrix coefficients on `[0, b)`.
//!
//! The crate computes canonical and fundamental solution frames, Weyl
//! functions, characteristic matrices of Nevanlinna boundary pairs, Green
//! kernels, generalized resolvents and eigenvalues of proper extensions.

pub mod charmat;
pub mod cli;
pub mod error;
pub mod expr;
pub mod linalg;
pub mod ode;
pub mod quad;
pub mod resolvent;
pub mod weyl;

pub use error::{Error, Result};
