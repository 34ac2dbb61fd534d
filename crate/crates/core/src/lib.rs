//! Reduction of the N-component nonlinear Schrödinger system to Korteweg–de
//! Vries dynamics: linear spectrum, KdV coefficients, NLS time integration,
//! reference KdV solvers and a comparison harness.

pub mod error;
pub mod symprod;
pub mod spectrum;
pub mod reduction;
pub mod nls;
pub mod kdvref;
pub mod harness;

pub use error::{Error, Result};
