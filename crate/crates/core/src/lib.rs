//! Exact diagonalization and localization analysis for few bosons in
//! one-dimensional Bose-Hubbard superlattices.

pub mod error;
pub mod fockspace;
pub mod format;
pub mod bloch;
pub mod detector;
pub mod dynamics;
pub mod model;
pub mod observables;
pub mod spectral;
pub mod spectstats;

pub use error::{Error, Result};
pub use faer;
pub use num_complex::Complex64;
