//! Numerical spectral analysis of Dirac operators on thin curved waveguides
//! with infinite-mass boundary conditions.

pub mod banded;
pub mod certify;
pub mod effective;
pub mod eigensolve;
pub mod error;
pub mod geometry;
pub mod quadrature;
pub mod sparse;
pub mod spectrum;
pub mod strip;
pub mod transverse;

pub use error::{Error, Result};
