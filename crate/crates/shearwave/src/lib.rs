//! Spectral analysis and linear evolution of capillary–gravity waves on a
//! monotone shear flow U(x2), x2 in [-h, 0].

pub mod banded;
pub mod dispersion;
pub mod error;
pub mod evolution;
pub mod local;
pub mod ode;
pub mod oracles;
pub mod profile;
pub mod quad;
pub mod rayleigh;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
