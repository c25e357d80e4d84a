//! Alternating-direction-implicit Legendre-Galerkin solver for two-dimensional
//! multi-term time-fractional mixed diffusion and diffusion-wave equations.
//!
//! The equation is reduced to first order in time by a fractional integral,
//! discretized in time by weighted and shifted Grünwald operators (optionally
//! with starting-weight corrections for solutions like `t^σ`), and in space by
//! the Shen basis `L_i - L_{i+2}` in each direction.

pub mod adi_solver;
pub mod cli;
pub mod error;
pub mod frac_weights;
pub mod problems;
pub mod spectral_basis;
pub mod tridiag;
pub mod validation_oracle;

pub use error::{Error, Result};
