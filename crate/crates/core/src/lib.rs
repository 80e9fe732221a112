//! Sparse estimation for losses driven by several linear combinations of the
//! covariates, and for marginal likelihoods with hidden linear covariates.
//!
//! The crate is organised around six areas:
//!
//! * [`model`]: loss families, block designs, box domains and parameter vectors.
//! * [`theory`]: closed-form evaluators for the constants and thresholds of the
//!   stochastic Lipschitz and Lasso error bounds, returned as [`BoundReport`]s.
//! * [`solver`]: proximal gradient for `f(u) + λ‖u‖₁` over a box.
//! * [`diagnostics`]: restricted eigenvalue search and sparse spectral norms.
//! * [`rademacher`]: Monte Carlo / exact-enumeration checks of the comparison
//!   inequalities, concentration lemmas and tail bounds.
//! * [`hidden`]: the tilted hidden-letter model with Gaussian emissions, solved
//!   by exact enumeration of the latent space.
//!
//! [`experiment`] wires these into the end-to-end Lasso pipeline.

pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod hidden;
pub mod json;
pub mod model;
pub mod rademacher;
pub mod rng;
pub mod solver;
pub mod stats;
pub mod theory;

pub use error::{Error, Result};
pub use theory::BoundReport;
