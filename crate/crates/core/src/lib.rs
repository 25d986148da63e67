//! Wavelet-Galerkin learning of elliptic pseudo-differential operators on the
//! unit circle, and the data-driven Galerkin solver built on top of it.
//!
//! The pipeline, end to end:
//!
//! 1. [`wavelets`] - periodized biorthogonal spline wavelets: filter banks,
//!    analysis/synthesis transforms, support geometry and Sobolev weights.
//! 2. [`fields`] - ground-truth operators (Fourier multipliers, fractional
//!    Schroedinger powers) and Whittle-Matern random fields; dataset
//!    generation for the regression model `F = U A + W`.
//! 3. [`galerkin`] - reference Galerkin matrices, weighted operator norms and
//!    blockwise norm utilities.
//! 4. [`compression`] - the learning-oriented sparse support `supp(J,t,t')`:
//!    distance thresholds, slope conditions, D1-D6 block classification.
//! 5. [`estimator`] - nested-support columnwise least squares, restriction
//!    and symmetrization, error-component reporting.
//! 6. [`solver`] - the learned operator as a Galerkin solver, with
//!    ellipticity verification.

pub mod compression;
pub mod estimator;
pub mod fields;
pub mod galerkin;
pub mod linalg;
pub mod solver;
pub mod wavelets;

mod error;

pub use error::{Error, Result};
