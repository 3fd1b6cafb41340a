//! Spectral solver for the complex Monge-Ampère equation on Hermitian
//! complex tori, with diagnostics for Hermitian geometry, a priori estimate
//! measurements, pointwise identity checks and Chern-Ricci prescription.

// Positivity checks are written `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimates;
pub mod field;
pub mod geometry;
pub mod grid;
pub mod identities;
pub mod io;
pub mod krylov;
pub mod mat;
mod par;
pub mod prescription;
pub mod samples;
pub mod solver;

pub use error::{Error, Result};
pub use field::{integrate, ComplexField, HermitianField, Metric, ScalarField};
pub use grid::{Coords, DiffScheme, Grid, GridSpec};
pub use mat::Mat;
