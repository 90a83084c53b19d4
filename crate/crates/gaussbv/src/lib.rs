//! Bounded variation and perimeter under weighted Gaussian measures on
//! convex domains, computed through semigroups.
//!
//! The library realizes, in finite-dimensional truncations, the semigroup
//! approach to BV functions for measures ν = e^{-U} γ restricted to a convex
//! domain Ω: the total variation is recovered as the monotone limit
//!
//! ```text
//!     |D_ν u|(Ω) = lim_{t↓0} ∫_Ω |D_H T_Ω(t) u|_H dν,
//! ```
//!
//! and perimeters admit equivalent short-time characterizations through
//! semigroup content functionals. Everything is organized around four
//! layers:
//!
//! - a Gaussian model (eigenvalues of the covariance, the Cameron–Martin
//!   metric, exact Mehler smoothing) in [`model`], [`mehler`],
//! - convex weights, convex domains, and the penalized potential
//!   Φ_ε = U + d_Ω²/2ε in [`weight`], [`domain`], [`potential`],
//! - SDE and PDE engines for the weighted and penalized semigroups with
//!   pathwise Malliavin gradients in [`sde`], [`pde1d`],
//! - estimators and identity checks built on top: variation curves,
//!   perimeter contents, integration-by-parts duality, commutation and
//!   variation-of-constants residuals in [`bv`], [`checks`].
//!
//! All Monte Carlo entry points take explicit seeds and produce results that
//! are bit-identical for a given seed regardless of thread count.

pub mod bv;
pub mod checks;
pub mod config;
pub mod domain;
pub mod error;
pub mod estimate;
pub mod field;
pub mod mehler;
pub mod model;
pub mod pde1d;
pub mod potential;
pub mod quadrature;
pub mod rng;
pub mod runner;
pub mod sde;
pub mod weight;

pub use error::{GaussBvError, Result};
pub use model::{GaussianModel, HVector, Point};
