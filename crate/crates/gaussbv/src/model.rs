//! Finite-dimensional Gaussian reference measure and Cameron–Martin geometry.
//!
//! The ambient space is R^d with coordinates taken in the eigenbasis (v_k) of
//! the covariance operator, so the reference measure factorizes as
//!
//! ```text
//!     γ = N(0, λ_1) ⊗ … ⊗ N(0, λ_d),      λ_1 ≥ λ_2 ≥ … ≥ λ_d > 0.
//! ```
//!
//! The Cameron–Martin space H is R^d equipped with the rescaled inner product
//!
//! ```text
//!     ⟨h, k⟩_H = Σ_i h_i k_i / λ_i,
//! ```
//!
//! whose orthonormal basis is e_i = √λ_i v_i. All vectors in this crate store
//! v-coordinates; only the metric distinguishes an [`HVector`] from a plain
//! coordinate tuple. The Malliavin gradient of a smooth f is the H-vector with
//! v-coordinates λ_i ∂f/∂x_i, so that |D_H f|_H² = Σ λ_i (∂_i f)².

use crate::error::{GaussBvError, Result};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Spectrum of the covariance operator, fixed for a whole experiment.
///
/// Eigenvalues are variances: coordinate i of a γ-sample has law N(0, λ_i).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianModel {
    eigenvalues: Vec<f64>,
}

impl GaussianModel {
    /// Build a model from a non-increasing list of positive eigenvalues.
    pub fn new(eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(GaussBvError::InvalidParameter {
                name: "eigenvalues",
                reason: "at least one eigenvalue required".into(),
            });
        }
        for w in eigenvalues.windows(2) {
            if w[1] > w[0] {
                return Err(GaussBvError::InvalidParameter {
                    name: "eigenvalues",
                    reason: format!("must be non-increasing, got {} before {}", w[0], w[1]),
                });
            }
        }
        if eigenvalues.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
            return Err(GaussBvError::InvalidParameter {
                name: "eigenvalues",
                reason: "all eigenvalues must be finite and strictly positive".into(),
            });
        }
        Ok(Self { eigenvalues })
    }

    /// Geometric spectrum λ_k = λ_1 ρ^(k-1), k = 1..=dim.
    pub fn geometric(dim: usize, lambda1: f64, rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(GaussBvError::InvalidParameter {
                name: "rho",
                reason: format!("decay ratio must lie in (0, 1], got {rho}"),
            });
        }
        let eig = (0..dim).map(|k| lambda1 * rho.powi(k as i32)).collect();
        Self::new(eig)
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn lambda(&self, i: usize) -> f64 {
        self.eigenvalues[i]
    }

    /// Largest eigenvalue λ_1 = ‖Q^{1/2}‖².
    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// Smallest eigenvalue λ_d; sets the stiffest intrinsic time scale.
    pub fn lambda_min(&self) -> f64 {
        *self.eigenvalues.last().unwrap()
    }

    /// Trace Σ λ_k, reported alongside experiment output.
    pub fn trace(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }

    /// ⟨h, k⟩_H = Σ h_i k_i / λ_i. Symmetric and bilinear.
    pub fn h_inner(&self, h: &HVector, k: &HVector) -> Result<f64> {
        if h.coords.len() != self.dim() || k.coords.len() != self.dim() {
            return Err(GaussBvError::DimensionMismatch {
                expected: self.dim(),
                got: h.coords.len().max(k.coords.len()),
            });
        }
        Ok(self
            .eigenvalues
            .iter()
            .zip(h.coords.iter().zip(&k.coords))
            .map(|(&l, (&a, &b))| a * b / l)
            .sum())
    }

    /// |h|_H = sqrt(Σ h_i²/λ_i).
    pub fn h_norm(&self, h: &HVector) -> f64 {
        self.eigenvalues
            .iter()
            .zip(&h.coords)
            .map(|(&l, &a)| a * a / l)
            .sum::<f64>()
            .sqrt()
    }

    /// One γ-sample drawn from the provided generator.
    pub fn sample_gamma_with<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let coords = self
            .eigenvalues
            .iter()
            .map(|&l| l.sqrt() * rng.sample::<f64, _>(StandardNormal))
            .collect();
        Point { coords }
    }

    /// n i.i.d. γ-samples, deterministic in the seed.
    pub fn sample_gamma(&self, n: usize, seed: u64) -> Result<Vec<Point>> {
        if n == 0 {
            return Err(GaussBvError::InvalidParameter {
                name: "n",
                reason: "sample count must be at least 1".into(),
            });
        }
        let mut rng = crate::rng::substream(seed, crate::rng::Tag::GammaSampling, 0);
        Ok((0..n).map(|_| self.sample_gamma_with(&mut rng)).collect())
    }
}

/// A point of the ambient space, v-coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub coords: Vec<f64>,
}

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        Self { coords }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { coords: vec![0.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

/// A Cameron–Martin vector, v-coordinates read through the H metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HVector {
    pub coords: Vec<f64>,
}

impl HVector {
    pub fn new(coords: Vec<f64>) -> Self {
        Self { coords }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { coords: vec![0.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn add(&self, other: &HVector) -> HVector {
        HVector::new(
            self.coords
                .iter()
                .zip(&other.coords)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    pub fn sub(&self, other: &HVector) -> HVector {
        HVector::new(
            self.coords
                .iter()
                .zip(&other.coords)
                .map(|(a, b)| a - b)
                .collect(),
        )
    }

    pub fn scale(&self, s: f64) -> HVector {
        HVector::new(self.coords.iter().map(|a| a * s).collect())
    }
}

/// Multiply the i-th coordinate by e^{-t/λ_i}.
///
/// This is the diagonal semigroup generated by -Q^{-1}; it contracts the
/// H norm since every factor lies in (0, 1] for t ≥ 0.
pub fn exp_neg_t_qinv(model: &GaussianModel, t: f64, h: &HVector) -> HVector {
    HVector::new(
        model
            .eigenvalues()
            .iter()
            .zip(&h.coords)
            .map(|(&l, &a)| a * (-t / l).exp())
            .collect(),
    )
}
