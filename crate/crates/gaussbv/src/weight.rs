//! Convex log-density weights for the tilted measure ν = e^{-U} γ.
//!
//! Three built-in families cover the regimes the estimators are exercised on:
//! the zero weight (ν = γ), diagonal quadratics U(x) = ½⟨Kx, x⟩ whose
//! Malliavin Hessian is constant, and the smoothed norm U(x) = κ√(1 + |x|²)
//! whose gradient is globally bounded. All three are convex with H-Lipschitz
//! Malliavin gradient; the recorded constant bounds
//! |D_H U(x+h) − D_H U(x)|_H ≤ h_lip·|h|_H.

use crate::error::{GaussBvError, Result};
use crate::model::{GaussianModel, HVector, Point};
use serde::{Deserialize, Serialize};

/// A convex weight with analytic calculus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ConvexWeight {
    /// U ≡ 0: the unweighted Gaussian case.
    Zero,
    /// U(x) = ½ Σ k_i x_i² with k_i ≥ 0.
    Quadratic { k_diag: Vec<f64> },
    /// U(x) = κ √(1 + |x|²), κ ≥ 0: convex with |∇U| ≤ κ.
    SmoothedNorm { kappa: f64 },
}

impl ConvexWeight {
    /// Validate parameters against the model dimension.
    pub fn validate(&self, model: &GaussianModel) -> Result<()> {
        match self {
            ConvexWeight::Zero => Ok(()),
            ConvexWeight::Quadratic { k_diag } => {
                if k_diag.len() != model.dim() {
                    return Err(GaussBvError::DimensionMismatch {
                        expected: model.dim(),
                        got: k_diag.len(),
                    });
                }
                if k_diag.iter().any(|&k| k < 0.0 || !k.is_finite()) {
                    return Err(GaussBvError::InvalidParameter {
                        name: "k_diag",
                        reason: "quadratic weight needs finite k_i >= 0".into(),
                    });
                }
                Ok(())
            }
            ConvexWeight::SmoothedNorm { kappa } => {
                if *kappa < 0.0 || !kappa.is_finite() {
                    return Err(GaussBvError::InvalidParameter {
                        name: "kappa",
                        reason: "smoothed-norm weight needs finite kappa >= 0".into(),
                    });
                }
                Ok(())
            }
        }
    }

    pub fn value(&self, x: &Point) -> f64 {
        match self {
            ConvexWeight::Zero => 0.0,
            ConvexWeight::Quadratic { k_diag } => {
                0.5 * k_diag
                    .iter()
                    .zip(&x.coords)
                    .map(|(k, xi)| k * xi * xi)
                    .sum::<f64>()
            }
            ConvexWeight::SmoothedNorm { kappa } => {
                let n2: f64 = x.coords.iter().map(|xi| xi * xi).sum();
                kappa * (1.0 + n2).sqrt()
            }
        }
    }

    /// Euclidean gradient ∇U(x).
    pub fn gradient(&self, x: &Point) -> Vec<f64> {
        match self {
            ConvexWeight::Zero => vec![0.0; x.dim()],
            ConvexWeight::Quadratic { k_diag } => k_diag
                .iter()
                .zip(&x.coords)
                .map(|(k, xi)| k * xi)
                .collect(),
            ConvexWeight::SmoothedNorm { kappa } => {
                let n2: f64 = x.coords.iter().map(|xi| xi * xi).sum();
                let s = (1.0 + n2).sqrt();
                x.coords.iter().map(|xi| kappa * xi / s).collect()
            }
        }
    }

    /// Euclidean Hessian ∇²U(x), PSD by convexity.
    pub fn hessian(&self, x: &Point) -> Vec<Vec<f64>> {
        let d = x.dim();
        match self {
            ConvexWeight::Zero => vec![vec![0.0; d]; d],
            ConvexWeight::Quadratic { k_diag } => {
                let mut h = vec![vec![0.0; d]; d];
                for i in 0..d {
                    h[i][i] = k_diag[i];
                }
                h
            }
            ConvexWeight::SmoothedNorm { kappa } => {
                let n2: f64 = x.coords.iter().map(|xi| xi * xi).sum();
                let s = (1.0 + n2).sqrt();
                let s3 = s * s * s;
                let mut h = vec![vec![0.0; d]; d];
                for i in 0..d {
                    for j in 0..d {
                        let mut v = -kappa * x.coords[i] * x.coords[j] / s3;
                        if i == j {
                            v += kappa / s;
                        }
                        h[i][j] = v;
                    }
                }
                h
            }
        }
    }

    /// Malliavin gradient D_H U(x), v-coordinates λ_i ∂_i U.
    pub fn h_gradient(&self, model: &GaussianModel, x: &Point) -> HVector {
        let g = self.gradient(x);
        HVector::new(
            model
                .eigenvalues()
                .iter()
                .zip(&g)
                .map(|(&l, &gi)| l * gi)
                .collect(),
        )
    }

    /// Apply the Malliavin Hessian to an H-vector: v-coordinates
    /// (D_H²U · h)_i = λ_i Σ_j ∂²_ij U · h_j. H-self-adjoint since ∇²U is
    /// symmetric.
    pub fn h_hessian_apply(
        &self,
        model: &GaussianModel,
        x: &Point,
        h: &HVector,
    ) -> HVector {
        let hess = self.hessian(x);
        let d = x.dim();
        let mut out = vec![0.0; d];
        for i in 0..d {
            let mut acc = 0.0;
            for j in 0..d {
                acc += hess[i][j] * h.coords[j];
            }
            out[i] = model.lambda(i) * acc;
        }
        HVector::new(out)
    }

    /// Hilbert–Schmidt norm of D_H²U at x: (Σ_ij λ_i λ_j (∂²_ij U)²)^½.
    pub fn h_hessian_hs_norm(&self, model: &GaussianModel, x: &Point) -> f64 {
        let hess = self.hessian(x);
        let d = x.dim();
        let mut acc = 0.0;
        for i in 0..d {
            for j in 0..d {
                let v = hess[i][j];
                acc += model.lambda(i) * model.lambda(j) * v * v;
            }
        }
        acc.sqrt()
    }

    /// H-Lipschitz constant of D_H U: sup over x of the H-operator norm of
    /// Q∇²U, closed form per family.
    pub fn h_lip(&self, model: &GaussianModel) -> f64 {
        match self {
            ConvexWeight::Zero => 0.0,
            // Q∇²U = diag(λ_i k_i) is H-self-adjoint with those eigenvalues.
            ConvexWeight::Quadratic { k_diag } => k_diag
                .iter()
                .zip(model.eigenvalues())
                .map(|(k, l)| k * l)
                .fold(0.0, f64::max),
            // ‖∇²U‖ ≤ κ everywhere, and |Q^{1/2}·| ≤ √λ_1 on each side.
            ConvexWeight::SmoothedNorm { kappa } => kappa * model.lambda_max(),
        }
    }

    /// Infimum of U, used to size rejection-sampling envelopes: e^{-U} ≤
    /// e^{-inf U} everywhere.
    pub fn min_value(&self) -> f64 {
        match self {
            ConvexWeight::Zero => 0.0,
            ConvexWeight::Quadratic { .. } => 0.0,
            ConvexWeight::SmoothedNorm { kappa } => *kappa,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn probe_points(dim: usize) -> Vec<Point> {
        let vals = [-2.0, -0.5, 0.0, 0.7, 1.9];
        vals.iter()
            .map(|&v| Point::new((0..dim).map(|k| v + 0.3 * k as f64).collect()))
            .collect()
    }

    #[test]
    fn gradients_match_finite_differences() {
        let weights = [
            ConvexWeight::Zero,
            ConvexWeight::Quadratic { k_diag: vec![0.5, 2.0] },
            ConvexWeight::SmoothedNorm { kappa: 0.8 },
        ];
        for w in &weights {
            for x in probe_points(2) {
                let g = w.gradient(&x);
                for i in 0..2 {
                    let h = 1e-6 * x.coords[i].abs().max(1.0);
                    let mut xp = x.clone();
                    xp.coords[i] += h;
                    let fp = w.value(&xp);
                    xp.coords[i] -= 2.0 * h;
                    let fm = w.value(&xp);
                    let fd = (fp - fm) / (2.0 * h);
                    assert_relative_eq!(g[i], fd, epsilon = 1e-6, max_relative = 1e-5);
                }
            }
        }
    }

    #[test]
    fn hessians_are_psd_on_probes() {
        let weights = [
            ConvexWeight::Quadratic { k_diag: vec![0.5, 2.0] },
            ConvexWeight::SmoothedNorm { kappa: 1.3 },
        ];
        for w in &weights {
            for x in probe_points(2) {
                let h = w.hessian(&x);
                // 2x2 PSD: nonnegative diagonal and determinant.
                assert!(h[0][0] >= -1e-12);
                assert!(h[1][1] >= -1e-12);
                assert!(h[0][0] * h[1][1] - h[0][1] * h[1][0] >= -1e-12);
            }
        }
    }

    #[test]
    fn h_lipschitz_bound_holds_on_probe_pairs() {
        let m = GaussianModel::new(vec![2.0, 1.0]).unwrap();
        let weights = [
            ConvexWeight::Quadratic { k_diag: vec![0.5, 2.0] },
            ConvexWeight::SmoothedNorm { kappa: 0.8 },
        ];
        for w in &weights {
            let lip = w.h_lip(&m);
            for x in probe_points(2) {
                for hv in [
                    HVector::new(vec![0.17, -0.05]),
                    HVector::new(vec![-0.3, 0.21]),
                ] {
                    let xh = Point::new(vec![
                        x.coords[0] + hv.coords[0],
                        x.coords[1] + hv.coords[1],
                    ]);
                    let diff = w.h_gradient(&m, &xh).sub(&w.h_gradient(&m, &x));
                    assert!(
                        m.h_norm(&diff) <= lip * m.h_norm(&hv) + 1e-12,
                        "lip violated for {w:?} at {x:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn quadratic_hs_norm_is_constant() {
        let m = GaussianModel::new(vec![1.0]).unwrap();
        let w = ConvexWeight::Quadratic { k_diag: vec![1.0] };
        for x in probe_points(1) {
            assert_relative_eq!(w.h_hessian_hs_norm(&m, &x), 1.0);
        }
    }
}
