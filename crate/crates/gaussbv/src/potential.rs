//! The penalized potential that folds a convex domain into the weight.
//!
//! Experiments on a domain Ω never simulate reflected dynamics. Instead the
//! domain enters through the penalty term
//!
//! ```text
//!     Φ_ε(x) = U(x) + d_Ω²(x) / (2ε),
//! ```
//!
//! which is again convex with H-Lipschitz Malliavin gradient, so the same
//! SDE engine serves the whole-space, weighted, and domain-constrained
//! semigroups. As ε ↓ 0 the measure e^{-Φ_ε} dγ collapses onto Ω and the
//! penalized semigroup converges to the domain one; `epsilon: None` encodes
//! the unpenalized potential Φ = U.

use crate::domain::ConvexDomain;
use crate::error::{GaussBvError, Result};
use crate::model::{GaussianModel, HVector, Point};
use crate::weight::ConvexWeight;
use serde::{Deserialize, Serialize};

/// Weight plus optional domain penalty, the drift potential of every SDE run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PenalizedPotential {
    pub weight: ConvexWeight,
    pub domain: ConvexDomain,
    /// Penalty strength; `None` means no penalty term (whole-space dynamics).
    pub epsilon: Option<f64>,
}

impl PenalizedPotential {
    pub fn new(
        weight: ConvexWeight,
        domain: ConvexDomain,
        epsilon: Option<f64>,
    ) -> Result<Self> {
        if let Some(eps) = epsilon {
            if !(eps > 0.0) || !eps.is_finite() {
                return Err(GaussBvError::InvalidParameter {
                    name: "epsilon",
                    reason: format!("penalty strength must be positive, got {eps}"),
                });
            }
        }
        Ok(Self { weight, domain, epsilon })
    }

    /// Plain weight, no domain: heat-bath dynamics for T(t) or T_U(t).
    pub fn unpenalized(weight: ConvexWeight) -> Self {
        Self { weight, domain: ConvexDomain::WholeSpace, epsilon: None }
    }

    pub fn validate(&self, model: &GaussianModel) -> Result<()> {
        self.weight.validate(model)?;
        self.domain.validate(model)
    }

    /// Φ_ε(x) = U(x) + d_Ω²(x)/(2ε).
    pub fn value(&self, model: &GaussianModel, x: &Point) -> Result<f64> {
        let mut v = self.weight.value(x);
        if let Some(eps) = self.epsilon {
            let d = self.domain.distance_h(model, x)?;
            v += d * d / (2.0 * eps);
        }
        Ok(v)
    }

    /// Euclidean gradient ∂_i Φ_ε; the penalty part is (x − π(x))_i / (ε λ_i).
    pub fn gradient(&self, model: &GaussianModel, x: &Point) -> Result<Vec<f64>> {
        let mut g = self.weight.gradient(x);
        if let Some(eps) = self.epsilon {
            let gh = self.domain.grad_h_dist_sq(model, x)?;
            for i in 0..x.dim() {
                // D_H d² has v-coordinates 2(x−π); the Euclidean partial is
                // that over λ_i, and the penalty divides by 2ε.
                g[i] += gh.coords[i] / (2.0 * eps * model.lambda(i));
            }
        }
        Ok(g)
    }

    /// Malliavin gradient D_H Φ_ε with v-coordinates λ_i ∂_i Φ_ε.
    pub fn h_gradient(&self, model: &GaussianModel, x: &Point) -> Result<HVector> {
        let g = self.gradient(model, x)?;
        Ok(HVector::new(
            (0..x.dim()).map(|i| model.lambda(i) * g[i]).collect(),
        ))
    }

    /// Euclidean Hessian ∂²_ij Φ_ε.
    pub fn hessian(&self, model: &GaussianModel, x: &Point) -> Result<Vec<Vec<f64>>> {
        let d = x.dim();
        let mut h = self.weight.hessian(x);
        if let Some(eps) = self.epsilon {
            // hess_h_dist_sq returns H coordinates √(λ_iλ_j)∂²_ij d²; undo
            // the scaling and divide by 2ε.
            let hd = self.domain.hess_h_dist_sq(model, x)?;
            for i in 0..d {
                for j in 0..d {
                    let scale = (model.lambda(i) * model.lambda(j)).sqrt();
                    h[i][j] += hd[i][j] / (scale * 2.0 * eps);
                }
            }
        }
        Ok(h)
    }

    /// H-Lipschitz constant of D_H Φ_ε: the weight's plus 2/(2ε) = 1/ε from
    /// the 2-Lipschitz gradient of d².
    pub fn h_lip(&self, model: &GaussianModel) -> f64 {
        let base = self.weight.h_lip(model);
        match self.epsilon {
            Some(eps) => base + 1.0 / eps,
            None => base,
        }
    }

    /// Allocation-free drift evaluation for the path loops:
    /// out_i = −x_i − λ_i ∂_i Φ_ε(x). Returns false when a projection fails.
    ///
    /// Weights and the linear-boundary penalties (half-space, slab) are
    /// written out by hand; curved domains fall back to the allocating
    /// projection route, which only cheap exploratory runs use.
    pub fn drift_into(
        &self,
        model: &GaussianModel,
        x: &Point,
        out: &mut [f64],
    ) -> bool {
        let d = x.dim();
        match &self.weight {
            ConvexWeight::Zero => {
                for i in 0..d {
                    out[i] = -x.coords[i];
                }
            }
            ConvexWeight::Quadratic { k_diag } => {
                for i in 0..d {
                    out[i] = -x.coords[i] * (1.0 + model.lambda(i) * k_diag[i]);
                }
            }
            ConvexWeight::SmoothedNorm { kappa } => {
                let s = (1.0
                    + x.coords.iter().map(|v| v * v).sum::<f64>())
                .sqrt();
                for i in 0..d {
                    out[i] =
                        -x.coords[i] - model.lambda(i) * kappa * x.coords[i] / s;
                }
            }
        }
        let Some(eps) = self.epsilon else { return true };
        match &self.domain {
            ConvexDomain::WholeSpace => {}
            ConvexDomain::HalfSpace { a, c } => {
                let s: f64 =
                    a.iter().zip(&x.coords).map(|(ai, xi)| ai * xi).sum();
                if s > *c {
                    let qn2: f64 = model
                        .eigenvalues()
                        .iter()
                        .zip(a)
                        .map(|(&l, &ai)| l * ai * ai)
                        .sum();
                    let scale = (s - c) / (eps * qn2);
                    for i in 0..d {
                        out[i] -= model.lambda(i) * a[i] * scale;
                    }
                }
            }
            ConvexDomain::Slab { a, lo, hi } => {
                let s: f64 =
                    a.iter().zip(&x.coords).map(|(ai, xi)| ai * xi).sum();
                let excess =
                    if s > *hi { s - hi } else if s < *lo { s - lo } else { 0.0 };
                if excess != 0.0 {
                    let qn2: f64 = model
                        .eigenvalues()
                        .iter()
                        .zip(a)
                        .map(|(&l, &ai)| l * ai * ai)
                        .sum();
                    let scale = excess / (eps * qn2);
                    for i in 0..d {
                        out[i] -= model.lambda(i) * a[i] * scale;
                    }
                }
            }
            _ => {
                // Curved boundary: take (x − π(x))/ε through the projection.
                let Ok(g) = self.domain.grad_h_dist_sq(model, x) else {
                    return false;
                };
                for i in 0..d {
                    out[i] -= g.coords[i] / (2.0 * eps);
                }
            }
        }
        true
    }

    /// Allocation-free row-major λ_i ∂²_ij Φ_ε(x), the matrix that drives the
    /// first-variation flow. Same closed-form coverage as [`Self::drift_into`].
    pub fn lambda_hessian_into(
        &self,
        model: &GaussianModel,
        x: &Point,
        out: &mut [f64],
    ) -> bool {
        let d = x.dim();
        match &self.weight {
            ConvexWeight::Zero => {
                out[..d * d].fill(0.0);
            }
            ConvexWeight::Quadratic { k_diag } => {
                out[..d * d].fill(0.0);
                for i in 0..d {
                    out[i * d + i] = model.lambda(i) * k_diag[i];
                }
            }
            ConvexWeight::SmoothedNorm { kappa } => {
                let s2 = 1.0 + x.coords.iter().map(|v| v * v).sum::<f64>();
                let s = s2.sqrt();
                for i in 0..d {
                    for j in 0..d {
                        let id = if i == j { 1.0 } else { 0.0 };
                        out[i * d + j] = model.lambda(i)
                            * kappa
                            * (id / s - x.coords[i] * x.coords[j] / (s2 * s));
                    }
                }
            }
        }
        let Some(eps) = self.epsilon else { return true };
        match &self.domain {
            ConvexDomain::WholeSpace => {}
            ConvexDomain::HalfSpace { a, c } => {
                let s: f64 =
                    a.iter().zip(&x.coords).map(|(ai, xi)| ai * xi).sum();
                if s > *c {
                    add_linear_penalty_hessian(model, a, eps, out, d);
                }
            }
            ConvexDomain::Slab { a, lo, hi } => {
                let s: f64 =
                    a.iter().zip(&x.coords).map(|(ai, xi)| ai * xi).sum();
                if s > *hi || s < *lo {
                    add_linear_penalty_hessian(model, a, eps, out, d);
                }
            }
            _ => {
                let Ok(hd) = self.domain.hess_h_dist_sq(model, x) else {
                    return false;
                };
                // hess_h_dist_sq is in H coordinates √(λ_iλ_j)∂²_ij d²;
                // convert to λ_i ∂²_ij and divide by 2ε.
                for i in 0..d {
                    for j in 0..d {
                        let scale =
                            (model.lambda(i) / model.lambda(j)).sqrt();
                        out[i * d + j] += scale * hd[i][j] / (2.0 * eps);
                    }
                }
            }
        }
        true
    }
}

/// λ_i ∂²_ij of the linear-boundary penalty d²/(2ε) outside the closure:
/// the Euclidean Hessian of d² there is the constant 2 a aᵀ / |Q^{1/2}a|².
fn add_linear_penalty_hessian(
    model: &GaussianModel,
    a: &[f64],
    eps: f64,
    out: &mut [f64],
    d: usize,
) {
    let qn2: f64 = model
        .eigenvalues()
        .iter()
        .zip(a)
        .map(|(&l, &ai)| l * ai * ai)
        .sum();
    for i in 0..d {
        for j in 0..d {
            out[i * d + j] += model.lambda(i) * a[i] * a[j] / (eps * qn2);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn no_penalty_reduces_to_weight() {
        let m = GaussianModel::new(vec![2.0, 1.0]).unwrap();
        let w = ConvexWeight::Quadratic { k_diag: vec![0.5, 0.25] };
        let p = PenalizedPotential::unpenalized(w.clone());
        let x = Point::new(vec![1.0, -2.0]);
        assert_relative_eq!(p.value(&m, &x).unwrap(), w.value(&x));
        assert_eq!(p.gradient(&m, &x).unwrap(), w.gradient(&x));
    }

    #[test]
    fn penalty_vanishes_inside_the_domain() {
        let m = GaussianModel::new(vec![1.0]).unwrap();
        let p = PenalizedPotential::new(
            ConvexWeight::Zero,
            ConvexDomain::HalfSpace { a: vec![1.0], c: 1.0 },
            Some(0.1),
        )
        .unwrap();
        let x = Point::new(vec![0.2]);
        assert_relative_eq!(p.value(&m, &x).unwrap(), 0.0);
        assert_eq!(p.gradient(&m, &x).unwrap(), vec![0.0]);
    }

    #[test]
    fn halfspace_penalty_closed_form() {
        // λ = 1, Ω = {x < 0}: Φ_ε(x) = x²/(2ε) outside, gradient x/ε.
        let m = GaussianModel::new(vec![1.0]).unwrap();
        let eps = 0.25;
        let p = PenalizedPotential::new(
            ConvexWeight::Zero,
            ConvexDomain::HalfSpace { a: vec![1.0], c: 0.0 },
            Some(eps),
        )
        .unwrap();
        let x = Point::new(vec![1.5]);
        assert_relative_eq!(p.value(&m, &x).unwrap(), 1.5 * 1.5 / (2.0 * eps));
        assert_relative_eq!(p.gradient(&m, &x).unwrap()[0], 1.5 / eps);
        assert_relative_eq!(p.h_gradient(&m, &x).unwrap().coords[0], 1.5 / eps);
        assert_relative_eq!(p.hessian(&m, &x).unwrap()[0][0], 1.0 / eps);
    }

    #[test]
    fn potential_decreases_in_epsilon_and_blows_up() {
        let m = GaussianModel::new(vec![1.0, 1.0]).unwrap();
        let dom = ConvexDomain::HBall { center: vec![0.0, 0.0], radius: 1.0 };
        let x = Point::new(vec![2.0, 1.0]);
        let mut last = f64::INFINITY;
        for eps in [0.01, 0.05, 0.2, 1.0] {
            let p = PenalizedPotential::new(ConvexWeight::Zero, dom.clone(), Some(eps))
                .unwrap();
            let v = p.value(&m, &x).unwrap();
            assert!(v < last, "Φ_ε not decreasing in ε at ε = {eps}");
            last = v;
        }
        let tight = PenalizedPotential::new(ConvexWeight::Zero, dom, Some(1e-9))
            .unwrap();
        assert!(tight.value(&m, &x).unwrap() > 1e8);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let m = GaussianModel::new(vec![2.0, 0.5]).unwrap();
        let p = PenalizedPotential::new(
            ConvexWeight::SmoothedNorm { kappa: 0.7 },
            ConvexDomain::EuclideanBall { center: vec![0.0, 0.0], radius: 0.5 },
            Some(0.2),
        )
        .unwrap();
        let x = Point::new(vec![1.3, -0.9]);
        let g = p.gradient(&m, &x).unwrap();
        for i in 0..2 {
            let h = 1e-6;
            let mut xp = x.clone();
            xp.coords[i] += h;
            let mut xm = x.clone();
            xm.coords[i] -= h;
            let fd =
                (p.value(&m, &xp).unwrap() - p.value(&m, &xm).unwrap()) / (2.0 * h);
            assert_relative_eq!(g[i], fd, max_relative = 1e-5);
        }
    }

    #[test]
    fn rejects_nonpositive_epsilon() {
        assert!(PenalizedPotential::new(
            ConvexWeight::Zero,
            ConvexDomain::WholeSpace,
            Some(0.0)
        )
        .is_err());
    }
}
