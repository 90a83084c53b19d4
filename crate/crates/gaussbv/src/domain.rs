//! Convex domains and the Cameron–Martin distance machinery.
//!
//! The distance from x to a convex domain Ω is measured along H:
//!
//! ```text
//!     d_Ω(x) = inf { |h|_H : h ∈ H, x + h ∈ Ω },
//! ```
//!
//! realized by the H-metric projection π(x) onto the closure. The squared
//! distance is H-differentiable with
//!
//! ```text
//!     D_H d²(x) = 2 (x − π(x)),          |D_H d²(x+h) − D_H d²(x)|_H ≤ 2|h|_H,
//! ```
//!
//! and its Malliavin Hessian is taken in closed form where available
//! (half-spaces, slabs) and by central differences of the projection gradient
//! otherwise. Projections reduce to scalar root finds: linear constraints
//! project in one step, balls rescale along an H-geodesic, ellipsoids and
//! Euclidean balls need a safeguarded Newton solve on the KKT multiplier.

use crate::error::{GaussBvError, Result};
use crate::estimate::{mc_mean, Estimate};
use crate::model::{GaussianModel, HVector, Point};
use crate::rng::Tag;
use crate::weight::ConvexWeight;
use serde::{Deserialize, Serialize};

/// Iteration cap for multiplier root finds.
const NEWTON_MAX_ITERS: usize = 200;
/// KKT residual tolerance for projections.
const KKT_TOL: f64 = 1e-12;
/// Finite-difference step factor for Hessians of d².
const HESS_FD_STEP: f64 = 1e-5;

/// A convex domain with closed-form membership and projection data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ConvexDomain {
    /// Ω = X. Distance is identically zero.
    WholeSpace,
    /// Ω = {⟨a, x⟩ < c}.
    HalfSpace { a: Vec<f64>, c: f64 },
    /// Ω = {lo < ⟨a, x⟩ < hi}.
    Slab { a: Vec<f64>, lo: f64, hi: f64 },
    /// Ω = {|x − center|_H < radius}.
    HBall { center: Vec<f64>, radius: f64 },
    /// Ω = {Σ (x_i − c_i)² / (λ_i s_i²) < 1}: an ellipsoid in H coordinates
    /// with semi-axes s_i; all s_i equal reduces to `HBall`.
    HEllipsoid { center: Vec<f64>, semi_axes: Vec<f64> },
    /// Ω = {|x − center|₂ < radius} in the ambient Euclidean metric.
    EuclideanBall { center: Vec<f64>, radius: f64 },
}

impl ConvexDomain {
    pub fn validate(&self, model: &GaussianModel) -> Result<()> {
        let d = model.dim();
        let check_dim = |v: &Vec<f64>| -> Result<()> {
            if v.len() != d {
                Err(GaussBvError::DimensionMismatch { expected: d, got: v.len() })
            } else {
                Ok(())
            }
        };
        match self {
            ConvexDomain::WholeSpace => Ok(()),
            ConvexDomain::HalfSpace { a, .. } => {
                check_dim(a)?;
                if a.iter().all(|&ai| ai == 0.0) {
                    return Err(GaussBvError::InvalidParameter {
                        name: "a",
                        reason: "half-space normal must be nonzero".into(),
                    });
                }
                Ok(())
            }
            ConvexDomain::Slab { a, lo, hi } => {
                check_dim(a)?;
                if !(lo < hi) {
                    return Err(GaussBvError::InvalidParameter {
                        name: "lo/hi",
                        reason: format!("slab needs lo < hi, got {lo} >= {hi}"),
                    });
                }
                Ok(())
            }
            ConvexDomain::HBall { center, radius } => {
                check_dim(center)?;
                if !(*radius > 0.0) {
                    return Err(GaussBvError::InvalidParameter {
                        name: "radius",
                        reason: "ball radius must be positive".into(),
                    });
                }
                Ok(())
            }
            ConvexDomain::HEllipsoid { center, semi_axes } => {
                check_dim(center)?;
                check_dim(semi_axes)?;
                if semi_axes.iter().any(|&s| !(s > 0.0)) {
                    return Err(GaussBvError::InvalidParameter {
                        name: "semi_axes",
                        reason: "all semi-axes must be positive".into(),
                    });
                }
                Ok(())
            }
            ConvexDomain::EuclideanBall { center, radius } => {
                check_dim(center)?;
                if !(*radius > 0.0) {
                    return Err(GaussBvError::InvalidParameter {
                        name: "radius",
                        reason: "ball radius must be positive".into(),
                    });
                }
                Ok(())
            }
        }
    }

    pub fn contains(&self, model: &GaussianModel, x: &Point) -> bool {
        match self {
            ConvexDomain::WholeSpace => true,
            ConvexDomain::HalfSpace { a, c } => dot(a, &x.coords) < *c,
            ConvexDomain::Slab { a, lo, hi } => {
                let s = dot(a, &x.coords);
                *lo < s && s < *hi
            }
            ConvexDomain::HBall { center, radius } => {
                h_dist_to_center(model, center, x) < *radius
            }
            ConvexDomain::HEllipsoid { center, semi_axes } => {
                let mut acc = 0.0;
                for i in 0..x.dim() {
                    let z = (x.coords[i] - center[i]) / model.lambda(i).sqrt();
                    acc += (z / semi_axes[i]).powi(2);
                }
                acc < 1.0
            }
            ConvexDomain::EuclideanBall { center, radius } => {
                let n2: f64 = x
                    .coords
                    .iter()
                    .zip(center)
                    .map(|(xi, ci)| (xi - ci) * (xi - ci))
                    .sum();
                n2.sqrt() < *radius
            }
        }
    }

    /// H-metric projection onto the closure of Ω. Identity inside.
    pub fn h_projection(&self, model: &GaussianModel, x: &Point) -> Result<Point> {
        if self.contains(model, x) {
            return Ok(x.clone());
        }
        match self {
            ConvexDomain::WholeSpace => Ok(x.clone()),
            ConvexDomain::HalfSpace { a, c } => {
                Ok(project_onto_plane(model, a, *c, x, true))
            }
            ConvexDomain::Slab { a, lo, hi } => {
                let s = dot(a, &x.coords);
                if s >= *hi {
                    Ok(project_onto_plane(model, a, *hi, x, true))
                } else if s <= *lo {
                    Ok(project_onto_plane(model, a, *lo, x, false))
                } else {
                    Ok(x.clone())
                }
            }
            ConvexDomain::HBall { center, radius } => {
                let dist = h_dist_to_center(model, center, x);
                let scale = radius / dist;
                Ok(Point::new(
                    x.coords
                        .iter()
                        .zip(center)
                        .map(|(xi, ci)| ci + (xi - ci) * scale)
                        .collect(),
                ))
            }
            ConvexDomain::HEllipsoid { center, semi_axes } => {
                // Work in the H-orthonormal frame ẑ_i = (x_i − c_i)/√λ_i,
                // where the constraint is Σ ẑ_i²/s_i² ≤ 1 and the metric is
                // Euclidean. KKT gives ŷ_i = ẑ_i s_i²/(s_i² + μ) with the
                // multiplier pinned by g(μ) = Σ ŷ_i²/s_i² = 1.
                let d = x.dim();
                let zhat: Vec<f64> = (0..d)
                    .map(|i| (x.coords[i] - center[i]) / model.lambda(i).sqrt())
                    .collect();
                let g = |mu: f64| -> f64 {
                    (0..d)
                        .map(|i| {
                            let s2 = semi_axes[i] * semi_axes[i];
                            let y = zhat[i] * s2 / (s2 + mu);
                            y * y / s2
                        })
                        .sum::<f64>()
                        - 1.0
                };
                let dg = |mu: f64| -> f64 {
                    (0..d)
                        .map(|i| {
                            let s2 = semi_axes[i] * semi_axes[i];
                            -2.0 * zhat[i] * zhat[i] * s2 * s2
                                / (s2 + mu).powi(3)
                        })
                        .sum()
                };
                let mu = newton_decreasing(g, dg, "ellipsoid projection")?;
                Ok(Point::new(
                    (0..d)
                        .map(|i| {
                            let s2 = semi_axes[i] * semi_axes[i];
                            center[i]
                                + model.lambda(i).sqrt() * zhat[i] * s2 / (s2 + mu)
                        })
                        .collect(),
                ))
            }
            ConvexDomain::EuclideanBall { center, radius } => {
                // Minimize Σ h_i²/λ_i subject to |w + h|₂ ≤ r with w = x − c:
                // h_i = −μ λ_i w_i/(1 + μ λ_i), multiplier from
                // c(μ) = Σ w_i²/(1 + μ λ_i)² = r².
                let d = x.dim();
                let w: Vec<f64> =
                    (0..d).map(|i| x.coords[i] - center[i]).collect();
                let r2 = radius * radius;
                let g = |mu: f64| -> f64 {
                    (0..d)
                        .map(|i| {
                            let q = 1.0 + mu * model.lambda(i);
                            w[i] * w[i] / (q * q)
                        })
                        .sum::<f64>()
                        - r2
                };
                let dg = |mu: f64| -> f64 {
                    (0..d)
                        .map(|i| {
                            let l = model.lambda(i);
                            let q = 1.0 + mu * l;
                            -2.0 * w[i] * w[i] * l / (q * q * q)
                        })
                        .sum()
                };
                let mu = newton_decreasing(g, dg, "euclidean ball projection")?;
                Ok(Point::new(
                    (0..d)
                        .map(|i| center[i] + w[i] / (1.0 + mu * model.lambda(i)))
                        .collect(),
                ))
            }
        }
    }

    /// d_Ω(x): zero inside, |x − π(x)|_H outside.
    pub fn distance_h(&self, model: &GaussianModel, x: &Point) -> Result<f64> {
        if self.contains(model, x) {
            return Ok(0.0);
        }
        match self {
            // Closed form: positive part of the linear excess over the
            // H-norm of the conormal.
            ConvexDomain::HalfSpace { a, c } => {
                let excess = (dot(a, &x.coords) - c).max(0.0);
                Ok(excess / q_half_norm(model, a))
            }
            ConvexDomain::Slab { a, lo, hi } => {
                let s = dot(a, &x.coords);
                let excess = if s >= *hi { s - hi } else { lo - s };
                Ok(excess.max(0.0) / q_half_norm(model, a))
            }
            _ => {
                let p = self.h_projection(model, x)?;
                let diff = HVector::new(
                    x.coords.iter().zip(&p.coords).map(|(a, b)| a - b).collect(),
                );
                Ok(model.h_norm(&diff))
            }
        }
    }

    /// D_H d²(x) = 2 (x − π(x)) as an H-vector (v-coordinates).
    pub fn grad_h_dist_sq(&self, model: &GaussianModel, x: &Point) -> Result<HVector> {
        let p = self.h_projection(model, x)?;
        Ok(HVector::new(
            x.coords
                .iter()
                .zip(&p.coords)
                .map(|(a, b)| 2.0 * (a - b))
                .collect(),
        ))
    }

    /// Malliavin Hessian of d² at x in H coordinates:
    /// M_ij = √(λ_i λ_j) ∂²_ij d².
    ///
    /// Half-spaces and slabs outside the closure have the rank-one closed
    /// form with single H-eigenvalue 2; everything else is central
    /// differences of the projection gradient. Meaningless on ∂Ω, where the
    /// Hessian may jump; callers sample boundary points with probability
    /// zero.
    pub fn hess_h_dist_sq(
        &self,
        model: &GaussianModel,
        x: &Point,
    ) -> Result<Vec<Vec<f64>>> {
        let d = x.dim();
        let inside = self.contains(model, x);
        match self {
            ConvexDomain::WholeSpace => Ok(vec![vec![0.0; d]; d]),
            ConvexDomain::HalfSpace { a, .. } if !inside => {
                Ok(halfspace_hess(model, a))
            }
            ConvexDomain::Slab { a, .. } if !inside => Ok(halfspace_hess(model, a)),
            _ if inside => Ok(vec![vec![0.0; d]; d]),
            _ => {
                // ∂_j of the Euclidean gradient ∂_i d² = 2(x_i − π_i)/λ_i by
                // central differences, then scale into H coordinates.
                let mut hess = vec![vec![0.0; d]; d];
                let mut xp = x.clone();
                for j in 0..d {
                    let h = HESS_FD_STEP * x.coords[j].abs().max(1.0);
                    let xj = x.coords[j];
                    xp.coords[j] = xj + h;
                    let gp = self.grad_h_dist_sq(model, &xp)?;
                    xp.coords[j] = xj - h;
                    let gm = self.grad_h_dist_sq(model, &xp)?;
                    xp.coords[j] = xj;
                    for i in 0..d {
                        // v-coordinate gradient to Euclidean partials: divide
                        // by λ_i; H coordinates multiply by √(λ_i λ_j).
                        let ddij = (gp.coords[i] - gm.coords[i])
                            / (2.0 * h * model.lambda(i));
                        hess[i][j] = (model.lambda(i) * model.lambda(j)).sqrt() * ddij;
                    }
                }
                for i in 0..d {
                    for j in (i + 1)..d {
                        let s = 0.5 * (hess[i][j] + hess[j][i]);
                        hess[i][j] = s;
                        hess[j][i] = s;
                    }
                }
                Ok(hess)
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// |Q^{1/2} a| = (Σ λ_i a_i²)^{1/2}: the H-norm of the direction λ a.
fn q_half_norm(model: &GaussianModel, a: &[f64]) -> f64 {
    model
        .eigenvalues()
        .iter()
        .zip(a)
        .map(|(&l, &ai)| l * ai * ai)
        .sum::<f64>()
        .sqrt()
}

fn h_dist_to_center(model: &GaussianModel, center: &[f64], x: &Point) -> f64 {
    let diff = HVector::new(
        x.coords.iter().zip(center).map(|(xi, ci)| xi - ci).collect(),
    );
    model.h_norm(&diff)
}

/// H-projection onto the hyperplane ⟨a, y⟩ = c: the correction is along the
/// H-steepest direction λ a. `from_above` only disambiguates which side the
/// caller came from; the formula is the same.
fn project_onto_plane(
    model: &GaussianModel,
    a: &[f64],
    c: f64,
    x: &Point,
    _from_above: bool,
) -> Point {
    let qn2: f64 = model
        .eigenvalues()
        .iter()
        .zip(a)
        .map(|(&l, &ai)| l * ai * ai)
        .sum();
    let excess = dot(a, &x.coords) - c;
    Point::new(
        x.coords
            .iter()
            .zip(model.eigenvalues().iter().zip(a))
            .map(|(xi, (&l, &ai))| xi - excess * l * ai / qn2)
            .collect(),
    )
}

/// Outside a half-space, d²(x) = ⟨a,x−p⟩²/|Q^{1/2}a|² has constant Euclidean
/// Hessian 2 a aᵀ/|Q^{1/2}a|²; in H coordinates that is rank one with
/// eigenvalue exactly 2.
fn halfspace_hess(model: &GaussianModel, a: &[f64]) -> Vec<Vec<f64>> {
    let d = a.len();
    let qn2: f64 = model
        .eigenvalues()
        .iter()
        .zip(a)
        .map(|(&l, &ai)| l * ai * ai)
        .sum();
    let mut h = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in 0..d {
            h[i][j] = 2.0 * (model.lambda(i) * model.lambda(j)).sqrt() * a[i] * a[j]
                / qn2;
        }
    }
    h
}

/// Safeguarded Newton for a strictly decreasing g with g(0) > 0: find the
/// positive root. Falls back to bisection steps whenever Newton leaves the
/// bracket.
fn newton_decreasing(
    g: impl Fn(f64) -> f64,
    dg: impl Fn(f64) -> f64,
    what: &'static str,
) -> Result<f64> {
    // Bracket the root by doubling.
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut iters = 0;
    while g(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
        iters += 1;
        if iters > 100 {
            return Err(GaussBvError::NonConvergence { what, iters });
        }
    }
    let mut mu = 0.5 * (lo + hi);
    for _ in 0..NEWTON_MAX_ITERS {
        let val = g(mu);
        if val.abs() <= KKT_TOL {
            return Ok(mu);
        }
        if val > 0.0 {
            lo = mu;
        } else {
            hi = mu;
        }
        let slope = dg(mu);
        let step = if slope != 0.0 { mu - val / slope } else { f64::NAN };
        mu = if step.is_finite() && step > lo && step < hi {
            step
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo < f64::EPSILON * hi.max(1.0) {
            return Ok(mu);
        }
    }
    // The bracket collapsed to round-off without meeting the absolute
    // tolerance; accept the midpoint if the residual is merely at noise
    // scale, otherwise report.
    if g(mu).abs() <= 1e-9 {
        Ok(mu)
    } else {
        Err(GaussBvError::NonConvergence { what, iters: NEWTON_MAX_ITERS })
    }
}

/// Monte Carlo probe of the boundary-integrability functional
/// ∫_{Ω^c} d_Ω^{-4} ‖D_H² d_Ω²‖²_HS dν.
///
/// Finiteness of this integral is the admissibility condition for a
/// domain/weight pair; the probe reports an estimate whose growth under
/// larger n is the divergence signal (see [`divergence_flag`]). The integrand
/// is evaluated under γ with importance weight e^{-U}, zero inside Ω.
pub fn check_hyp_d(
    model: &GaussianModel,
    domain: &ConvexDomain,
    weight: &ConvexWeight,
    n: u64,
    seed: u64,
) -> Result<Estimate> {
    if n == 0 {
        return Err(GaussBvError::InvalidParameter {
            name: "n",
            reason: "sample count must be at least 1".into(),
        });
    }
    let est = mc_mean(n, seed, Tag::HypDProbe, |rng, _| {
        let x = model.sample_gamma_with(rng);
        if domain.contains(model, &x) {
            return 0.0;
        }
        let dist = match domain.distance_h(model, &x) {
            Ok(d) => d,
            Err(_) => return f64::NAN,
        };
        if dist == 0.0 {
            return 0.0;
        }
        let hess = match domain.hess_h_dist_sq(model, &x) {
            Ok(h) => h,
            Err(_) => return f64::NAN,
        };
        let hs2: f64 = hess.iter().flatten().map(|v| v * v).sum();
        (-weight.value(&x)).exp() * hs2 / dist.powi(4)
    });
    Ok(est)
}

/// Divergence heuristic for [`check_hyp_d`]: flag when the estimate at the
/// larger sample size exceeds the smaller one by more than five combined
/// standard errors.
pub fn divergence_flag(at_n: &Estimate, at_2n: &Estimate) -> bool {
    at_2n.value - at_n.value > 5.0 * at_n.combined_stderr(at_2n)
}
