//! One-dimensional Neumann reference solver for the domain semigroup.
//!
//! On an interval Ω = (lo, hi) the weighted Ornstein–Uhlenbeck operator in
//! divergence form is
//!
//! ```text
//!     L_Ω u = λ u'' − (x + λ U'(x)) u' = (λ / m) (m u')',
//!     m(x)  = e^{-U(x)} · N(0, λ) density,
//! ```
//!
//! so the natural discretization is a conservative finite-volume scheme:
//! cell averages u_i, face fluxes F_{i+1/2} = λ m_{i+1/2} (u_{i+1} − u_i)/h,
//! zero flux through the boundary faces. Because the column weights satisfy
//! mᵀA = 0 exactly, Crank–Nicolson preserves the discrete ν-mass Σ u_i m_i h
//! to solver round-off for any step size, which is the discrete form of the
//! Neumann invariance ∫_Ω T_Ω(t)u dν = ∫_Ω u dν.
//!
//! Half-lines and the whole space are truncated at |x| = 8√λ, where the
//! Gaussian mass outside is below 10⁻¹⁴; the truncated face is closed with
//! the same zero-flux condition.

use crate::domain::ConvexDomain;
use crate::error::{GaussBvError, Result};
use crate::field::ScalarField;
use crate::model::GaussianModel;
use crate::potential::PenalizedPotential;
use serde::{Deserialize, Serialize};

/// Spatial and temporal resolution of the reference solve.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_cells: usize,
    pub n_steps: usize,
}

impl GridSpec {
    pub fn new(n_cells: usize, n_steps: usize) -> Result<Self> {
        if n_cells < 8 {
            return Err(GaussBvError::InvalidParameter {
                name: "n_cells",
                reason: format!("need at least 8 cells, got {n_cells}"),
            });
        }
        if n_steps == 0 {
            return Err(GaussBvError::InvalidParameter {
                name: "n_steps",
                reason: "need at least one time step".into(),
            });
        }
        Ok(Self { n_cells, n_steps })
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { n_cells: 1600, n_steps: 400 }
    }
}

/// Tabulated T_Ω(t)f on cell centers, with the ν-weights needed to integrate
/// against the solution.
#[derive(Debug, Clone, Serialize)]
pub struct PdeSolution {
    /// Cell centers.
    pub nodes: Vec<f64>,
    /// Solution values at the final time.
    pub values: Vec<f64>,
    /// Unnormalized ν-measure of each cell, m(x_i)·h.
    pub nu_weights: Vec<f64>,
    /// Relative drift of the discrete mass over the whole solve.
    pub mass_drift: f64,
    pub t: f64,
}

impl PdeSolution {
    /// Piecewise-linear interpolation, clamped to the end cells.
    pub fn interpolate(&self, x: f64) -> f64 {
        let n = self.nodes.len();
        if x <= self.nodes[0] {
            return self.values[0];
        }
        if x >= self.nodes[n - 1] {
            return self.values[n - 1];
        }
        // Uniform grid: locate the cell directly.
        let h = self.nodes[1] - self.nodes[0];
        let k = (((x - self.nodes[0]) / h) as usize).min(n - 2);
        let w = (x - self.nodes[k]) / h;
        self.values[k] * (1.0 - w) + self.values[k + 1] * w
    }

    /// ∫_Ω g(x) dν over the grid for per-node samples of g.
    pub fn nu_integral(&self, g: &[f64]) -> f64 {
        g.iter().zip(&self.nu_weights).map(|(gi, wi)| gi * wi).sum()
    }
}

/// The interval Ω realizes as a 1D grid support, truncated at 8√λ.
fn interval_of(model: &GaussianModel, domain: &ConvexDomain) -> Result<(f64, f64)> {
    let l = 8.0 * model.lambda(0).sqrt();
    let (lo, hi) = match domain {
        ConvexDomain::WholeSpace => (-l, l),
        ConvexDomain::HalfSpace { a, c } => {
            let bound = c / a[0];
            if a[0] > 0.0 {
                ((-l).min(bound - 1.0), bound)
            } else {
                (bound, l.max(bound + 1.0))
            }
        }
        ConvexDomain::Slab { a, lo, hi } => {
            let (x0, x1) = (lo / a[0], hi / a[0]);
            (x0.min(x1), x0.max(x1))
        }
        ConvexDomain::HBall { center, radius } => {
            let r = radius * model.lambda(0).sqrt();
            (center[0] - r, center[0] + r)
        }
        ConvexDomain::HEllipsoid { center, semi_axes } => {
            let r = semi_axes[0] * model.lambda(0).sqrt();
            (center[0] - r, center[0] + r)
        }
        ConvexDomain::EuclideanBall { center, radius } => {
            (center[0] - radius, center[0] + radius)
        }
    };
    if !(lo < hi) {
        return Err(GaussBvError::InvalidParameter {
            name: "domain",
            reason: format!("degenerate interval [{lo}, {hi}]"),
        });
    }
    Ok((lo, hi))
}

/// Crank–Nicolson solve of ∂_t u = L_Ω u with zero-flux boundaries.
///
/// The domain and weight come from `potential`; an active penalty parameter
/// is ignored because this is the reference the penalized runs converge to.
pub fn pde_reference_1d(
    model: &GaussianModel,
    potential: &PenalizedPotential,
    f: &ScalarField,
    t: f64,
    spec: &GridSpec,
) -> Result<PdeSolution> {
    if model.dim() != 1 {
        return Err(GaussBvError::DimensionMismatch { expected: 1, got: model.dim() });
    }
    if t < 0.0 {
        return Err(GaussBvError::InvalidParameter {
            name: "t",
            reason: format!("time must be nonnegative, got {t}"),
        });
    }
    let lambda = model.lambda(0);
    let (lo, hi) = interval_of(model, &potential.domain)?;
    let n = spec.n_cells;
    let h = (hi - lo) / n as f64;

    let density = |x: f64| -> f64 {
        let u = potential.weight.value(&crate::model::Point::new(vec![x]));
        (-u - x * x / (2.0 * lambda)).exp()
            / (2.0 * std::f64::consts::PI * lambda).sqrt()
    };
    let nodes: Vec<f64> = (0..n).map(|i| lo + (i as f64 + 0.5) * h).collect();
    let m: Vec<f64> = nodes.iter().map(|&x| density(x)).collect();
    // Interior face weights m_{i+1/2}, evaluated at the faces.
    let mf: Vec<f64> = (1..n).map(|i| density(lo + i as f64 * h)).collect();
    if m.iter().chain(&mf).any(|v| !v.is_finite() || *v <= 0.0) {
        return Err(GaussBvError::NonConvergence {
            what: "pde grid weights underflowed",
            iters: 0,
        });
    }

    let mut u: Vec<f64> = nodes
        .iter()
        .map(|&x| f.value(&crate::model::Point::new(vec![x])))
        .collect();
    let nu_weights: Vec<f64> = m.iter().map(|mi| mi * h).collect();
    let mass0: f64 = u.iter().zip(&nu_weights).map(|(a, b)| a * b).sum();

    if t > 0.0 {
        let dt = t / spec.n_steps as f64;
        // Tridiagonal A: A u | row i = (F_{i+1/2} − F_{i−1/2}) / (h m_i).
        let coeff = lambda / (h * h);
        let upper: Vec<f64> =
            (0..n - 1).map(|i| coeff * mf[i] / m[i]).collect();
        let lower: Vec<f64> =
            (0..n - 1).map(|i| coeff * mf[i] / m[i + 1]).collect();
        let diag: Vec<f64> = (0..n)
            .map(|i| {
                let right = if i + 1 < n { mf[i] } else { 0.0 };
                let left = if i > 0 { mf[i - 1] } else { 0.0 };
                -coeff * (right + left) / m[i]
            })
            .collect();

        // Crank–Nicolson matrices: (I − dt/2 A) u⁺ = (I + dt/2 A) u.
        let half = dt / 2.0;
        let la: Vec<f64> = lower.iter().map(|v| -half * v).collect();
        let ld: Vec<f64> = diag.iter().map(|v| 1.0 - half * v).collect();
        let lu: Vec<f64> = upper.iter().map(|v| -half * v).collect();

        let mut rhs = vec![0.0; n];
        let mut cp = vec![0.0; n];
        for _ in 0..spec.n_steps {
            for i in 0..n {
                let mut acc = u[i] + half * diag[i] * u[i];
                if i + 1 < n {
                    acc += half * upper[i] * u[i + 1];
                }
                if i > 0 {
                    acc += half * lower[i - 1] * u[i - 1];
                }
                rhs[i] = acc;
            }
            thomas_solve(&la, &ld, &lu, &mut rhs, &mut cp, &mut u);
        }
    }

    let mass1: f64 = u.iter().zip(&nu_weights).map(|(a, b)| a * b).sum();
    let mass_drift = if mass0.abs() > 0.0 {
        ((mass1 - mass0) / mass0).abs()
    } else {
        (mass1 - mass0).abs()
    };

    Ok(PdeSolution { nodes, values: u, nu_weights, mass_drift, t })
}

/// Tridiagonal solve (Thomas algorithm): overwrite `out` with the solution of
/// the system (a: sub, d: diag, c: super) x = rhs. The CN matrix is strictly
/// diagonally dominant, so no pivoting is needed.
fn thomas_solve(
    a: &[f64],
    d: &[f64],
    c: &[f64],
    rhs: &mut [f64],
    cp: &mut [f64],
    out: &mut [f64],
) {
    let n = d.len();
    cp[0] = c.first().copied().unwrap_or(0.0) / d[0];
    rhs[0] /= d[0];
    for i in 1..n {
        let denom = d[i] - a[i - 1] * cp[i - 1];
        cp[i] = if i + 1 < n { c[i] / denom } else { 0.0 };
        rhs[i] = (rhs[i] - a[i - 1] * rhs[i - 1]) / denom;
    }
    out[n - 1] = rhs[n - 1];
    for i in (0..n - 1).rev() {
        out[i] = rhs[i] - cp[i] * out[i + 1];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field;
    use crate::model::Point;
    use crate::weight::ConvexWeight;
    use approx::assert_relative_eq;

    fn free(weight: ConvexWeight) -> PenalizedPotential {
        PenalizedPotential::unpenalized(weight)
    }

    #[test]
    fn constants_are_stationary() {
        let m = GaussianModel::new(vec![1.0]).unwrap();
        let f = field::constant(1, 1.0);
        let sol = pde_reference_1d(
            &m,
            &free(ConvexWeight::Zero),
            &f,
            0.5,
            &GridSpec::default(),
        )
        .unwrap();
        for v in &sol.values {
            assert_relative_eq!(*v, 1.0, epsilon = 1e-10);
        }
        assert!(sol.mass_drift < 1e-10);
    }

    #[test]
    fn zero_time_returns_interpolant_of_f() {
        let m = GaussianModel::new(vec![1.0]).unwrap();
        let f = field::tanh_ramp(vec![1.0], 0.7);
        let sol = pde_reference_1d(
            &m,
            &free(ConvexWeight::Zero),
            &f,
            0.0,
            &GridSpec::default(),
        )
        .unwrap();
        for (x, v) in sol.nodes.iter().zip(&sol.values) {
            assert_relative_eq!(*v, f.value(&Point::new(vec![*x])));
        }
    }

    #[test]
    fn whole_space_linear_field_matches_mehler_decay() {
        // T(t)x = e^{-t}x; probe well inside the truncation.
        let m = GaussianModel::new(vec![1.0]).unwrap();
        let f = field::linear(vec![1.0]);
        let spec = GridSpec::new(3200, 600).unwrap();
        let sol =
            pde_reference_1d(&m, &free(ConvexWeight::Zero), &f, 0.3, &spec).unwrap();
        let decay = (-0.3f64).exp();
        for x in [-2.0, -0.5, 0.0, 0.8, 2.0] {
            assert_relative_eq!(
                sol.interpolate(x),
                decay * x,
                epsilon = 1e-4,
                max_relative = 1e-4
            );
        }
    }

    #[test]
    fn whole_space_smooth_field_matches_mehler_quadrature() {
        let m = GaussianModel::new(vec![1.5]).unwrap();
        let f = field::tanh_ramp(vec![1.0], 1.0);
        let spec = GridSpec::new(3200, 600).unwrap();
        let t = 0.2;
        let sol =
            pde_reference_1d(&m, &free(ConvexWeight::Zero), &f, t, &spec).unwrap();
        for x in [-1.2, 0.0, 0.4, 1.7] {
            let exact = crate::mehler::mehler_apply(
                &m,
                &f,
                t,
                &Point::new(vec![x]),
                crate::mehler::MehlerRule::GaussHermite { order: 80 },
            )
            .unwrap();
            assert_relative_eq!(sol.interpolate(x), exact.value, epsilon = 5e-4);
        }
    }

    #[test]
    fn neumann_interval_conserves_mass_with_weight() {
        let m = GaussianModel::new(vec![1.0]).unwrap();
        let f = field::tanh_ramp(vec![1.0], 0.3);
        let pot = PenalizedPotential::new(
            ConvexWeight::Quadratic { k_diag: vec![0.8] },
            ConvexDomain::Slab { a: vec![1.0], lo: -1.0, hi: 1.5 },
            None,
        )
        .unwrap();
        let sol = pde_reference_1d(&m, &pot, &f, 0.6, &GridSpec::default()).unwrap();
        assert!(sol.mass_drift < 1e-8, "mass drift {}", sol.mass_drift);
        // Long-time limit is the ν-average of f on the interval: bounded by
        // sup |f| strictly since f changes sign.
        assert!(sol.values.iter().all(|v| v.abs() < 1.0));
    }

    #[test]
    fn halfspace_truncation_conserves_mass() {
        let m = GaussianModel::new(vec![2.0]).unwrap();
        let f = field::sin_wave(vec![1.0]);
        let pot = PenalizedPotential::new(
            ConvexWeight::Zero,
            ConvexDomain::HalfSpace { a: vec![1.0], c: 0.5 },
            None,
        )
        .unwrap();
        let sol = pde_reference_1d(&m, &pot, &f, 0.4, &GridSpec::default()).unwrap();
        assert!(sol.mass_drift < 1e-8, "mass drift {}", sol.mass_drift);
    }

    #[test]
    fn rejects_higher_dimensions() {
        let m = GaussianModel::new(vec![1.0, 1.0]).unwrap();
        let f = field::constant(2, 1.0);
        let err = pde_reference_1d(
            &m,
            &free(ConvexWeight::Zero),
            &f,
            0.1,
            &GridSpec::default(),
        );
        assert!(matches!(err, Err(GaussBvError::DimensionMismatch { .. })));
    }
}
