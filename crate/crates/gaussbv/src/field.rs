//! Scalar and vector test fields with analytic or finite-difference calculus.
//!
//! A [`ScalarField`] bundles a value closure with optional analytic gradient
//! and Hessian closures plus two regularity flags. When a derivative closure
//! is absent, central finite differences with step 10⁻⁵·max(1, |x_i|) take
//! over; on smooth fields the two routes agree to O(step²), which the tests
//! pin down. Fields are reference-counted so estimator batches can share them
//! across workers.

use crate::model::{GaussianModel, HVector, Point};
use std::sync::Arc;

type ValueFn = dyn Fn(&Point) -> f64 + Send + Sync;
type GradFn = dyn Fn(&Point) -> Vec<f64> + Send + Sync;
type HessFn = dyn Fn(&Point) -> Vec<Vec<f64>> + Send + Sync;

/// Relative finite-difference step for fallback derivatives.
const FD_STEP: f64 = 1e-5;

/// A real-valued function on the ambient space with optional calculus.
#[derive(Clone)]
pub struct ScalarField {
    value: Arc<ValueFn>,
    gradient: Option<Arc<GradFn>>,
    hessian: Option<Arc<HessFn>>,
    /// True when the field is globally Lipschitz (pathwise differentiation
    /// and Jacobian-flow gradients are admissible).
    pub lipschitz: bool,
    /// True when sup |f| < ∞ (sup-norm contraction checks apply).
    pub bounded: bool,
}

impl std::fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScalarField")
            .field("analytic_gradient", &self.gradient.is_some())
            .field("analytic_hessian", &self.hessian.is_some())
            .field("lipschitz", &self.lipschitz)
            .field("bounded", &self.bounded)
            .finish()
    }
}

impl ScalarField {
    pub fn new(value: impl Fn(&Point) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            value: Arc::new(value),
            gradient: None,
            hessian: None,
            lipschitz: false,
            bounded: false,
        }
    }

    pub fn with_gradient(
        mut self,
        gradient: impl Fn(&Point) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        self.gradient = Some(Arc::new(gradient));
        self
    }

    pub fn with_hessian(
        mut self,
        hessian: impl Fn(&Point) -> Vec<Vec<f64>> + Send + Sync + 'static,
    ) -> Self {
        self.hessian = Some(Arc::new(hessian));
        self
    }

    pub fn lipschitz(mut self) -> Self {
        self.lipschitz = true;
        self
    }

    pub fn bounded(mut self) -> Self {
        self.bounded = true;
        self
    }

    pub fn has_analytic_gradient(&self) -> bool {
        self.gradient.is_some()
    }

    pub fn value(&self, x: &Point) -> f64 {
        (self.value)(x)
    }

    /// Euclidean gradient: analytic closure when present, otherwise central
    /// finite differences.
    pub fn gradient(&self, x: &Point) -> Vec<f64> {
        if let Some(g) = &self.gradient {
            return g(x);
        }
        let mut out = vec![0.0; x.dim()];
        let mut xp = x.clone();
        for i in 0..x.dim() {
            let h = FD_STEP * x.coords[i].abs().max(1.0);
            let xi = x.coords[i];
            xp.coords[i] = xi + h;
            let fp = (self.value)(&xp);
            xp.coords[i] = xi - h;
            let fm = (self.value)(&xp);
            xp.coords[i] = xi;
            out[i] = (fp - fm) / (2.0 * h);
        }
        out
    }

    /// Euclidean Hessian: analytic closure when present, otherwise central
    /// second differences of the value.
    pub fn hessian(&self, x: &Point) -> Vec<Vec<f64>> {
        if let Some(h) = &self.hessian {
            return h(x);
        }
        let d = x.dim();
        let mut out = vec![vec![0.0; d]; d];
        let f0 = (self.value)(x);
        let mut xp = x.clone();
        for i in 0..d {
            let hi = FD_STEP.sqrt() * x.coords[i].abs().max(1.0);
            let xi = x.coords[i];
            xp.coords[i] = xi + hi;
            let fp = (self.value)(&xp);
            xp.coords[i] = xi - hi;
            let fm = (self.value)(&xp);
            xp.coords[i] = xi;
            out[i][i] = (fp - 2.0 * f0 + fm) / (hi * hi);
            for j in (i + 1)..d {
                let hj = FD_STEP.sqrt() * x.coords[j].abs().max(1.0);
                let xj = x.coords[j];
                xp.coords[i] = xi + hi;
                xp.coords[j] = xj + hj;
                let fpp = (self.value)(&xp);
                xp.coords[j] = xj - hj;
                let fpm = (self.value)(&xp);
                xp.coords[i] = xi - hi;
                let fmm = (self.value)(&xp);
                xp.coords[j] = xj + hj;
                let fmp = (self.value)(&xp);
                xp.coords[i] = xi;
                xp.coords[j] = xj;
                let v = (fpp - fpm - fmp + fmm) / (4.0 * hi * hj);
                out[i][j] = v;
                out[j][i] = v;
            }
        }
        out
    }

    /// Malliavin gradient D_H f(x): v-coordinates λ_i ∂_i f(x).
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
}

/// A finite-rank H-vector field: one scalar component per coordinate,
/// v-coordinate convention matching [`HVector`].
#[derive(Debug, Clone)]
pub struct VectorField {
    pub components: Vec<ScalarField>,
}

impl VectorField {
    pub fn new(components: Vec<ScalarField>) -> Self {
        Self { components }
    }

    pub fn value(&self, x: &Point) -> HVector {
        HVector::new(self.components.iter().map(|c| c.value(x)).collect())
    }
}

/// f(x) = c.
pub fn constant(dim: usize, c: f64) -> ScalarField {
    let _ = dim;
    ScalarField::new(move |_| c)
        .with_gradient(move |x| vec![0.0; x.dim()])
        .with_hessian(move |x| vec![vec![0.0; x.dim()]; x.dim()])
        .lipschitz()
        .bounded()
}

/// f(x) = ⟨a, x⟩.
pub fn linear(a: Vec<f64>) -> ScalarField {
    let a2 = a.clone();
    let a3 = a.clone();
    ScalarField::new(move |x: &Point| {
        a.iter().zip(&x.coords).map(|(ai, xi)| ai * xi).sum()
    })
    .with_gradient(move |_| a2.clone())
    .with_hessian(move |x| vec![vec![0.0; x.dim()]; a3.len()])
    .lipschitz()
}

/// f(x) = x_i.
pub fn coordinate(dim: usize, i: usize) -> ScalarField {
    let mut a = vec![0.0; dim];
    a[i] = 1.0;
    linear(a)
}

/// f(x) = tanh(⟨a, x⟩ / w): bounded, monotone along a, smooth.
pub fn tanh_ramp(a: Vec<f64>, w: f64) -> ScalarField {
    let a2 = a.clone();
    let a3 = a.clone();
    let proj = move |x: &Point, a: &[f64]| -> f64 {
        a.iter().zip(&x.coords).map(|(ai, xi)| ai * xi).sum::<f64>() / w
    };
    let p1 = proj.clone();
    let p2 = proj.clone();
    ScalarField::new(move |x| p1(x, &a).tanh())
        .with_gradient(move |x| {
            let s = p2(x, &a2).tanh();
            let d = (1.0 - s * s) / w;
            a2.iter().map(|ai| ai * d).collect()
        })
        .with_hessian(move |x| {
            let z: f64 =
                a3.iter().zip(&x.coords).map(|(ai, xi)| ai * xi).sum::<f64>() / w;
            let s = z.tanh();
            let d2 = -2.0 * s * (1.0 - s * s) / (w * w);
            a3.iter()
                .map(|ai| a3.iter().map(|aj| ai * aj * d2).collect())
                .collect()
        })
        .lipschitz()
        .bounded()
}

/// Indicator of the half-space {⟨a, x⟩ < c}. Not Lipschitz; gradient-type
/// estimators must use likelihood-ratio weights on it.
pub fn indicator_halfspace(a: Vec<f64>, c: f64) -> ScalarField {
    ScalarField::new(move |x: &Point| {
        let s: f64 = a.iter().zip(&x.coords).map(|(ai, xi)| ai * xi).sum();
        if s < c {
            1.0
        } else {
            0.0
        }
    })
    .bounded()
}

/// f(x) = sin(⟨a, x⟩): bounded, smooth, sign-changing gradient.
pub fn sin_wave(a: Vec<f64>) -> ScalarField {
    let a2 = a.clone();
    let a3 = a.clone();
    ScalarField::new(move |x: &Point| {
        a.iter()
            .zip(&x.coords)
            .map(|(ai, xi)| ai * xi)
            .sum::<f64>()
            .sin()
    })
    .with_gradient(move |x| {
        let z: f64 = a2.iter().zip(&x.coords).map(|(ai, xi)| ai * xi).sum();
        let c = z.cos();
        a2.iter().map(|ai| ai * c).collect()
    })
    .with_hessian(move |x| {
        let z: f64 = a3.iter().zip(&x.coords).map(|(ai, xi)| ai * xi).sum();
        let s = -z.sin();
        a3.iter()
            .map(|ai| a3.iter().map(|aj| ai * aj * s).collect())
            .collect()
    })
    .lipschitz()
    .bounded()
}

/// Gaussian bump s·exp(−⟨a,x−x0⟩²/(2w²)), peak value s at ⟨a,x⟩=⟨a,x0⟩.
pub fn gaussian_bump(a: Vec<f64>, center: f64, w: f64, s: f64) -> ScalarField {
    let a2 = a.clone();
    let val = move |x: &Point| -> f64 {
        let z: f64 =
            a.iter().zip(&x.coords).map(|(ai, xi)| ai * xi).sum::<f64>() - center;
        s * (-z * z / (2.0 * w * w)).exp()
    };
    let v2 = val.clone();
    ScalarField::new(val)
        .with_gradient(move |x| {
            let z: f64 =
                a2.iter().zip(&x.coords).map(|(ai, xi)| ai * xi).sum::<f64>() - center;
            let f = v2(x);
            a2.iter().map(|ai| -ai * z / (w * w) * f).collect()
        })
        .lipschitz()
        .bounded()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn fd_gradient_matches_analytic_on_smooth_fields() {
        let x = Point::new(vec![0.3, -1.1]);
        let f = tanh_ramp(vec![1.0, 0.5], 1.0);
        let analytic = f.gradient(&x);
        let fd_only = ScalarField::new({
            let f = f.clone();
            move |p: &Point| f.value(p)
        });
        let fd = fd_only.gradient(&x);
        for (a, b) in analytic.iter().zip(&fd) {
            assert_relative_eq!(a, b, max_relative = 1e-6);
        }
    }

    #[test]
    fn fd_hessian_matches_analytic_on_smooth_fields() {
        let x = Point::new(vec![0.4, 0.9]);
        let f = sin_wave(vec![1.0, -0.7]);
        let analytic = f.hessian(&x);
        let fd_only = ScalarField::new({
            let f = f.clone();
            move |p: &Point| f.value(p)
        });
        let fd = fd_only.hessian(&x);
        for i in 0..2 {
            for j in 0..2 {
                assert_relative_eq!(analytic[i][j], fd[i][j], epsilon = 5e-5);
            }
        }
    }

    #[test]
    fn h_gradient_of_linear_field() {
        let m = GaussianModel::new(vec![3.0, 1.0]).unwrap();
        let f = coordinate(2, 0);
        let g = f.h_gradient(&m, &Point::new(vec![5.0, -2.0]));
        assert_eq!(g.coords, vec![3.0, 0.0]);
        assert_relative_eq!(m.h_norm(&g), 3.0f64.sqrt());
    }

    #[test]
    fn h_gradient_of_constant_is_zero() {
        let m = GaussianModel::new(vec![2.0]).unwrap();
        let f = constant(1, 4.2);
        assert_eq!(f.h_gradient(&m, &Point::new(vec![1.0])).coords, vec![0.0]);
    }

    #[test]
    fn h_gradient_of_square_with_fd_fallback() {
        // f(x) = x², λ = 2, x = 1: D_H f = (λ·2x) = (4), |D_H f|_H = 4/√2.
        let m = GaussianModel::new(vec![2.0]).unwrap();
        let f = ScalarField::new(|x: &Point| x.coords[0] * x.coords[0]);
        let g = f.h_gradient(&m, &Point::new(vec![1.0]));
        assert_relative_eq!(g.coords[0], 4.0, max_relative = 1e-9);
        assert_relative_eq!(m.h_norm(&g), 4.0 / 2.0f64.sqrt(), max_relative = 1e-9);
    }
}
