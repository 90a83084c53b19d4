//! Euler–Maruyama engines for the weighted and penalized semigroups and
//! their Malliavin gradients.
//!
//! In v-coordinates the generator acts as
//!
//! ```text
//!     L_ε φ = Σ_i λ_i ∂²_ii φ − Σ_i (x_i + λ_i ∂_i Φ_ε) ∂_i φ,
//! ```
//!
//! because the Malliavin derivative has D_i φ = √λ_i ∂_i φ and the i-th
//! H-coordinate of x is ⟨x, e_i⟩ = √λ_i x_i, so Tr(D²_H φ) = Σ λ_i ∂²_ii φ
//! and the Gaussian drift −Σ λ_i^{-1} ⟨x,e_i⟩ D_i φ = −Σ x_i ∂_i φ. The
//! matching SDE is
//!
//! ```text
//!     dX_i = (−X_i − λ_i ∂_i Φ_ε(X)) dt + √(2 λ_i) dW_i,
//! ```
//!
//! and T_ε(t)f(x) = E[f(X_t^x)]. Gradients come in two modes:
//!
//! - jacobian-flow: differentiate the flow pathwise, dJ = −(I + Q∇²Φ_ε)J dt,
//!   and average ∇f(X_t)ᵀ J_t; needs a Lipschitz integrand.
//! - mollified-bel: weight the undifferentiated integrand by the
//!   Bismut–Elworthy–Li functional (1/t)∫₀ᵗ (σ^{-1} J_s)ᵀ dW_s with
//!   σ = diag(√(2λ_i)); handles indicators, with a per-batch control variate
//!   that subtracts the batch mean of f before weighting (the weight has
//!   exact zero mean, so the batch estimator stays unbiased while the
//!   indicator's constant part stops inflating the variance).
//!
//! All estimators follow the batch-substream determinism contract of
//! [`crate::estimate`].

use crate::error::{GaussBvError, Result};
use crate::estimate::{mc_mean_checked, mc_mean_vector_checked, Estimate, Meta};
use crate::field::{ScalarField, VectorField};
use crate::model::{GaussianModel, HVector, Point};
use crate::potential::PenalizedPotential;
use crate::rng::{substream, Tag, BATCH_SIZE};
use crate::weight::ConvexWeight;
use crate::domain::ConvexDomain;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Time-stepping scheme; only explicit Euler–Maruyama is implemented.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    #[default]
    EulerMaruyama,
}

/// Path-simulation parameters shared by every SDE-backed estimator.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SdeConfig {
    /// Upper bound on the step size; stiff penalties tighten it further.
    pub dt: f64,
    pub paths: u64,
    pub seed: u64,
    #[serde(default)]
    pub scheme: Scheme,
    /// Largest horizon the configuration is meant for.
    pub t_max: f64,
}

impl SdeConfig {
    pub fn new(dt: f64, paths: u64, seed: u64, t_max: f64) -> Result<Self> {
        let cfg = Self { dt, paths, seed, scheme: Scheme::EulerMaruyama, t_max };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(GaussBvError::InvalidParameter {
                name: "dt",
                reason: format!("step size must be positive, got {}", self.dt),
            });
        }
        if self.paths == 0 {
            return Err(GaussBvError::InvalidParameter {
                name: "paths",
                reason: "path count must be at least 1".into(),
            });
        }
        if self.dt > self.t_max {
            return Err(GaussBvError::InvalidParameter {
                name: "dt",
                reason: format!("dt = {} exceeds t_max = {}", self.dt, self.t_max),
            });
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// How a semigroup gradient is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradientMode {
    JacobianFlow,
    MollifiedBel,
}

/// A vector-valued Monte Carlo estimate in H-coordinates (v-coordinate
/// storage, like [`HVector`]), with componentwise standard errors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HVectorEstimate {
    pub coords: HVector,
    pub stderr: Vec<f64>,
    pub n: u64,
    pub meta: Meta,
}

impl HVectorEstimate {
    pub fn exact(coords: HVector, meta: Meta) -> Self {
        let d = coords.dim();
        Self { coords, stderr: vec![0.0; d], n: 0, meta }
    }

    /// Conservative standard error for the H-norm of the estimate: the
    /// H-norm of the componentwise stderr vector.
    pub fn h_norm_stderr(&self, model: &GaussianModel) -> f64 {
        let s = HVector::new(self.stderr.clone());
        model.h_norm(&s)
    }
}

/// Drift of the penalized dynamics: b_i = −x_i − λ_i ∂_i Φ_ε(x).
pub fn sde_drift(
    model: &GaussianModel,
    potential: &PenalizedPotential,
    x: &Point,
) -> Result<Vec<f64>> {
    let hg = potential.h_gradient(model, x)?;
    Ok(x.coords
        .iter()
        .zip(&hg.coords)
        .map(|(xi, gi)| -xi - gi)
        .collect())
}

/// Step count and actual dt for horizon t: the configured dt is an upper
/// bound, tightened to min(ε, λ_min)/10 while a penalty is active because
/// the penalty drift has stiffness 1/ε.
pub(crate) fn effective_steps(
    model: &GaussianModel,
    potential: &PenalizedPotential,
    t: f64,
    cfg_dt: f64,
) -> (usize, f64) {
    let mut cap = cfg_dt;
    if let Some(eps) = potential.epsilon {
        cap = cap.min(eps.min(model.lambda_min()) / 10.0);
    }
    let n_steps = (t / cap).ceil().max(1.0) as usize;
    (n_steps, t / n_steps as f64)
}

/// One Euler–Maruyama path from x0 over n_steps of size dt; returns X_t.
/// Coordinates turn NaN if the drift fails, which the checked accumulators
/// report as a non-finite sample.
pub(crate) fn simulate_path(
    model: &GaussianModel,
    potential: &PenalizedPotential,
    x0: &Point,
    n_steps: usize,
    dt: f64,
    rng: &mut ChaCha8Rng,
) -> Point {
    let d = model.dim();
    let mut x = x0.clone();
    let mut b = vec![0.0; d];
    for _ in 0..n_steps {
        if !potential.drift_into(model, &x, &mut b) {
            for c in &mut x.coords {
                *c = f64::NAN;
            }
            return x;
        }
        for i in 0..d {
            let z: f64 = rng.sample(StandardNormal);
            x.coords[i] += dt * b[i] + (2.0 * model.lambda(i) * dt).sqrt() * z;
        }
    }
    x
}

/// Reusable buffers for the path-with-first-variation loop, so the nested
/// estimators in the BV module pay no per-path allocation.
pub(crate) struct JacScratch {
    x: Point,
    jac: Vec<f64>,
    jac_next: Vec<f64>,
    dw: Vec<f64>,
    b: Vec<f64>,
    lh: Vec<f64>,
    /// BEL weight components, filled by [`path_bel_with`].
    pub(crate) w: Vec<f64>,
}

impl JacScratch {
    pub(crate) fn new(d: usize) -> Self {
        JacScratch {
            x: Point::zeros(d),
            jac: vec![0.0; d * d],
            jac_next: vec![0.0; d * d],
            dw: vec![0.0; d],
            b: vec![0.0; d],
            lh: vec![0.0; d * d],
            w: vec![0.0; d],
        }
    }
}

/// Path plus first-variation flow: J solves dJ = −(I + Q∇²Φ_ε(X))J dt along
/// the path (row-major, entry i·d+j = ∂ X_i(t) / ∂ x_j(0)). Leaves X_t in
/// `s.x` and J in `s.jac`; returns false (with `s.x` poisoned to NaN) if the
/// drift evaluation fails.
fn jacobian_core(
    model: &GaussianModel,
    potential: &PenalizedPotential,
    x0: &Point,
    n_steps: usize,
    dt: f64,
    rng: &mut ChaCha8Rng,
    s: &mut JacScratch,
    mut on_step: impl FnMut(&[f64], &[f64]),
) -> bool {
    let d = model.dim();
    s.x.coords.copy_from_slice(&x0.coords);
    s.jac.fill(0.0);
    for i in 0..d {
        s.jac[i * d + i] = 1.0;
    }
    for _ in 0..n_steps {
        if !potential.drift_into(model, &s.x, &mut s.b)
            || !potential.lambda_hessian_into(model, &s.x, &mut s.lh)
        {
            for c in &mut s.x.coords {
                *c = f64::NAN;
            }
            return false;
        }
        for i in 0..d {
            let z: f64 = rng.sample(StandardNormal);
            s.dw[i] = dt.sqrt() * z;
        }
        // The BEL functional needs J at the step's left endpoint.
        on_step(&s.jac, &s.dw);
        // dJ = A J dt with A = −(I + diag(λ) ∇²Φ_ε), the drift linearization.
        for i in 0..d {
            for j in 0..d {
                let mut acc = s.jac[i * d + j] - dt * s.jac[i * d + j];
                for k in 0..d {
                    acc -= dt * s.lh[i * d + k] * s.jac[k * d + j];
                }
                s.jac_next[i * d + j] = acc;
            }
        }
        std::mem::swap(&mut s.jac, &mut s.jac_next);
        for i in 0..d {
            s.x.coords[i] +=
                dt * s.b[i] + (2.0 * model.lambda(i)).sqrt() * s.dw[i];
        }
    }
    true
}

/// Pathwise gradient sample for Lipschitz f using caller-owned scratch:
/// fills `out` with the Euclidean components Σ_i ∂_i f(X_t) J_ij(t),
/// or NaN when the path fails.
pub(crate) fn path_jacobian_grad_with(
    model: &GaussianModel,
    potential: &PenalizedPotential,
    f: &ScalarField,
    x0: &Point,
    n_steps: usize,
    dt: f64,
    rng: &mut ChaCha8Rng,
    s: &mut JacScratch,
    out: &mut [f64],
) {
    let d = model.dim();
    if !jacobian_core(model, potential, x0, n_steps, dt, rng, s, |_, _| {}) {
        out.fill(f64::NAN);
        return;
    }
    let g = f.gradient(&s.x);
    for j in 0..d {
        out[j] = (0..d).map(|i| g[i] * s.jac[i * d + j]).sum();
    }
}

/// Allocating wrapper around [`path_jacobian_grad_with`].
pub(crate) fn path_jacobian_grad(
    model: &GaussianModel,
    potential: &PenalizedPotential,
    f: &ScalarField,
    x0: &Point,
    n_steps: usize,
    dt: f64,
    rng: &mut ChaCha8Rng,
    out: &mut [f64],
) {
    let mut s = JacScratch::new(model.dim());
    path_jacobian_grad_with(model, potential, f, x0, n_steps, dt, rng, &mut s, out);
}

/// BEL gradient sample using caller-owned scratch: returns f(X_t) and leaves
/// the weight components w_j = (1/t) Σ_steps Σ_i J_ij(s) ΔW_i / √(2λ_i) in
/// `s.w`, so that E[f(X_t) w_j] = ∂_j E[f(X_t^x)]. Returns NaN (without
/// evaluating f) when the path fails, so indicator fields cannot mask a
/// blown-up path as a zero.
pub(crate) fn path_bel_with(
    model: &GaussianModel,
    potential: &PenalizedPotential,
    f: &ScalarField,
    t: f64,
    x0: &Point,
    n_steps: usize,
    dt: f64,
    rng: &mut ChaCha8Rng,
    s: &mut JacScratch,
) -> f64 {
    let d = model.dim();
    s.w.fill(0.0);
    // Split the borrow: the step callback writes s.w while reading s.jac/s.dw.
    let mut w = std::mem::take(&mut s.w);
    let ok = jacobian_core(model, potential, x0, n_steps, dt, rng, s, |jac, dw| {
        for j in 0..d {
            let mut acc = 0.0;
            for i in 0..d {
                acc += jac[i * d + j] * dw[i] / (2.0 * model.lambda(i)).sqrt();
            }
            w[j] += acc;
        }
    });
    for wj in w.iter_mut() {
        *wj /= t;
    }
    s.w = w;
    if !ok {
        return f64::NAN;
    }
    f.value(&s.x)
}

/// Allocating wrapper around [`path_bel_with`] that copies the weights out.
pub(crate) fn path_bel(
    model: &GaussianModel,
    potential: &PenalizedPotential,
    f: &ScalarField,
    t: f64,
    x0: &Point,
    n_steps: usize,
    dt: f64,
    rng: &mut ChaCha8Rng,
    w: &mut [f64],
) -> f64 {
    let mut s = JacScratch::new(model.dim());
    let v = path_bel_with(model, potential, f, t, x0, n_steps, dt, rng, &mut s);
    w.copy_from_slice(&s.w);
    v
}

/// T_ε(t)f(x) = E[f(X_t^x)] by Euler–Maruyama Monte Carlo.
pub fn apply_semigroup(
    model: &GaussianModel,
    potential: &PenalizedPotential,
    f: &ScalarField,
    t: f64,
    x: &Point,
    cfg: &SdeConfig,
) -> Result<Estimate> {
    cfg.validate()?;
    if t < 0.0 {
        return Err(GaussBvError::InvalidParameter {
            name: "t",
            reason: format!("time must be nonnegative, got {t}"),
        });
    }
    let meta = Meta { t, epsilon: potential.epsilon, dt: None };
    if t == 0.0 {
        return Ok(Estimate::exact(f.value(x)).with_meta(meta));
    }
    let (n_steps, dt) = effective_steps(model, potential, t, cfg.dt);
    let est = mc_mean_checked(
        cfg.paths,
        cfg.seed,
        Tag::Semigroup,
        "apply_semigroup",
        |rng, _| {
            let xt = simulate_path(model, potential, x, n_steps, dt, rng);
            f.value(&xt)
        },
    )?;
    Ok(est.with_meta(Meta { dt: Some(dt), ..meta }))
}

/// Componentwise semigroup action on a vector field, sharing one path per
/// sample across all components.
pub fn apply_semigroup_vector(
    model: &GaussianModel,
    potential: &PenalizedPotential,
    field: &VectorField,
    t: f64,
    x: &Point,
    cfg: &SdeConfig,
) -> Result<HVectorEstimate> {
    cfg.validate()?;
    let d = model.dim();
    let meta = Meta { t, epsilon: potential.epsilon, dt: None };
    if t == 0.0 {
        return Ok(HVectorEstimate::exact(field.value(x), meta));
    }
    let (n_steps, dt) = effective_steps(model, potential, t, cfg.dt);
    let (mean, stderr) = mc_mean_vector_checked(
        d,
        cfg.paths,
        cfg.seed,
        Tag::Semigroup,
        "apply_semigroup_vector",
        |rng, _, buf| {
            let xt = simulate_path(model, potential, x, n_steps, dt, rng);
            let v = field.value(&xt);
            buf.copy_from_slice(&v.coords);
        },
    )?;
    Ok(HVectorEstimate {
        coords: HVector::new(mean),
        stderr,
        n: cfg.paths,
        meta: Meta { dt: Some(dt), ..meta },
    })
}

/// D_H T_ε(t)f(x): Euclidean gradient of the semigroup estimated pathwise,
/// returned with H-coordinates λ_j · ∂_j T_ε(t)f(x).
pub fn semigroup_gradient(
    model: &GaussianModel,
    potential: &PenalizedPotential,
    f: &ScalarField,
    t: f64,
    x: &Point,
    cfg: &SdeConfig,
    mode: GradientMode,
) -> Result<HVectorEstimate> {
    cfg.validate()?;
    let d = model.dim();
    let meta = Meta { t, epsilon: potential.epsilon, dt: None };
    if t == 0.0 {
        if !f.lipschitz {
            return Err(GaussBvError::ModeMismatch {
                mode: "t = 0 gradient",
                requirement: "field must be Lipschitz to differentiate pathwise",
            });
        }
        return Ok(HVectorEstimate::exact(f.h_gradient(model, x), meta));
    }
    let (n_steps, dt) = effective_steps(model, potential, t, cfg.dt);
    let meta = Meta { dt: Some(dt), ..meta };
    match mode {
        GradientMode::JacobianFlow => {
            if !f.lipschitz {
                return Err(GaussBvError::ModeMismatch {
                    mode: "jacobian-flow",
                    requirement: "field must be Lipschitz (pathwise differentiable)",
                });
            }
            let (mut mean, mut stderr) = mc_mean_vector_checked(
                d,
                cfg.paths,
                cfg.seed,
                Tag::GradientFlow,
                "semigroup_gradient (jacobian-flow)",
                |rng, _, buf| {
                    path_jacobian_grad(
                        model, potential, f, x, n_steps, dt, rng, buf,
                    );
                },
            )?;
            for j in 0..d {
                mean[j] *= model.lambda(j);
                stderr[j] *= model.lambda(j);
            }
            Ok(HVectorEstimate {
                coords: HVector::new(mean),
                stderr,
                n: cfg.paths,
                meta,
            })
        }
        GradientMode::MollifiedBel => {
            bel_gradient(model, potential, f, t, x, cfg, n_steps, dt, meta)
        }
    }
}

/// Batched BEL estimator with the per-batch control variate. Batches are the
/// statistical unit: each contributes the unbiased value
/// Σ_i (f_i − f̄_batch) w_i / (B − 1), and the spread across batches gives
/// the standard error.
#[allow(clippy::too_many_arguments)]
fn bel_gradient(
    model: &GaussianModel,
    potential: &PenalizedPotential,
    f: &ScalarField,
    t: f64,
    x: &Point,
    cfg: &SdeConfig,
    n_steps: usize,
    dt: f64,
    meta: Meta,
) -> Result<HVectorEstimate> {
    let d = model.dim();
    let b_size = BATCH_SIZE.min(256) as u64;
    let n_batches = (cfg.paths.div_ceil(b_size)).max(2);
    let partials: Vec<(Vec<f64>, Option<u64>)> = (0..n_batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = substream(cfg.seed, Tag::GradientBel, b);
            let mut fs = vec![0.0; b_size as usize];
            let mut ws = vec![0.0; b_size as usize * d];
            let mut w = vec![0.0; d];
            let mut bad = None;
            for i in 0..b_size as usize {
                let fi =
                    path_bel(model, potential, f, t, x, n_steps, dt, &mut rng, &mut w);
                if !fi.is_finite() || w.iter().any(|v| !v.is_finite()) {
                    bad = Some(b);
                }
                fs[i] = fi;
                ws[i * d..(i + 1) * d].copy_from_slice(&w);
            }
            let fbar = fs.iter().sum::<f64>() / b_size as f64;
            let mut g = vec![0.0; d];
            for i in 0..b_size as usize {
                for j in 0..d {
                    g[j] += (fs[i] - fbar) * ws[i * d + j];
                }
            }
            for gj in &mut g {
                *gj /= (b_size - 1) as f64;
            }
            (g, bad)
        })
        .collect();
    if let Some(batch) = partials.iter().find_map(|(_, bad)| *bad) {
        return Err(GaussBvError::NonFinite {
            what: "semigroup_gradient (mollified-bel)",
            seed: cfg.seed,
            batch,
        });
    }
    let nb = n_batches as f64;
    let mut mean = vec![0.0; d];
    for (g, _) in &partials {
        for j in 0..d {
            mean[j] += g[j] / nb;
        }
    }
    let mut stderr = vec![0.0; d];
    for (g, _) in &partials {
        for j in 0..d {
            stderr[j] += (g[j] - mean[j]).powi(2);
        }
    }
    for s in &mut stderr {
        *s = (*s / (nb * (nb - 1.0).max(1.0))).sqrt();
    }
    // Euclidean ∂_j to H-coordinates λ_j ∂_j.
    for j in 0..d {
        mean[j] *= model.lambda(j);
        stderr[j] *= model.lambda(j);
    }
    Ok(HVectorEstimate {
        coords: HVector::new(mean),
        stderr,
        n: n_batches * b_size,
        meta,
    })
}

/// T_ε(t)f̃(x) along a decreasing list of penalties, with f̃ the zero
/// extension of f outside Ω. The whole-space domain short-circuits to the
/// unpenalized semigroup, where the penalty is identically inactive.
#[allow(clippy::too_many_arguments)]
pub fn penalty_sweep(
    model: &GaussianModel,
    weight: &ConvexWeight,
    domain: &ConvexDomain,
    f: &ScalarField,
    t: f64,
    x: &Point,
    eps_list: &[f64],
    cfg: &SdeConfig,
) -> Result<Vec<Estimate>> {
    if eps_list.is_empty() {
        return Err(GaussBvError::InvalidParameter {
            name: "eps_list",
            reason: "need at least one penalty value".into(),
        });
    }
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(GaussBvError::InvalidParameter {
            name: "eps_list",
            reason: "penalty values must be strictly decreasing".into(),
        });
    }
    let f_ext = zero_extension(model, domain, f);
    let mut out = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let epsilon =
            if *domain == ConvexDomain::WholeSpace { None } else { Some(eps) };
        let potential =
            PenalizedPotential::new(weight.clone(), domain.clone(), epsilon)?;
        let mut est = apply_semigroup(model, &potential, &f_ext, t, x, cfg)?;
        est.meta.epsilon = Some(eps);
        out.push(est);
    }
    Ok(out)
}

/// The zero extension f̃ = f·χ_Ω used by the penalized approximation.
pub fn zero_extension(
    model: &GaussianModel,
    domain: &ConvexDomain,
    f: &ScalarField,
) -> ScalarField {
    let m = model.clone();
    let dom = domain.clone();
    let inner = f.clone();
    let mut ext = ScalarField::new(move |x: &Point| {
        if dom.contains(&m, x) {
            inner.value(x)
        } else {
            0.0
        }
    });
    if f.bounded {
        ext = ext.bounded();
    }
    ext
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field;
    use approx::assert_relative_eq;

    fn m1() -> GaussianModel {
        GaussianModel::new(vec![1.0]).unwrap()
    }

    fn free(weight: ConvexWeight) -> PenalizedPotential {
        PenalizedPotential::unpenalized(weight)
    }

    #[test]
    fn drift_pure_ou() {
        let p = free(ConvexWeight::Zero);
        let b = sde_drift(&m1(), &p, &Point::new(vec![2.0])).unwrap();
        assert_relative_eq!(b[0], -2.0);
    }

    #[test]
    fn drift_quadratic_weight() {
        let p = free(ConvexWeight::Quadratic { k_diag: vec![3.0] });
        let b = sde_drift(&m1(), &p, &Point::new(vec![1.0])).unwrap();
        assert_relative_eq!(b[0], -4.0);
    }

    #[test]
    fn drift_halfspace_penalty() {
        let p = PenalizedPotential::new(
            ConvexWeight::Zero,
            ConvexDomain::HalfSpace { a: vec![1.0], c: 0.0 },
            Some(0.5),
        )
        .unwrap();
        let b = sde_drift(&m1(), &p, &Point::new(vec![3.0])).unwrap();
        assert_relative_eq!(b[0], -9.0);
    }

    #[test]
    fn semigroup_at_zero_time_is_identity() {
        let f = field::tanh_ramp(vec![1.0], 1.0);
        let x = Point::new(vec![0.7]);
        let cfg = SdeConfig::new(0.01, 100, 1, 1.0).unwrap();
        let e = apply_semigroup(&m1(), &free(ConvexWeight::Zero), &f, 0.0, &x, &cfg)
            .unwrap();
        assert_relative_eq!(e.value, f.value(&x));
        assert_eq!(e.stderr, 0.0);
    }

    #[test]
    fn semigroup_of_constant_is_exact() {
        let f = field::constant(1, 2.5);
        let cfg = SdeConfig::new(0.05, 2_000, 3, 1.0).unwrap();
        let e = apply_semigroup(
            &m1(),
            &free(ConvexWeight::Zero),
            &f,
            0.4,
            &Point::new(vec![1.0]),
            &cfg,
        )
        .unwrap();
        assert_relative_eq!(e.value, 2.5);
        assert_relative_eq!(e.stderr, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn ou_linear_mean_decays() {
        // E[X_t] = x e^{-t} for the pure OU process.
        let f = field::linear(vec![1.0]);
        let cfg = SdeConfig::new(0.005, 40_000, 7, 1.0).unwrap();
        let e = apply_semigroup(
            &m1(),
            &free(ConvexWeight::Zero),
            &f,
            0.3,
            &Point::new(vec![1.0]),
            &cfg,
        )
        .unwrap();
        assert!(
            (e.value - (-0.3f64).exp()).abs() < 3.0 * e.stderr,
            "{e:?} vs {}",
            (-0.3f64).exp()
        );
    }

    #[test]
    fn quadratic_weight_doubles_the_rate() {
        // U = ½x² with λ = 1 gives the linear SDE dX = −2X dt + √2 dW, so
        // E[X_t] = x e^{-2t}.
        let f = field::linear(vec![1.0]);
        let cfg = SdeConfig::new(0.004, 60_000, 11, 1.0).unwrap();
        let e = apply_semigroup(
            &m1(),
            &free(ConvexWeight::Quadratic { k_diag: vec![1.0] }),
            &f,
            0.25,
            &Point::new(vec![1.0]),
            &cfg,
        )
        .unwrap();
        let oracle = (-0.5f64).exp();
        assert!((e.value - oracle).abs() < 3.0 * e.stderr, "{e:?} vs {oracle}");
    }

    #[test]
    fn agrees_with_mehler_on_unweighted_whole_space() {
        let m = GaussianModel::new(vec![2.0]).unwrap();
        let f = field::tanh_ramp(vec![1.0], 1.0);
        let x = Point::new(vec![0.9]);
        let t = 0.4;
        let exact = crate::mehler::mehler_apply(
            &m,
            &f,
            t,
            &x,
            crate::mehler::MehlerRule::GaussHermite { order: 64 },
        )
        .unwrap();
        let cfg = SdeConfig::new(0.005, 60_000, 13, 1.0).unwrap();
        let e =
            apply_semigroup(&m, &free(ConvexWeight::Zero), &f, t, &x, &cfg).unwrap();
        assert!(
            (e.value - exact.value).abs() < 3.0 * e.stderr.max(1e-4),
            "{e:?} vs {exact:?}"
        );
    }

    #[test]
    fn bounded_fields_stay_in_sup_band() {
        let m = GaussianModel::new(vec![1.5, 0.5]).unwrap();
        let f = field::sin_wave(vec![1.0, -0.5]);
        let cfg = SdeConfig::new(0.01, 10_000, 4, 1.0).unwrap();
        let p = free(ConvexWeight::SmoothedNorm { kappa: 0.8 });
        for t in [0.05, 0.2, 0.8] {
            let e = apply_semigroup(&m, &p, &f, t, &Point::new(vec![0.3, -1.0]), &cfg)
                .unwrap();
            assert!(e.value <= 1.0 + 3.0 * e.stderr);
            assert!(e.value >= -1.0 - 3.0 * e.stderr);
        }
    }

    #[test]
    fn gradient_of_constant_vanishes() {
        let f = field::constant(1, 4.0);
        let cfg = SdeConfig::new(0.01, 4_096, 5, 1.0).unwrap();
        for mode in [GradientMode::JacobianFlow, GradientMode::MollifiedBel] {
            let g = semigroup_gradient(
                &m1(),
                &free(ConvexWeight::Zero),
                &f,
                0.2,
                &Point::new(vec![0.4]),
                &cfg,
                mode,
            )
            .unwrap();
            assert!(
                g.coords.coords[0].abs() <= 3.0 * g.stderr[0].max(1e-12),
                "{mode:?}: {g:?}"
            );
        }
    }

    #[test]
    fn ou_gradient_of_linear_field_is_exact_decay() {
        // D_H T(t)x = e^{-t} for λ = 1, independent of the base point; the
        // Jacobian-flow estimate has zero variance up to discretization.
        let f = field::linear(vec![1.0]);
        let cfg = SdeConfig::new(0.001, 2_048, 6, 1.0).unwrap();
        let g = semigroup_gradient(
            &m1(),
            &free(ConvexWeight::Zero),
            &f,
            0.3,
            &Point::new(vec![1.3]),
            &cfg,
            GradientMode::JacobianFlow,
        )
        .unwrap();
        assert_relative_eq!(
            g.coords.coords[0],
            (-0.3f64).exp(),
            max_relative = 1e-3
        );
    }

    #[test]
    fn gradient_modes_agree_on_smooth_field() {
        let m = GaussianModel::new(vec![1.0]).unwrap();
        let f = field::tanh_ramp(vec![1.0], 0.8);
        let x = Point::new(vec![0.2]);
        let cfg = SdeConfig::new(0.005, 60_000, 8, 1.0).unwrap();
        let p = free(ConvexWeight::Zero);
        let a = semigroup_gradient(&m, &p, &f, 0.2, &x, &cfg, GradientMode::JacobianFlow)
            .unwrap();
        let b = semigroup_gradient(&m, &p, &f, 0.2, &x, &cfg, GradientMode::MollifiedBel)
            .unwrap();
        let tol = 3.0 * (a.stderr[0].powi(2) + b.stderr[0].powi(2)).sqrt();
        assert!(
            (a.coords.coords[0] - b.coords.coords[0]).abs() < tol,
            "{a:?} vs {b:?}"
        );
    }

    #[test]
    fn bel_handles_indicators() {
        // T(t)χ_{y<0}(x) = Φ(−a x) with a = e^{-t}/√(1−e^{-2t}), so the
        // H-gradient at x is −a φ(a x).
        let f = field::indicator_halfspace(vec![1.0], 0.0);
        let t = 0.25;
        let x = 0.5;
        let cfg = SdeConfig::new(0.005, 120_000, 9, 1.0).unwrap();
        let g = semigroup_gradient(
            &m1(),
            &free(ConvexWeight::Zero),
            &f,
            t,
            &Point::new(vec![x]),
            &cfg,
            GradientMode::MollifiedBel,
        )
        .unwrap();
        let a = (-t).exp() / (1.0 - (-2.0 * t).exp()).sqrt();
        let phi = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let oracle = -a * phi(a * x);
        assert!(
            (g.coords.coords[0] - oracle).abs() < 3.0 * g.stderr[0],
            "{g:?} vs {oracle}"
        );
    }

    #[test]
    fn jacobian_flow_rejects_indicators() {
        let f = field::indicator_halfspace(vec![1.0], 0.0);
        let cfg = SdeConfig::new(0.01, 256, 10, 1.0).unwrap();
        let err = semigroup_gradient(
            &m1(),
            &free(ConvexWeight::Zero),
            &f,
            0.2,
            &Point::new(vec![0.0]),
            &cfg,
            GradientMode::JacobianFlow,
        );
        assert!(matches!(err, Err(GaussBvError::ModeMismatch { .. })));
    }

    #[test]
    fn sweep_on_whole_space_matches_plain_semigroup() {
        let f = field::tanh_ramp(vec![1.0], 1.0);
        let x = Point::new(vec![0.5]);
        let cfg = SdeConfig::new(0.01, 8_192, 12, 1.0).unwrap();
        let plain = apply_semigroup(
            &m1(),
            &free(ConvexWeight::Zero),
            &f,
            0.2,
            &x,
            &cfg,
        )
        .unwrap();
        let sweep = penalty_sweep(
            &m1(),
            &ConvexWeight::Zero,
            &ConvexDomain::WholeSpace,
            &f,
            0.2,
            &x,
            &[0.2, 0.1],
            &cfg,
        )
        .unwrap();
        for e in sweep {
            assert_eq!(e.value.to_bits(), plain.value.to_bits());
        }
    }

    #[test]
    fn penalty_rarely_felt_deep_inside() {
        // Slab ±2 around a path started at 0 over a short horizon: the
        // penalized estimate matches the whole-space one statistically.
        let f = field::tanh_ramp(vec![1.0], 1.0);
        let x = Point::new(vec![0.0]);
        let cfg = SdeConfig::new(0.005, 30_000, 14, 1.0).unwrap();
        let plain =
            apply_semigroup(&m1(), &free(ConvexWeight::Zero), &f, 0.05, &x, &cfg)
                .unwrap();
        let sweep = penalty_sweep(
            &m1(),
            &ConvexWeight::Zero,
            &ConvexDomain::Slab { a: vec![1.0], lo: -2.0, hi: 2.0 },
            &f,
            0.05,
            &x,
            &[0.1],
            &cfg,
        )
        .unwrap();
        let tol = 3.0 * plain.combined_stderr(&sweep[0]);
        assert!(
            (plain.value - sweep[0].value).abs() < tol.max(1e-3),
            "{plain:?} vs {:?}",
            sweep[0]
        );
    }

    #[test]
    fn sweep_rejects_nondecreasing_eps() {
        let f = field::constant(1, 1.0);
        let cfg = SdeConfig::new(0.01, 64, 2, 1.0).unwrap();
        let err = penalty_sweep(
            &m1(),
            &ConvexWeight::Zero,
            &ConvexDomain::WholeSpace,
            &f,
            0.1,
            &Point::new(vec![0.0]),
            &[0.1, 0.2],
            &cfg,
        );
        assert!(err.is_err());
    }

    #[test]
    fn paths_are_seed_reproducible_and_thread_invariant() {
        let f = field::sin_wave(vec![1.0]);
        let x = Point::new(vec![0.3]);
        let cfg = SdeConfig::new(0.01, 20_000, 21, 1.0).unwrap();
        let p = free(ConvexWeight::SmoothedNorm { kappa: 0.5 });
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| apply_semigroup(&m1(), &p, &f, 0.3, &x, &cfg).unwrap())
        };
        let a = run(1);
        let b = run(3);
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
    }
}
