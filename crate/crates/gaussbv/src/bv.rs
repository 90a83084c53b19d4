//! Variation, perimeter, and content estimators built on the semigroup.
//!
//! The central object is the variation curve
//!
//! ```text
//!     t ↦ ∫_Ω |D_H T(t)u|_H dν,
//! ```
//!
//! which is finite for every t > 0 even when u is an indicator, decreases no
//! faster than e^{-t/λ₁} as t grows, and converges as t ↓ 0 to the total
//! variation of u on Ω. The curve is estimated by nested Monte Carlo and the
//! limit is read off by a decay-envelope fit; perimeters of half-spaces and
//! variations of smooth fields have independent quadrature oracles to test
//! against.
//!
//! Sampling conventions shared by every estimator here:
//!
//! - The outer measure is ν = e^{-U} γ restricted to Ω, never normalized.
//!   A proposal x ~ γ is accepted when a uniform coin clears e^{-(U - inf U)}
//!   and x ∈ Ω; rejected proposals contribute zero, so the plain mean of
//!   e^{-inf U}·1_accept·F(x) is unbiased for ∫_Ω F dν with an honest
//!   standard error. Acceptance below 1% aborts with an error instead of
//!   returning a hollow estimate.
//! - Inner semigroup quantities at an accepted x use their own generators
//!   seeded by the outer sample index, so results are independent of thread
//!   count and batch geometry.
//!
//! The curve estimator does not plug the inner gradient estimate into the
//! norm: E|ĝ|_H ≥ |E ĝ|_H, and where the true gradient is small the plug-in
//! value floors at the inner noise level instead of decaying, which at
//! practical budgets overwhelms the limit. Instead each accepted x runs two
//! independent gradient estimates and reports ⟨ĝ_B, ĝ_A/|ĝ_A|_H⟩_H: the
//! direction factor is independent of the magnitude factor, so the product
//! is unbiased up to direction misalignment, which only matters where the
//! gradient is comparable to its own standard error and is negligible at the
//! budgets used. Lipschitz fields take the cheaper pathwise route, whose
//! inner noise is small enough for the plug-in norm.

use crate::domain::ConvexDomain;
use crate::error::{GaussBvError, Result};
use crate::estimate::{extrapolate_to_zero, mc_mean_checked, Estimate, Meta};
use crate::field::{ScalarField, VectorField};
use crate::model::{GaussianModel, Point};
use crate::potential::PenalizedPotential;
use crate::quadrature::gaussian_expectation;
use crate::rng::{nested_seed, substream, Tag, BATCH_SIZE};
use crate::sde::{path_bel_with, path_jacobian_grad_with, JacScratch};
use crate::weight::ConvexWeight;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Minimum fraction of outer proposals that must land in Ω and clear the
/// weight coin; below this the domain is too small under ν for rejection
/// sampling to say anything.
pub const ACCEPTANCE_FLOOR: f64 = 0.01;

/// Fixed seeds for the oracle routines, which take no sampling config.
const VARIATION_ORACLE_SEED: u64 = 0x766172;
const PERIMETER_ORACLE_SEED: u64 = 0x706572;

/// Which norm of the gradient to integrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradientNorm {
    /// |D_H u|_H = (Σ_i λ_i (∂_i u)²)^½, the variation norm.
    H,
    /// |Du| = (Σ_i (∂_i u)²)^½, needed for the two-point content constant.
    Euclidean,
}

/// Budgets for the nested outer/inner estimators.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BvConfig {
    /// Outer ν-proposals per estimate (curve point, content value, bound).
    pub outer: u64,
    /// Inner SDE paths per accepted outer sample.
    pub inner: u64,
    /// Step-size bound for the inner dynamics at the smallest time of
    /// interest; larger times take at most 64 steps (weak error O(t·dt)
    /// stays far below the statistical error there).
    pub dt: f64,
    pub seed: u64,
}

impl BvConfig {
    pub fn new(outer: u64, inner: u64, dt: f64, seed: u64) -> Result<Self> {
        let cfg = BvConfig { outer, inner, dt, seed };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.outer < 16 {
            return Err(GaussBvError::InvalidParameter {
                name: "outer",
                reason: format!("need at least 16 outer samples, got {}", self.outer),
            });
        }
        if self.inner < 8 {
            return Err(GaussBvError::InvalidParameter {
                name: "inner",
                reason: format!("need at least 8 inner paths, got {}", self.inner),
            });
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(GaussBvError::InvalidParameter {
                name: "dt",
                reason: format!("step bound must be positive and finite, got {}", self.dt),
            });
        }
        Ok(())
    }
}

/// The variation curve with its extrapolated t → 0 limit.
#[derive(Debug, Clone, Serialize)]
pub struct VariationEstimate {
    /// (t, estimate) pairs, times strictly decreasing toward 0.
    pub curve: Vec<(f64, Estimate)>,
    /// Fitted limit of the curve at t = 0: the variation |D_ν u|(Ω).
    pub extrapolated: Estimate,
    /// Which fit produced the limit: "exponential", "linear", or
    /// "single-point" when only one time was given.
    pub model: &'static str,
}

/// Default geometric time grid t_k = 0.4·λ₁·2^{-k}, six points, decreasing.
/// The top resolves the decay envelope, the bottom the √t content scale.
pub fn default_t_grid(model: &GaussianModel) -> Vec<f64> {
    let t0 = 0.4 * model.lambda_max();
    (0..6).map(|k| t0 / (1u64 << k) as f64).collect()
}

/// H-inner product of two v-coordinate slices: Σ a_i b_i / λ_i.
pub(crate) fn h_dot(model: &GaussianModel, a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .zip(model.eigenvalues())
        .map(|((ai, bi), &l)| ai * bi / l)
        .sum()
}

/// Step count and size for an inner run at horizon t: the configured bound
/// applies at small t, the count is clamped to [8, 64], and an active
/// penalty re-tightens dt to min(ε, λ_min)/10 for stiffness.
pub(crate) fn bv_steps(
    model: &GaussianModel,
    potential: &PenalizedPotential,
    t: f64,
    dt_bound: f64,
) -> (usize, f64) {
    let mut n = ((t / dt_bound).ceil().max(1.0) as usize).clamp(8, 64);
    if let Some(eps) = potential.epsilon {
        let cap = eps.min(model.lambda_min()) / 10.0;
        let n_stiff = (t / cap).ceil().max(1.0) as usize;
        n = n.max(n_stiff);
    }
    (n, t / n as f64)
}

/// Mean of e^{-inf U}·1_accept·F over n γ-proposals: unbiased for ∫_Ω F dν.
/// `per_accepted` runs only on accepted points; it may draw from the passed
/// generator (positioned after the proposal and its coin) or seed its own
/// from the global sample index. Errors when acceptance drops below the
/// floor or any accepted value is non-finite.
pub(crate) fn nu_restricted_mean(
    model: &GaussianModel,
    weight: &ConvexWeight,
    domain: &ConvexDomain,
    n: u64,
    seed: u64,
    tag: Tag,
    what: &'static str,
    per_accepted: impl Fn(&mut ChaCha8Rng, u64, &Point) -> f64 + Sync,
) -> Result<Estimate> {
    let u_min = weight.min_value();
    let scale = (-u_min).exp();
    let batches = n.div_ceil(BATCH_SIZE as u64);
    let partials: Vec<(f64, f64, u64, Option<u64>)> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = substream(seed, tag, b);
            let lo = b * BATCH_SIZE as u64;
            let hi = ((b + 1) * BATCH_SIZE as u64).min(n);
            let mut sum = 0.0;
            let mut sumsq = 0.0;
            let mut acc = 0u64;
            let mut bad = None;
            for i in lo..hi {
                let x = model.sample_gamma_with(&mut rng);
                let coin: f64 = rng.gen();
                let keep = coin < (-(weight.value(&x) - u_min)).exp()
                    && domain.contains(model, &x);
                if keep {
                    acc += 1;
                    let v = scale * per_accepted(&mut rng, i, &x);
                    if !v.is_finite() && bad.is_none() {
                        bad = Some(b);
                    }
                    sum += v;
                    sumsq += v * v;
                }
            }
            (sum, sumsq, acc, bad)
        })
        .collect();
    if let Some(batch) = partials.iter().find_map(|(_, _, _, bad)| *bad) {
        return Err(GaussBvError::NonFinite { what, seed, batch });
    }
    let (sum, sumsq, acc) = partials
        .iter()
        .fold((0.0, 0.0, 0u64), |(s, q, a), (bs, bq, ba, _)| {
            (s + bs, q + bq, a + ba)
        });
    let rate = acc as f64 / n as f64;
    if rate < ACCEPTANCE_FLOOR {
        return Err(GaussBvError::AcceptanceTooLow {
            rate,
            floor: ACCEPTANCE_FLOOR,
        });
    }
    let nf = n as f64;
    let mean = sum / nf;
    let var = ((sumsq - sum * sum / nf) / (nf - 1.0).max(1.0)).max(0.0);
    Ok(Estimate {
        value: mean,
        stderr: (var / nf).sqrt(),
        n,
        meta: Meta::default(),
    })
}

/// Inner gradient estimate at x: n BEL paths with the sample mean of f as an
/// exact control variate, H coordinates (λ_j times the Euclidean estimate)
/// written into `out`. Returns false if any path blows up.
#[allow(clippy::too_many_arguments)]
fn inner_gradient_bel(
    model: &GaussianModel,
    potential: &PenalizedPotential,
    u: &ScalarField,
    t: f64,
    x: &Point,
    n_steps: usize,
    dt: f64,
    n_paths: u64,
    seed: u64,
    scratch: &mut JacScratch,
    out: &mut [f64],
) -> bool {
    let d = model.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sf = 0.0;
    let mut sw = vec![0.0; d];
    let mut sfw = vec![0.0; d];
    for _ in 0..n_paths {
        let fv =
            path_bel_with(model, potential, u, t, x, n_steps, dt, &mut rng, scratch);
        if !fv.is_finite() {
            return false;
        }
        sf += fv;
        for j in 0..d {
            sw[j] += scratch.w[j];
            sfw[j] += fv * scratch.w[j];
        }
    }
    // ĝ_j = Σ(f_i − f̄)w_ij/(n−1): unbiased because E[w] = 0 exactly.
    let nf = n_paths as f64;
    for j in 0..d {
        out[j] = model.lambda(j) * (sfw[j] - sf * sw[j] / nf) / (nf - 1.0).max(1.0);
    }
    true
}

/// Inner gradient estimate for Lipschitz u: mean over n pathwise-derivative
/// samples, H coordinates written into `out`. Returns false on a blow-up.
#[allow(clippy::too_many_arguments)]
pub(crate) fn inner_gradient_flow(
    model: &GaussianModel,
    potential: &PenalizedPotential,
    u: &ScalarField,
    x: &Point,
    n_steps: usize,
    dt: f64,
    n_paths: u64,
    seed: u64,
    scratch: &mut JacScratch,
    out: &mut [f64],
) -> bool {
    let d = model.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = vec![0.0; d];
    out[..d].fill(0.0);
    for _ in 0..n_paths {
        path_jacobian_grad_with(
            model, potential, u, x, n_steps, dt, &mut rng, scratch, &mut g,
        );
        for j in 0..d {
            if !g[j].is_finite() {
                return false;
            }
            out[j] += g[j];
        }
    }
    let nf = n_paths as f64;
    for j in 0..d {
        out[j] *= model.lambda(j) / nf;
    }
    true
}

/// One curve point: ∫_Ω |D_H T(t)u|_H dν at time t with the given budgets.
#[allow(clippy::too_many_arguments)]
pub(crate) fn variation_point(
    model: &GaussianModel,
    potential: &PenalizedPotential,
    u: &ScalarField,
    t: f64,
    outer: u64,
    inner: u64,
    dt_bound: f64,
    seed_t: u64,
) -> Result<Estimate> {
    let d = model.dim();
    let (n_steps, dt) = bv_steps(model, potential, t, dt_bound);
    let pathwise = u.lipschitz;
    let n_a = (inner / 3).max(4);
    let n_b = (inner - n_a).max(4);
    let est = nu_restricted_mean(
        model,
        &potential.weight,
        &potential.domain,
        outer,
        seed_t,
        Tag::OuterMeasure,
        "de_giorgi_curve",
        |_, i, x| {
            let mut scratch = JacScratch::new(d);
            if pathwise {
                // Low inner noise: the plug-in norm's bias is quadratic in
                // that noise and stays far below the outer standard error.
                let mut da = vec![0.0; d];
                if !inner_gradient_flow(
                    model,
                    potential,
                    u,
                    x,
                    n_steps,
                    dt,
                    inner,
                    nested_seed(seed_t, i, 0),
                    &mut scratch,
                    &mut da,
                ) {
                    return f64::NAN;
                }
                h_dot(model, &da, &da).sqrt()
            } else {
                let mut da = vec![0.0; d];
                let mut db = vec![0.0; d];
                let ok_a = inner_gradient_bel(
                    model,
                    potential,
                    u,
                    t,
                    x,
                    n_steps,
                    dt,
                    n_a,
                    nested_seed(seed_t, i, 0),
                    &mut scratch,
                    &mut da,
                );
                let ok_b = inner_gradient_bel(
                    model,
                    potential,
                    u,
                    t,
                    x,
                    n_steps,
                    dt,
                    n_b,
                    nested_seed(seed_t, i, 1),
                    &mut scratch,
                    &mut db,
                );
                if !ok_a || !ok_b {
                    return f64::NAN;
                }
                let na = h_dot(model, &da, &da).sqrt();
                if na <= f64::MIN_POSITIVE {
                    0.0
                } else {
                    h_dot(model, &db, &da) / na
                }
            }
        },
    )?;
    Ok(Estimate {
        meta: Meta { t, epsilon: potential.epsilon, dt: Some(dt) },
        ..est
    })
}

/// The variation curve t ↦ ∫_Ω |D_H T(t)u|_H dν on a decreasing time grid,
/// with its extrapolated t → 0 limit.
///
/// The outer integral samples ν|_Ω by rejection; the inner gradient runs the
/// penalized dynamics of `potential`, so a domain enters the dynamics only
/// through the penalty the caller chose (the outer measure always restricts
/// to the domain). The limit is decided by the three smallest times, which
/// get the full budget; earlier points only trace the decay envelope and run
/// at an eighth of the outer budget.
pub fn de_giorgi_curve(
    model: &GaussianModel,
    potential: &PenalizedPotential,
    u: &ScalarField,
    t_list: &[f64],
    cfg: &BvConfig,
) -> Result<VariationEstimate> {
    cfg.validate()?;
    potential.validate(model)?;
    if t_list.is_empty() {
        return Err(GaussBvError::InvalidParameter {
            name: "t_list",
            reason: "need at least one time".into(),
        });
    }
    for w in t_list.windows(2) {
        if !(w[1] < w[0]) {
            return Err(GaussBvError::InvalidParameter {
                name: "t_list",
                reason: "times must be strictly decreasing".into(),
            });
        }
    }
    if !(t_list[t_list.len() - 1] > 0.0) || !t_list[0].is_finite() {
        return Err(GaussBvError::InvalidParameter {
            name: "t_list",
            reason: "times must be positive and finite".into(),
        });
    }
    let full_from = t_list.len().saturating_sub(3);
    let coarse_outer = (cfg.outer / 8).max(256).min(cfg.outer);
    let coarse_inner = (cfg.inner / 2).max(8);
    let mut curve = Vec::with_capacity(t_list.len());
    for (k, &t) in t_list.iter().enumerate() {
        let (outer, inner) = if k < full_from {
            (coarse_outer, coarse_inner)
        } else {
            (cfg.outer, cfg.inner)
        };
        let seed_t = nested_seed(cfg.seed, 0xFFFF_0000 + k as u64, 1);
        let est =
            variation_point(model, potential, u, t, outer, inner, cfg.dt, seed_t)?;
        curve.push((t, est));
    }
    let (extrapolated, fit) = if curve.len() >= 2 {
        extrapolate_to_zero(&curve, model.lambda_max())
    } else {
        (curve[0].1, "single-point")
    };
    Ok(VariationEstimate { curve, extrapolated, model: fit })
}

/// ∫_Ω |D_H u|_H dν (H mode) or ∫_Ω |Du| dν (euclidean mode) for smooth u:
/// tensor Gauss–Hermite on the whole space up to dimension 3, otherwise
/// rejection Monte Carlo with a fixed internal seed.
pub fn smooth_variation_oracle(
    model: &GaussianModel,
    potential: &PenalizedPotential,
    u: &ScalarField,
    norm: GradientNorm,
) -> Result<Estimate> {
    potential.validate(model)?;
    let weight = potential.weight.clone();
    let norm_at = move |model: &GaussianModel, x: &Point| -> f64 {
        let g = u.gradient(x);
        match norm {
            GradientNorm::Euclidean => {
                g.iter().map(|gi| gi * gi).sum::<f64>().sqrt()
            }
            GradientNorm::H => g
                .iter()
                .zip(model.eigenvalues())
                .map(|(gi, &l)| l * gi * gi)
                .sum::<f64>()
                .sqrt(),
        }
    };
    let whole = matches!(potential.domain, ConvexDomain::WholeSpace);
    if whole && model.dim() <= 3 {
        let order = 48usize;
        let value = gaussian_expectation(order, model.eigenvalues(), |coords| {
            let x = Point::new(coords.to_vec());
            (-weight.value(&x)).exp() * norm_at(model, &x)
        })?;
        return Ok(Estimate {
            value,
            stderr: 0.0,
            n: (order as u64).pow(model.dim() as u32),
            meta: Meta::default(),
        });
    }
    nu_restricted_mean(
        model,
        &potential.weight,
        &potential.domain,
        400_000,
        VARIATION_ORACLE_SEED,
        Tag::OuterMeasure,
        "smooth_variation_oracle",
        |_, _, x| norm_at(model, x),
    )
}

/// Perimeter of the half-space E = {⟨a,x⟩ < c} in Ω under ν: the boundary
/// integral reduces along the ⟨a,·⟩ marginal to
///
/// ```text
///     P_ν(E, Ω) = φ(c/σ_a) · E[ e^{-U(X)} 1_Ω(X) | ⟨a,X⟩ = c ],
/// ```
///
/// with σ_a² = Σ λ_i a_i² and φ the standard normal density; the conditional
/// law is γ shifted onto the hyperplane, sampled as x = y + (c − ⟨a,y⟩)·Qa/σ_a².
/// With no weight and no domain the conditional factor is exactly 1.
pub fn halfspace_perimeter_oracle(
    model: &GaussianModel,
    weight: &ConvexWeight,
    a: &[f64],
    c: f64,
    domain: &ConvexDomain,
) -> Result<Estimate> {
    let d = model.dim();
    if a.len() != d {
        return Err(GaussBvError::DimensionMismatch { expected: d, got: a.len() });
    }
    weight.validate(model)?;
    domain.validate(model)?;
    let s2: f64 = model
        .eigenvalues()
        .iter()
        .zip(a)
        .map(|(&l, &ai)| l * ai * ai)
        .sum();
    if !(s2 > 0.0) || !s2.is_finite() || !c.is_finite() {
        return Err(GaussBvError::InvalidParameter {
            name: "a",
            reason: "conormal must have positive finite |Q^{1/2}a|".into(),
        });
    }
    let density = (-c * c / (2.0 * s2)).exp() / (2.0 * std::f64::consts::PI).sqrt();
    if matches!(weight, ConvexWeight::Zero)
        && matches!(domain, ConvexDomain::WholeSpace)
    {
        return Ok(Estimate { value: density, stderr: 0.0, n: 1, meta: Meta::default() });
    }
    let cond = mc_mean_checked(
        200_000,
        PERIMETER_ORACLE_SEED,
        Tag::OuterMeasure,
        "halfspace_perimeter_oracle",
        |rng, _| {
            let y = model.sample_gamma_with(rng);
            let s: f64 = a.iter().zip(&y.coords).map(|(ai, yi)| ai * yi).sum();
            let shift = (c - s) / s2;
            let x = Point::new(
                y.coords
                    .iter()
                    .enumerate()
                    .map(|(i, yi)| yi + shift * model.lambda(i) * a[i])
                    .collect(),
            );
            if domain.contains(model, &x) {
                (-weight.value(&x)).exp()
            } else {
                0.0
            }
        },
    )?;
    Ok(Estimate {
        value: density * cond.value,
        stderr: density * cond.stderr,
        n: cond.n,
        meta: Meta::default(),
    })
}

/// Short-time content (1/√t)·∫_Ω |T(t)u − u| dν. The inner semigroup value
/// is a Monte Carlo mean; for indicator u the absolute difference of a mean
/// in [0,1] against a value in {0,1} makes the inner estimate exactly
/// unbiased, which is why the content checks run on indicators.
pub fn ou_content(
    model: &GaussianModel,
    potential: &PenalizedPotential,
    u: &ScalarField,
    t: f64,
    cfg: &BvConfig,
) -> Result<Estimate> {
    cfg.validate()?;
    potential.validate(model)?;
    positive_time(t)?;
    let (n_steps, dt) = bv_steps(model, potential, t, cfg.dt);
    let inner = cfg.inner;
    let est = nu_restricted_mean(
        model,
        &potential.weight,
        &potential.domain,
        cfg.outer,
        cfg.seed,
        Tag::OuterMeasure,
        "ou_content",
        |_, i, x| {
            let mut rng = ChaCha8Rng::seed_from_u64(nested_seed(cfg.seed, i, 0));
            let mut acc = 0.0;
            for _ in 0..inner {
                let xt = crate::sde::simulate_path(
                    model, potential, x, n_steps, dt, &mut rng,
                );
                acc += u.value(&xt);
            }
            (acc / inner as f64 - u.value(x)).abs() / t.sqrt()
        },
    )?;
    Ok(Estimate {
        meta: Meta { t, epsilon: potential.epsilon, dt: Some(dt) },
        ..est
    })
}

/// The half-side form of the same content for an indicator set E:
/// (2/√t)·∫_{Ω∩E^c} T(t)χ_E dν. Mass conservation of the ν-symmetric
/// semigroup makes this equal to [`ou_content`] of χ_E.
pub fn ou_content_halfside(
    model: &GaussianModel,
    potential: &PenalizedPotential,
    e_set: &ConvexDomain,
    t: f64,
    cfg: &BvConfig,
) -> Result<Estimate> {
    cfg.validate()?;
    potential.validate(model)?;
    e_set.validate(model)?;
    positive_time(t)?;
    let (n_steps, dt) = bv_steps(model, potential, t, cfg.dt);
    let inner = cfg.inner;
    let est = nu_restricted_mean(
        model,
        &potential.weight,
        &potential.domain,
        cfg.outer,
        cfg.seed,
        Tag::OuterMeasure,
        "ou_content_halfside",
        |_, i, x| {
            if e_set.contains(model, x) {
                return 0.0;
            }
            let mut rng = ChaCha8Rng::seed_from_u64(nested_seed(cfg.seed, i, 0));
            let mut acc = 0.0;
            for _ in 0..inner {
                let xt = crate::sde::simulate_path(
                    model, potential, x, n_steps, dt, &mut rng,
                );
                if e_set.contains(model, &xt) {
                    acc += 1.0;
                }
            }
            2.0 * (acc / inner as f64) / t.sqrt()
        },
    )?;
    Ok(Estimate {
        meta: Meta { t, epsilon: potential.epsilon, dt: Some(dt) },
        ..est
    })
}

/// Two-point content (1/√t)·∫_Ω ∫_X |u(e^{-t}x + √(1−e^{-2t})y) − u(x)|
/// dγ(y) dν(x), a flat double Monte Carlo with no simulation. For smooth u
/// it converges as t ↓ 0 to (2/√π)·∫_Ω |Q^{1/2}Du| dν: the increment
/// z − x is asymptotically N(0, 2tQ), so the limit carries the
/// covariance-scaled gradient norm |Q^{1/2}Du| = |D_H u|_H, which agrees
/// with the Euclidean norm exactly when every eigenvalue is one.
pub fn ledoux_content(
    model: &GaussianModel,
    weight: &ConvexWeight,
    domain: &ConvexDomain,
    u: &ScalarField,
    t: f64,
    cfg: &BvConfig,
) -> Result<Estimate> {
    cfg.validate()?;
    weight.validate(model)?;
    domain.validate(model)?;
    positive_time(t)?;
    let et = (-t).exp();
    let st = (1.0 - et * et).sqrt();
    let d = model.dim();
    let est = nu_restricted_mean(
        model,
        weight,
        domain,
        cfg.outer,
        cfg.seed,
        Tag::LedouxPairs,
        "ledoux_content",
        |rng, _, x| {
            let y = model.sample_gamma_with(rng);
            let z = Point::new(
                (0..d).map(|i| et * x.coords[i] + st * y.coords[i]).collect(),
            );
            (u.value(&z) - u.value(x)).abs() / t.sqrt()
        },
    )?;
    Ok(Estimate { meta: Meta { t, epsilon: None, dt: None }, ..est })
}

/// Divergence of a vector field g (v-coordinates) with respect to ν:
///
/// ```text
///     div_ν g(x) = Σ_i ( ∂_i g_i − g_i ∂_i U − x_i g_i / λ_i ),
/// ```
///
/// the sign convention fixed so that ∫⟨D_H u, g⟩_H dν = −∫ u · div_ν g dν
/// for smooth u and g supported inside the domain (checked as an invariant).
pub fn divnu_field(
    model: &GaussianModel,
    weight: &ConvexWeight,
    g: &VectorField,
    x: &Point,
) -> f64 {
    let d = model.dim();
    assert_eq!(g.components.len(), d, "field has wrong component count");
    let du = weight.gradient(x);
    let mut acc = 0.0;
    for i in 0..d {
        let gi = g.components[i].value(x);
        let dgi = g.components[i].gradient(x)[i];
        acc += dgi - gi * du[i] - x.coords[i] * gi / model.lambda(i);
    }
    acc
}

/// ∫_Ω u · div_ν g dν for an admissible test field g: a certified lower
/// bound for the variation of u on Ω, by duality. Admissibility (|g|_H ≤ 1,
/// support strictly inside Ω) is spot-checked on 256 deterministic probe
/// points; a violation is an error, not a warning, because the duality bound
/// is only valid for admissible fields.
pub fn duality_lower_bound(
    model: &GaussianModel,
    potential: &PenalizedPotential,
    u: &ScalarField,
    g: &VectorField,
    cfg: &BvConfig,
) -> Result<Estimate> {
    cfg.validate()?;
    potential.validate(model)?;
    let d = model.dim();
    if g.components.len() != d {
        return Err(GaussBvError::DimensionMismatch {
            expected: d,
            got: g.components.len(),
        });
    }
    let mut probe_rng =
        ChaCha8Rng::seed_from_u64(nested_seed(cfg.seed, 0xAD317, 0));
    let bounded_domain = !matches!(potential.domain, ConvexDomain::WholeSpace);
    for _ in 0..256 {
        let x = model.sample_gamma_with(&mut probe_rng);
        let gv = g.value(&x);
        if model.h_norm(&gv) > 1.0 + 1e-9 {
            return Err(GaussBvError::InvalidParameter {
                name: "g",
                reason: "field exceeds unit H-norm at a probe point".into(),
            });
        }
        if bounded_domain {
            // Walk out along the probe direction until outside, then project
            // back: the projection lands on ∂Ω, where g must vanish. A
            // direction that never leaves (parallel to a half-space or slab
            // boundary) simply yields no boundary probe.
            let mut scale = 1.0;
            for _ in 0..60 {
                let y =
                    Point::new(x.coords.iter().map(|xi| xi * scale).collect());
                if !potential.domain.contains(model, &y) {
                    let p = potential.domain.h_projection(model, &y)?;
                    if model.h_norm(&g.value(&p)) > 1e-6 {
                        return Err(GaussBvError::InvalidParameter {
                            name: "g",
                            reason: "support touches the domain boundary".into(),
                        });
                    }
                    break;
                }
                scale *= 2.0;
            }
        }
    }
    nu_restricted_mean(
        model,
        &potential.weight,
        &potential.domain,
        cfg.outer,
        cfg.seed,
        Tag::OuterMeasure,
        "duality_lower_bound",
        |_, _, x| u.value(x) * divnu_field(model, &potential.weight, g, x),
    )
}

pub(crate) fn positive_time(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(GaussBvError::InvalidParameter {
            name: "t",
            reason: format!("time must be positive and finite, got {t}"),
        });
    }
    Ok(())
}
