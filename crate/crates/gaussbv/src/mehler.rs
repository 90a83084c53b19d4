//! The exact Ornstein–Uhlenbeck semigroup.
//!
//! For the unweighted measure the semigroup has the closed integral form
//!
//! ```text
//!     S(t)f(x) = ∫ f(e^{-t} x + √(1 − e^{-2t}) y) dγ(y),
//! ```
//!
//! which this module evaluates by tensorized Gauss–Hermite quadrature in low
//! dimension and by Monte Carlo otherwise. It is the oracle the SDE engines
//! are checked against on unweighted whole-space configurations, and the
//! quadrature backbone of the variation-of-constants checks.

use crate::error::Result;
use crate::estimate::{mc_mean, Estimate, Meta};
use crate::field::ScalarField;
use crate::model::{GaussianModel, Point};
use crate::quadrature::{for_each_gaussian_node, gauss_hermite};
use crate::rng::Tag;
use rand::Rng;
use rand_distr::StandardNormal;

/// How to evaluate the smoothing integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MehlerRule {
    /// Tensor Gauss–Hermite of the given order per axis. Cost order^d.
    GaussHermite { order: usize },
    /// Plain Monte Carlo with n draws of y.
    MonteCarlo { n: u64, seed: u64 },
}

impl MehlerRule {
    /// Order 64 per axis up to dimension 3, Monte Carlo beyond.
    pub fn auto(dim: usize, seed: u64) -> Self {
        if dim <= 3 {
            MehlerRule::GaussHermite { order: 64 }
        } else {
            MehlerRule::MonteCarlo { n: 200_000, seed }
        }
    }
}

/// S(t)f(x). At t = 0 returns f(x) exactly; constants are preserved exactly
/// under quadrature because Hermite weights sum to one.
pub fn mehler_apply(
    model: &GaussianModel,
    f: &ScalarField,
    t: f64,
    x: &Point,
    rule: MehlerRule,
) -> Result<Estimate> {
    let meta = Meta { t, epsilon: None, dt: None };
    if t == 0.0 {
        return Ok(Estimate::exact(f.value(x)).with_meta(meta));
    }
    let decay = (-t).exp();
    let spread = (1.0 - decay * decay).sqrt();
    match rule {
        MehlerRule::GaussHermite { order } => {
            let gh = gauss_hermite(order)?;
            let mut acc = 0.0;
            let mut arg = Point::zeros(model.dim());
            for_each_gaussian_node(&gh, model.eigenvalues(), |y, w| {
                for k in 0..model.dim() {
                    arg.coords[k] = decay * x.coords[k] + spread * y[k];
                }
                acc += w * f.value(&arg);
            });
            Ok(Estimate::exact(acc).with_meta(meta))
        }
        MehlerRule::MonteCarlo { n, seed } => {
            let est = mc_mean(n, seed, Tag::Semigroup, |rng, _| {
                let mut arg = Point::zeros(model.dim());
                for k in 0..model.dim() {
                    let y: f64 = rng.sample(StandardNormal);
                    arg.coords[k] =
                        decay * x.coords[k] + spread * model.lambda(k).sqrt() * y;
                }
                f.value(&arg)
            });
            Ok(Estimate { meta, ..est })
        }
    }
}

/// ∫ f·S(t)g dγ by an outer Gauss–Hermite sweep; used by the symmetry checks.
pub fn pairing_gamma(
    model: &GaussianModel,
    f: &ScalarField,
    g: &ScalarField,
    t: f64,
    order: usize,
) -> Result<f64> {
    let gh = gauss_hermite(order)?;
    let mut acc = 0.0;
    let mut err: Result<()> = Ok(());
    let mut xp = Point::zeros(model.dim());
    for_each_gaussian_node(&gh, model.eigenvalues(), |x, w| {
        if err.is_err() {
            return;
        }
        xp.coords.copy_from_slice(x);
        match mehler_apply(model, g, t, &xp, MehlerRule::GaussHermite { order }) {
            Ok(sg) => acc += w * f.value(&xp) * sg.value,
            Err(e) => err = Err(e),
        }
    });
    err?;
    Ok(acc)
}
