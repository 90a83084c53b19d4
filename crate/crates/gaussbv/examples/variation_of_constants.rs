//! The weighted semigroup written as the free semigroup plus a drift
//! correction: T(t)g = S(t)g − ∫₀ᵗ S(t−σ)[⟨D_HU, D_HT(σ)g⟩_H] dσ.
//! Each probe point gets an identity report (the three pieces estimated
//! by independent routes) and the battery closes with an envelope bound
//! on the size of the drift integral.

use gaussbv::bv::BvConfig;
use gaussbv::checks::voc_residual;
use gaussbv::field;
use gaussbv::model::GaussianModel;
use gaussbv::weight::ConvexWeight;

fn main() -> gaussbv::Result<()> {
    let model = GaussianModel::new(vec![1.0])?;
    let weight = ConvexWeight::Quadratic { k_diag: vec![0.5] };
    let g = field::tanh_ramp(vec![1.0], 1.0);
    let cfg = BvConfig::new(30_000, 24, 0.005, 523)?;

    let reports = voc_residual(&model, &weight, &g, 0.3, &cfg)?;
    for r in &reports {
        println!(
            "{:<28} lhs={:+.5} rhs={:+.5} residual={:+.2e} tol={:.1e} {}",
            r.name,
            r.lhs.value,
            r.rhs.value,
            r.residual,
            r.tolerance,
            if r.pass { "pass" } else { "FAIL" }
        );
    }
    Ok(())
}
