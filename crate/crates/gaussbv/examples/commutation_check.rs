//! The three-term gradient commutation identity: the semigroup gradient
//! D_H T(t)f equals the decayed transported gradient e^{-tQ∞^{-1}}T(t)D_Hf
//! minus a time integral weighted by the Hessian of the weight. With no
//! weight the correction vanishes and the first two terms cancel exactly;
//! a quadratic weight makes the correction the whole story.

use gaussbv::bv::BvConfig;
use gaussbv::checks::commutation_residual;
use gaussbv::field;
use gaussbv::model::{GaussianModel, Point};
use gaussbv::potential::PenalizedPotential;
use gaussbv::weight::ConvexWeight;

fn main() -> gaussbv::Result<()> {
    let model = GaussianModel::new(vec![1.0])?;
    let f = field::tanh_ramp(vec![1.0], 1.0);
    let cfg = BvConfig::new(4_000, 24, 0.00390625, 2024)?;

    for (label, weight) in [
        ("U = 0 (correction exactly zero)", ConvexWeight::Zero),
        ("U quadratic k = 0.6", ConvexWeight::Quadratic { k_diag: vec![0.6] }),
    ] {
        let potential = PenalizedPotential::unpenalized(weight);
        println!("{label}");
        for (t, x0) in [(0.15, 0.4), (0.3, -0.8)] {
            let x = Point::new(vec![x0]);
            let report = commutation_residual(&model, &potential, &f, t, &x, 16, &cfg)?;
            println!(
                "  t={t:<5} x={x0:<5} |DT - decay·TD|_H={:.5} |correction|_H={:.5} residual={:+.2e} tol={:.1e} {}",
                report.lhs.value,
                report.rhs.value,
                report.residual,
                report.tolerance,
                if report.pass { "pass" } else { "FAIL" }
            );
        }
    }
    Ok(())
}
