//! Run the standing identity and inequality battery on two built-in
//! configurations and print one line per certified statement. Rows cover
//! semigroup symmetry, the pointwise gradient contraction, the variation
//! decay envelope, content-variation bounds, sup-norm transport, content
//! identities, mass conservation by three routes, and the norm chain.

use gaussbv::bv::BvConfig;
use gaussbv::checks::inequality_suite;
use gaussbv::model::GaussianModel;
use gaussbv::potential::PenalizedPotential;
use gaussbv::weight::ConvexWeight;

fn main() -> gaussbv::Result<()> {
    let configs = [
        (
            "free Gaussian, d = 1",
            GaussianModel::new(vec![1.0])?,
            PenalizedPotential::unpenalized(ConvexWeight::Zero),
            BvConfig::new(1_500, 32, 0.00625, 1203)?,
        ),
        (
            "anisotropic quadratic weight, d = 2",
            GaussianModel::new(vec![2.0, 1.0])?,
            PenalizedPotential::unpenalized(ConvexWeight::Quadratic {
                k_diag: vec![0.4, 0.2],
            }),
            BvConfig::new(1_200, 32, 0.0078125, 4407)?,
        ),
    ];

    let mut pass = 0usize;
    let mut total = 0usize;
    for (label, model, potential, cfg) in &configs {
        println!("[{label}]");
        for r in inequality_suite(model, potential, cfg)? {
            total += 1;
            pass += r.pass as usize;
            println!(
                "  {:<28} residual={:+.3e} tol={:.1e} {}",
                r.name,
                r.residual,
                r.tolerance,
                if r.pass { "pass" } else { "FAIL" }
            );
        }
    }
    println!("{pass}/{total} checks pass");
    Ok(())
}
