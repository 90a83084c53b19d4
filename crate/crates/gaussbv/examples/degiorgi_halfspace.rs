//! The regularized-variation curve of a half-space indicator. The curve
//! value at each t estimates ∫|D_H T(t)χ_E|_H dγ; as t → 0 it increases
//! to the Gaussian perimeter of E, which for E = {x < 0} under the
//! standard 1D Gaussian is the density at the boundary, 1/√(2π).

use gaussbv::bv::{de_giorgi_curve, halfspace_perimeter_oracle, BvConfig};
use gaussbv::domain::ConvexDomain;
use gaussbv::field;
use gaussbv::model::GaussianModel;
use gaussbv::potential::PenalizedPotential;
use gaussbv::weight::ConvexWeight;

fn main() -> gaussbv::Result<()> {
    let model = GaussianModel::new(vec![1.0])?;
    let potential = PenalizedPotential::unpenalized(ConvexWeight::Zero);
    let u = field::indicator_halfspace(vec![1.0], 0.0);
    let cfg = BvConfig::new(60_000, 256, 0.00625, 41)?;

    let t_grid = [0.4, 0.2, 0.1, 0.05];
    let curve = de_giorgi_curve(&model, &potential, &u, &t_grid, &cfg)?;

    let oracle = halfspace_perimeter_oracle(
        &model,
        &ConvexWeight::Zero,
        &[1.0],
        0.0,
        &ConvexDomain::WholeSpace,
    )?;

    println!("{:>8}  {:>10}  {:>9}  {:>10}", "t", "curve", "stderr", "e^-t/√2π");
    for (t, est) in &curve.curve {
        println!(
            "{t:>8.4}  {:>10.6}  {:>9.1e}  {:>10.6}",
            est.value,
            est.stderr,
            (-t).exp() * oracle.value
        );
    }
    println!(
        "extrapolated ({} fit)  {:.6} ± {:.1e}",
        curve.model, curve.extrapolated.value, curve.extrapolated.stderr
    );
    println!("perimeter oracle       {:.6}", oracle.value);
    let gap = (curve.extrapolated.value - oracle.value).abs();
    println!("gap {:.2}% of oracle", 100.0 * gap / oracle.value);
    Ok(())
}
