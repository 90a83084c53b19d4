//! Probes the exterior-collar curvature integral behind the penalized
//! construction: the mean of exp(−U)·‖D²_H d²‖²_HS / d⁴ over Gaussian
//! samples falling outside the domain. In a finite truncation this
//! integrand carries an inverse fourth power of the distance, so its
//! integral diverges near any wall the samples can reach; what the probe
//! really measures is how strongly the sample cloud feels the boundary.
//! A wall through the bulk is felt at every budget and dominates the
//! probe by many orders of magnitude. A wall far in the tail stays
//! invisible until a rare sample grazes it and spikes the mean. Either
//! way a single nearest sample carries most of the mass, so successive
//! estimates jump around instead of settling: that refusal to stabilize
//! is the visible signature of a divergent collar. The divergence flag
//! reports detected growth at a given budget, never a proof of
//! integrability.

use gaussbv::domain::{check_hyp_d, divergence_flag, ConvexDomain};
use gaussbv::model::GaussianModel;
use gaussbv::weight::ConvexWeight;

fn main() -> gaussbv::Result<()> {
    let model = GaussianModel::new(vec![1.0, 0.5, 0.25])?;
    let weight = ConvexWeight::Zero;

    let cases: [(&str, ConvexDomain); 3] = [
        ("whole space (no wall)", ConvexDomain::WholeSpace),
        (
            "H-ball radius 4 (wall in the tail)",
            ConvexDomain::HBall { center: vec![0.0; 3], radius: 4.0 },
        ),
        (
            "half-space through the origin (wall in the bulk)",
            ConvexDomain::HalfSpace { a: vec![1.0, 0.0, 0.0], c: 0.0 },
        ),
    ];

    for (label, domain) in &cases {
        println!("{label}:");
        let mut prev = None;
        for (i, n) in [40_000u64, 160_000, 640_000].into_iter().enumerate() {
            let est = check_hyp_d(&model, domain, &weight, n, 11 + i as u64)?;
            let flag = prev
                .as_ref()
                .map(|p| divergence_flag(p, &est))
                .unwrap_or(false);
            println!("  n = {n:>7}  estimate {:>12.4e}  flagged: {flag}", est.value);
            prev = Some(est);
        }
    }
    println!("zero without a boundary; spikes when a rare sample grazes");
    println!("the distant wall; several orders of magnitude more when the");
    println!("wall cuts the bulk. one nearest sample dominates each value,");
    println!("so they never settle, and a false flag means only that no");
    println!("growth was detected at this budget");
    Ok(())
}
