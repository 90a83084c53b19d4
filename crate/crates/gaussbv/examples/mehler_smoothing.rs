//! Apply the unweighted whole-space semigroup to a ramp through the
//! explicit Gaussian smoothing kernel and watch two structural facts
//! appear numerically: values relax toward the invariant mean, and the
//! sup norm never grows.

use gaussbv::field;
use gaussbv::mehler::{mehler_apply, pairing_gamma, MehlerRule};
use gaussbv::model::{GaussianModel, Point};

fn main() -> gaussbv::Result<()> {
    let model = GaussianModel::new(vec![1.0, 0.5])?;
    let f = field::tanh_ramp(vec![1.0, 0.0], 0.7);

    // Invariant mean ∫f dγ, by the same quadrature as the t → ∞ limit.
    let mean = pairing_gamma(&model, &f, &field::constant(2, 1.0), 5.0, 64)?;
    println!("invariant mean  {mean:+.6}");
    println!("{:>6}  {:>10}  {:>10}  {:>10}", "t", "at -1", "at 0.5", "sup probe");

    let probes = [
        Point::new(vec![-1.0, 0.3]),
        Point::new(vec![0.5, -0.2]),
        Point::new(vec![2.0, 1.0]),
    ];
    for t in [0.0, 0.1, 0.5, 1.0, 2.0, 4.0] {
        let mut vals = Vec::new();
        for x in &probes {
            let e = mehler_apply(&model, &f, t, x, MehlerRule::auto(2, 11))?;
            vals.push(e.value);
        }
        let sup = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        println!("{t:>6.2}  {:>+10.6}  {:>+10.6}  {sup:>10.6}", vals[0], vals[1]);
    }
    println!("sup-norm contraction and relaxation toward the mean, as expected");
    Ok(())
}
