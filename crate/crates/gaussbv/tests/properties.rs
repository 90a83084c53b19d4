//! Randomized probes of the structural invariants: the Cameron–Martin
//! algebra, convex geometry, the penalized potential, semigroup
//! contraction, estimator determinism, and check verdict arithmetic.

use gaussbv::bv::{de_giorgi_curve, BvConfig};
use gaussbv::checks::{CheckReport, TOLERANCE_FLOOR};
use gaussbv::domain::ConvexDomain;
use gaussbv::estimate::{mc_mean, Estimate};
use gaussbv::field;
use gaussbv::mehler::{mehler_apply, MehlerRule};
use gaussbv::model::{GaussianModel, HVector, Point};
use gaussbv::potential::PenalizedPotential;
use gaussbv::rng::Tag;
use gaussbv::weight::ConvexWeight;
use proptest::prelude::*;

/// Nonincreasing positive spectra in one to four dimensions.
fn spectra() -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(0.05f64..4.0, 1..=4).prop_map(|mut v| {
        v.sort_by(|a, b| b.partial_cmp(a).unwrap());
        v
    })
}

/// A convex domain compatible with dimension `d`, sized so that points
/// drawn from [-1, 1]^d land inside often enough for assume-style tests.
fn domains(d: usize) -> impl Strategy<Value = ConvexDomain> {
    let axis = proptest::collection::vec(-1.0f64..1.0, d)
        .prop_filter("axis must be well separated from zero", |a| {
            a.iter().map(|v| v * v).sum::<f64>() > 0.09
        });
    prop_oneof![
        Just(ConvexDomain::WholeSpace),
        (axis.clone(), 0.2f64..1.5)
            .prop_map(|(a, c)| ConvexDomain::HalfSpace { a, c }),
        (axis, 0.3f64..1.2)
            .prop_map(|(a, hw)| ConvexDomain::Slab { a, lo: -hw, hi: hw }),
        (0.8f64..3.0).prop_map(move |r| ConvexDomain::HBall {
            center: vec![0.0; d],
            radius: r,
        }),
        (0.8f64..3.0).prop_map(move |r| ConvexDomain::EuclideanBall {
            center: vec![0.0; d],
            radius: r,
        }),
    ]
}

fn weights(d: usize) -> impl Strategy<Value = ConvexWeight> {
    prop_oneof![
        Just(ConvexWeight::Zero),
        proptest::collection::vec(0.0f64..1.5, d)
            .prop_map(|k_diag| ConvexWeight::Quadratic { k_diag }),
        (0.0f64..1.0).prop_map(|kappa| ConvexWeight::SmoothedNorm { kappa }),
    ]
}

fn h_gap(model: &GaussianModel, x: &Point, y: &Point) -> f64 {
    let diff: Vec<f64> = x
        .coords
        .iter()
        .zip(&y.coords)
        .map(|(a, b)| a - b)
        .collect();
    model.h_norm(&HVector::new(diff))
}

proptest! {
    #[test]
    fn h_inner_is_symmetric_and_h_norm_definite(
        lams in spectra(),
        raw in proptest::collection::vec(-5.0f64..5.0, 8),
    ) {
        let model = GaussianModel::new(lams).unwrap();
        let d = model.dim();
        let h = HVector::new(raw[..d].to_vec());
        let k = HVector::new(raw[4..4 + d].to_vec());
        let hk = model.h_inner(&h, &k).unwrap();
        let kh = model.h_inner(&k, &h).unwrap();
        prop_assert!((hk - kh).abs() <= 1e-12 * (1.0 + hk.abs()));
        let n = model.h_norm(&h);
        prop_assert!(n >= 0.0);
        let zero = raw[..d].iter().all(|v| *v == 0.0);
        prop_assert_eq!(n == 0.0, zero);
    }

    #[test]
    fn spectra_must_be_positive_and_nonincreasing(
        mut lams in proptest::collection::vec(0.05f64..4.0, 2..=4),
    ) {
        lams.sort_by(|a, b| a.partial_cmp(b).unwrap());
        prop_assume!(lams[0] < lams[lams.len() - 1]);
        prop_assert!(GaussianModel::new(lams.clone()).is_err());
        let mut bad = lams;
        bad[0] = 0.0;
        prop_assert!(GaussianModel::new(bad).is_err());
    }

    #[test]
    fn contained_midpoints_stay_contained(
        (lams, dom, xs, ys) in spectra().prop_flat_map(|lams| {
            let d = lams.len();
            (
                Just(lams),
                domains(d),
                proptest::collection::vec(-1.0f64..1.0, d),
                proptest::collection::vec(-1.0f64..1.0, d),
            )
        }),
    ) {
        let model = GaussianModel::new(lams).unwrap();
        let x = Point::new(xs);
        let y = Point::new(ys);
        prop_assume!(dom.contains(&model, &x) && dom.contains(&model, &y));
        let mid = Point::new(
            x.coords
                .iter()
                .zip(&y.coords)
                .map(|(a, b)| 0.5 * (a + b))
                .collect(),
        );
        prop_assert!(dom.contains(&model, &mid));
    }

    #[test]
    fn h_distance_is_one_lipschitz_and_vanishes_inside(
        (lams, dom, xs, ys) in spectra().prop_flat_map(|lams| {
            let d = lams.len();
            (
                Just(lams),
                domains(d),
                proptest::collection::vec(-3.0f64..3.0, d),
                proptest::collection::vec(-3.0f64..3.0, d),
            )
        }),
    ) {
        let model = GaussianModel::new(lams).unwrap();
        let x = Point::new(xs);
        let y = Point::new(ys);
        let dx = dom.distance_h(&model, &x).unwrap();
        let dy = dom.distance_h(&model, &y).unwrap();
        prop_assert!(dx >= 0.0 && dy >= 0.0);
        if dom.contains(&model, &x) {
            prop_assert_eq!(dx, 0.0);
        }
        let gap = h_gap(&model, &x, &y);
        prop_assert!(
            (dx - dy).abs() <= gap + 1e-7 * (1.0 + gap),
            "distance jump {} over H gap {}",
            (dx - dy).abs(),
            gap
        );
    }

    #[test]
    fn squared_distance_gradient_is_two_lipschitz(
        (lams, dom, xs, hs) in spectra().prop_flat_map(|lams| {
            let d = lams.len();
            (
                Just(lams),
                domains(d),
                proptest::collection::vec(-3.0f64..3.0, d),
                proptest::collection::vec(-1.0f64..1.0, d),
            )
        }),
    ) {
        let model = GaussianModel::new(lams).unwrap();
        let x = Point::new(xs);
        let shifted = Point::new(
            x.coords.iter().zip(&hs).map(|(a, b)| a + b).collect(),
        );
        let g0 = dom.grad_h_dist_sq(&model, &x).unwrap();
        let g1 = dom.grad_h_dist_sq(&model, &shifted).unwrap();
        let diff = HVector::new(
            g1.coords
                .iter()
                .zip(&g0.coords)
                .map(|(a, b)| a - b)
                .collect(),
        );
        let step = h_gap(&model, &shifted, &x);
        prop_assert!(
            model.h_norm(&diff) <= 2.0 * step + 1e-6 * (1.0 + step),
            "gradient moved {} over step {}",
            model.h_norm(&diff),
            step
        );
    }

    #[test]
    fn penalty_vanishes_inside_and_never_helps(
        (lams, dom, w, xs, eps) in spectra().prop_flat_map(|lams| {
            let d = lams.len();
            (
                Just(lams),
                domains(d),
                weights(d),
                proptest::collection::vec(-3.0f64..3.0, d),
                0.01f64..2.0,
            )
        }),
    ) {
        let model = GaussianModel::new(lams).unwrap();
        let x = Point::new(xs);
        let pot = PenalizedPotential::new(w.clone(), dom.clone(), Some(eps)).unwrap();
        let phi = pot.value(&model, &x).unwrap();
        let u = w.value(&x);
        prop_assert!(phi >= u - 1e-12 * (1.0 + u.abs()));
        if dom.contains(&model, &x) {
            prop_assert!((phi - u).abs() <= 1e-12 * (1.0 + u.abs()));
        }
    }

    #[test]
    fn mehler_respects_the_sup_band(
        t in 0.0f64..3.0,
        x in -3.0f64..3.0,
        w in 0.2f64..2.0,
    ) {
        let model = GaussianModel::new(vec![1.0]).unwrap();
        let f = field::tanh_ramp(vec![1.0], w);
        let rule = MehlerRule::auto(1, 0);
        let est = mehler_apply(&model, &f, t, &Point::new(vec![x]), rule.clone()).unwrap();
        prop_assert!(est.value.abs() <= 1.0 + 1e-9);
        let at_zero = mehler_apply(&model, &f, 0.0, &Point::new(vec![x]), rule)
            .unwrap();
        prop_assert!((at_zero.value - f.value(&Point::new(vec![x]))).abs() <= 1e-12);
    }

    #[test]
    fn mc_mean_is_reproducible_and_exact_on_constants(
        n in 1u64..4096,
        seed in proptest::num::u64::ANY,
        c in -5.0f64..5.0,
    ) {
        let f = |rng: &mut rand_chacha::ChaCha8Rng, _: u64| {
            use rand::Rng;
            rng.gen::<f64>()
        };
        let a = mc_mean(n, seed, Tag::Semigroup, f);
        let b = mc_mean(n, seed, Tag::Semigroup, f);
        prop_assert_eq!(a.value.to_bits(), b.value.to_bits());
        prop_assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
        prop_assert_eq!(a.n, n);
        let k = mc_mean(n, seed, Tag::Semigroup, move |_, _| c);
        prop_assert!((k.value - c).abs() <= 1e-12 * (1.0 + c.abs()));
        prop_assert!(k.stderr <= 1e-12 * (1.0 + c.abs()));
    }

    #[test]
    fn verdicts_follow_the_tolerance_formula(
        a in -2.0f64..2.0,
        b in -2.0f64..2.0,
        sa in 0.0f64..0.5,
        sb in 0.0f64..0.5,
    ) {
        let mut lhs = Estimate::exact(a);
        lhs.stderr = sa;
        let mut rhs = Estimate::exact(b);
        rhs.stderr = sb;
        let tol = TOLERANCE_FLOOR.max(3.0 * (sa * sa + sb * sb).sqrt());
        let id = CheckReport::identity("id", lhs, rhs, 1, "prop");
        prop_assert_eq!(id.tolerance.to_bits(), tol.to_bits());
        prop_assert_eq!(id.pass, (a - b).abs() <= tol);
        let le = CheckReport::inequality("le", lhs, rhs, 1, "prop");
        prop_assert_eq!(le.residual, (a - b).max(0.0));
        prop_assert_eq!(le.pass, (a - b).max(0.0) <= tol);
        if a <= b {
            prop_assert!(le.pass);
        }
    }
}

/// The variation curve rises as t falls and the fitted limit must sit at or
/// above every resolved point of the curve, up to three standard errors.
#[test]
fn variation_curves_stay_under_their_limit() {
    let model = GaussianModel::new(vec![1.0]).unwrap();
    let potential = PenalizedPotential::unpenalized(ConvexWeight::Zero);
    let t_grid = [0.4, 0.2, 0.1, 0.05];
    for (i, width) in [0.6, 1.0, 1.4].into_iter().enumerate() {
        let u = field::tanh_ramp(vec![1.0], width);
        let cfg = BvConfig::new(1200, 16, 0.01, 900 + i as u64).unwrap();
        let v = de_giorgi_curve(&model, &potential, &u, &t_grid, &cfg).unwrap();
        for pair in v.curve.windows(2) {
            assert!(pair[1].0 < pair[0].0, "times must decrease");
        }
        for (t, est) in &v.curve {
            assert!(
                v.extrapolated.value >= est.value - 3.0 * est.stderr,
                "limit {} fell below the curve at t = {t}: {} ± {}",
                v.extrapolated.value,
                est.value,
                est.stderr
            );
        }
    }
}
