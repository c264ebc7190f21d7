use hdichotomy::checkers::{expansive_to_noncritical, fit_growth_bound, GrowthMode};
use hdichotomy::construct::{build_projections, derive_constants, stable_subspace};
use hdichotomy::linalg::{operator_norm, principal_angle, right_singular_pairs, rotation2, Matrix};
use hdichotomy::sphere::{minimize, SphereConfig, SphereObjective, SphereSamples};
use hdichotomy::systems::Builtin;
use hdichotomy::{make_ode_family, rescale_family, GrowthRate, SigmaGrid};
use proptest::prelude::*;

fn rate_strategy() -> impl Strategy<Value = GrowthRate> {
    prop_oneof![
        Just(GrowthRate::exp()),
        Just(GrowthRate::poly()),
        Just(GrowthRate::log()),
        (0.25f64..4.0).prop_map(|p| GrowthRate::power(p).unwrap()),
        Just(GrowthRate::custom("t+t^3", 0.0, |t| t + t * t * t)),
    ]
}

fn system_strategy() -> impl Strategy<Value = Builtin> {
    prop_oneof![
        (0.1f64..2.0).prop_map(|lambda| Builtin::ScalarStable { lambda }),
        (0.1f64..2.0).prop_map(|lambda| Builtin::DiagHyperbolic { lambda }),
        (0.1f64..2.0).prop_map(|lambda| Builtin::Neutral { lambda }),
        (0.1f64..3.0).prop_map(|omega| Builtin::Rotation { omega }),
        (0.1f64..2.0, -3.0f64..3.0).prop_map(|(lambda, angle)| Builtin::RotatedHyperbolic { lambda, angle }),
        (0.1f64..2.0).prop_map(|lambda| Builtin::ScaledStable { lambda }),
    ]
}

/// ‖Mv‖ on the sphere; its minimum is the smallest singular value of `M`.
struct Stretch(Matrix);

impl SphereObjective for Stretch {
    fn value(&self, v: &[f64]) -> f64 {
        (&self.0 * Matrix::from_column_slice(v.len(), 1, v)).norm()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rates_are_increasing_and_invertible(rate in rate_strategy(), s in -2.0f64..3.0, ds in 1e-3f64..1.0) {
        let t0 = rate.t_of_sigma(s).unwrap();
        let t1 = rate.t_of_sigma(s + ds).unwrap();
        prop_assert!(t1 > t0 && t0 > rate.a0());
        prop_assert!(rate.eval(t1).unwrap() > rate.eval(t0).unwrap());
        let back = rate.sigma_of_t(t0).unwrap();
        prop_assert!((back - s).abs() <= 1e-12 * s.abs().max(1.0), "{} at σ={s}: {back}", rate.name());
    }

    #[test]
    fn closed_forms_satisfy_the_cocycle_law(
        sys in system_strategy(),
        rate in rate_strategy(),
        s in proptest::array::uniform3(0.0f64..2.5),
    ) {
        let f = sys.closed_form(&rate);
        let [t, u, r] = s.map(|x| rate.t_of_sigma(x).unwrap());
        let lhs = f.transition(t, u).unwrap() * f.transition(u, r).unwrap();
        let rhs = f.transition(t, r).unwrap();
        let scale = operator_norm(&rhs).unwrap().max(1.0);
        prop_assert!((&lhs - &rhs).norm() <= 1e-10 * scale * operator_norm(&lhs).unwrap().max(1.0));
        prop_assert_eq!(f.transition(t, t).unwrap(), Matrix::identity(f.dim(), f.dim()));
    }

    #[test]
    fn rescaling_recovers_the_family(sys in system_strategy(), rate in rate_strategy(), a in 0.0f64..3.0, b in 0.0f64..3.0) {
        let f = sys.closed_form(&rate);
        let fh = rescale_family(&f, &rate).unwrap();
        let (t, s) = (rate.t_of_sigma(a).unwrap(), rate.t_of_sigma(b).unwrap());
        let direct = f.transition(t, s).unwrap();
        let via = fh.transition(rate.sigma_of_t(t).unwrap(), rate.sigma_of_t(s).unwrap()).unwrap();
        prop_assert!((&direct - &via).norm() <= 1e-12 * operator_norm(&direct).unwrap().max(1.0));
    }

    #[test]
    fn refinement_never_worsens_and_never_undershoots(entries in proptest::collection::vec(-2.0f64..2.0, 9), seed in 0u64..1000) {
        let m = Matrix::from_row_slice(3, 3, &entries);
        let cfg = SphereConfig { samples: 300, restarts: 4, seed };
        let min = minimize(&Stretch(m.clone()), &SphereSamples::new(3, &cfg), &cfg);
        let (sv, _) = right_singular_pairs(&m).unwrap();
        prop_assert!(min.value <= min.sampled);
        prop_assert!(min.value >= sv[0] - 1e-12);
        let v = Matrix::from_column_slice(3, 1, &min.argmin);
        prop_assert!((v.norm() - 1.0).abs() < 1e-12);
        prop_assert!(((&m * v).norm() - min.value).abs() < 1e-12);
    }

    #[test]
    fn expansiveness_formula_lands_on_the_margin(l in 0.5f64..1e3, beta in 0.05f64..5.0, margin in 0.01f64..0.99) {
        let nc = expansive_to_noncritical(l, beta, margin).unwrap();
        prop_assert!((nc.theta - (1.0 - margin)).abs() < 1e-12);
        prop_assert!((nc.c * beta - (2.0 * l / (1.0 - margin)).ln()).abs() < 1e-12);
    }

    #[test]
    fn derived_rate_is_positive_below_one(theta in 1e-6f64..0.999_999, c in 0.01f64..10.0, d in 1.0f64..100.0) {
        let k = derive_constants(theta, c, d).unwrap();
        prop_assert!(k.alpha > 0.0);
        prop_assert!((k.b * theta - d).abs() <= 1e-12 * d);
        prop_assert!((k.alpha * c + theta.ln()).abs() < 1e-12);
    }

    #[test]
    fn growth_bound_holds_on_its_grid(sys in system_strategy(), rate in rate_strategy()) {
        let grid = SigmaGrid::new(&rate, 0.0, 2.0, 0.25).unwrap();
        let f = sys.closed_form(&rate);
        for mode in [GrowthMode::Growth, GrowthMode::Decay] {
            let b = fit_growth_bound(&f, &rate, &grid, mode).unwrap();
            prop_assert!(b.pass && b.k >= 1.0 && b.mu > 0.0, "{b:?}");
        }
    }

    #[test]
    fn projections_are_conjugation_covariant(angle in -3.0f64..3.0, lambda in 0.5f64..2.0) {
        let rate = GrowthRate::exp();
        let base = Builtin::DiagHyperbolic { lambda }.closed_form(&rate);
        let r = rotation2(angle);
        let rotated = base.conjugated(&r).unwrap();
        let p = build_projections(&base, &stable_subspace(&base, &rate, 0.0, 8.0, 100.0).unwrap(), None).unwrap();
        let q = build_projections(&rotated, &stable_subspace(&rotated, &rate, 0.0, 8.0, 100.0).unwrap(), None).unwrap();
        for t in [0.0, 0.7, 2.5] {
            let expect = &r * p.at(t).unwrap() * r.transpose();
            prop_assert!((q.at(t).unwrap() - expect).norm() <= 1e-9);
        }
    }

    #[test]
    fn doubling_the_horizon_keeps_the_stable_subspace(
        lambda in 0.6f64..2.0,
        angle in -1.5f64..1.5,
        rate in prop_oneof![Just(GrowthRate::exp()), Just(GrowthRate::poly())],
    ) {
        let f = Builtin::RotatedHyperbolic { lambda, angle }.closed_form(&rate);
        let anchor = rate.t_of_sigma(0.0).unwrap();
        let a = stable_subspace(&f, &rate, anchor, 8.0, 100.0).unwrap();
        let b = stable_subspace(&f, &rate, anchor, 16.0, 100.0).unwrap();
        prop_assert!(principal_angle(&a.s_basis, &b.s_basis).unwrap() <= 1e-6);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn integrated_families_satisfy_the_cocycle_law(s in proptest::array::uniform3(-2.0f64..3.0), omega in 0.2f64..2.0) {
        let f = make_ode_family("forced", 2, f64::NEG_INFINITY, 1e-3, move |t: f64| {
            Matrix::from_row_slice(2, 2, &[-0.5, omega, -omega, 0.3 * t.sin()])
        })
        .unwrap();
        let [t, u, r] = s;
        let lhs = f.transition(t, u).unwrap() * f.transition(u, r).unwrap();
        let rhs = f.transition(t, r).unwrap();
        prop_assert!((&lhs - &rhs).norm() <= 1e-9 * operator_norm(&rhs).unwrap().max(1.0));
        prop_assert!((f.transition(t, t).unwrap() - Matrix::identity(2, 2)).norm() <= 1e-12);
    }
}
