use hdichotomy::checkers::{estimate_expansiveness, estimate_noncriticality, ExpansivenessConfig};
use hdichotomy::construct::{equivalence_pipeline, PipelineConfig, Verdict};
use hdichotomy::linalg::rotation2;
use hdichotomy::sphere::SphereConfig;
use hdichotomy::systems::Builtin;
use hdichotomy::{rescale_family, GrowthRate, SigmaGrid};

fn sphere() -> SphereConfig {
    SphereConfig { samples: 2_000, ..Default::default() }
}

fn cfg() -> PipelineConfig {
    PipelineConfig { sphere: sphere(), cross_check: false, ..Default::default() }
}

#[test]
fn verdicts_agree_with_the_rescaled_exponential_case() {
    let cases = [
        (Builtin::DiagHyperbolic { lambda: 1.0 }, GrowthRate::poly(), Verdict::Dichotomic),
        (Builtin::ScalarStable { lambda: 1.0 }, GrowthRate::log(), Verdict::Dichotomic),
        (Builtin::RotatedHyperbolic { lambda: 1.0, angle: 1.1 }, GrowthRate::power(0.5).unwrap(), Verdict::Dichotomic),
        (Builtin::Rotation { omega: 1.0 }, GrowthRate::power(2.0).unwrap(), Verdict::NotDichotomic),
        (Builtin::Neutral { lambda: 1.0 }, GrowthRate::poly(), Verdict::NotDichotomic),
    ];
    for (sys, rate, expected) in cases {
        // t = e^{e^σ} under ln t, so the σ-window must stay short
        let cfg = if rate.name() == "log" { PipelineConfig { span: 4.0, ..cfg() } } else { cfg() };
        let f = sys.closed_form(&rate);
        let a0_star = rate.t_of_sigma(0.0).unwrap();
        let direct = equivalence_pipeline(&f, &rate, a0_star, &cfg).unwrap();
        let fh = rescale_family(&f, &rate).unwrap();
        let via = equivalence_pipeline(&fh, &GrowthRate::exp(), rate.sigma_of_t(a0_star).unwrap(), &cfg).unwrap();
        assert_eq!(direct.verdict, expected, "{} / {}: {:?}", sys.label(), rate.name(), direct.causes);
        assert_eq!(direct.verdict, via.verdict, "{} / {}", sys.label(), rate.name());
        for (x, y) in direct.c.estimates.iter().zip(&via.c.estimates) {
            assert!((x.theta - y.theta).abs() <= 1e-9);
        }
    }
}

#[test]
fn norms_are_invariant_under_orthogonal_conjugation() {
    let rate = GrowthRate::poly();
    let grid = SigmaGrid::new(&rate, 0.0, 3.0, 0.25).unwrap();
    let ecfg = ExpansivenessConfig { sphere: sphere(), ..Default::default() };
    for sys in [Builtin::DiagHyperbolic { lambda: 0.8 }, Builtin::Neutral { lambda: 1.0 }] {
        let f = sys.closed_form(&rate);
        let g = f.conjugated(&rotation2(0.9)).unwrap();
        let (a, b) = (
            estimate_noncriticality(&f, &rate, 1.0, &grid, &sphere()).unwrap(),
            estimate_noncriticality(&g, &rate, 1.0, &grid, &sphere()).unwrap(),
        );
        assert!((a.theta - b.theta).abs() <= 1e-6 * a.theta, "{} vs {}", a.theta, b.theta);
        let (a, b) = (
            estimate_expansiveness(&f, &rate, &grid, &ecfg).unwrap(),
            estimate_expansiveness(&g, &rate, &grid, &ecfg).unwrap(),
        );
        assert!((a.l - b.l).abs() <= 1e-6 * a.l, "{} vs {}", a.l, b.l);
    }
}

#[test]
fn power_rates_trade_exponent_for_window() {
    // (t/s)^{-λp} is both "λ under t^p" and "λp under t": the same family,
    // with σ-lengths scaled by p.
    let (lambda, p) = (0.5, 2.0);
    let hp = GrowthRate::power(p).unwrap();
    let h1 = GrowthRate::poly();
    let f = Builtin::DiagHyperbolic { lambda }.closed_form(&hp);
    let g = Builtin::DiagHyperbolic { lambda: lambda * p }.closed_form(&h1);
    for (t, s) in [(1.0, 1.0), (3.0, 1.5), (1.2, 7.0)] {
        let d = (f.transition(t, s).unwrap() - g.transition(t, s).unwrap()).norm();
        assert!(d < 1e-12);
    }
    let grid_p = SigmaGrid::new(&hp, 0.0, 6.0, 0.2).unwrap();
    let grid_1 = SigmaGrid::new(&h1, 0.0, 3.0, 0.1).unwrap();
    for (a, b) in grid_p.times().iter().zip(grid_1.times()) {
        assert!((a - b).abs() <= 1e-12 * a);
    }
    let a = estimate_noncriticality(&f, &hp, 2.0, &grid_p, &sphere()).unwrap();
    let b = estimate_noncriticality(&g, &h1, 1.0, &grid_1, &sphere()).unwrap();
    assert!((a.theta - b.theta).abs() <= 1e-9, "{} vs {}", a.theta, b.theta);
}

#[test]
fn autonomous_families_ignore_grid_translation() {
    let rate = GrowthRate::exp();
    let f = Builtin::RotatedHyperbolic { lambda: 1.0, angle: 0.3 }.closed_form(&rate);
    let base = SigmaGrid::new(&rate, 0.0, 3.0, 0.25).unwrap();
    let shifted = SigmaGrid::new(&rate, 17.0, 20.0, 0.25).unwrap();
    let a = estimate_noncriticality(&f, &rate, 1.0, &base, &sphere()).unwrap();
    let b = estimate_noncriticality(&f, &rate, 1.0, &shifted, &sphere()).unwrap();
    assert!((a.theta - b.theta).abs() <= 1e-9);
}
