use serde::{Deserialize, Serialize};

use super::{
    build_projections, derive_constants, stable_bound_from_table, stable_subspace, DerivedConstants, SubspacePair,
};
use crate::checkers::{
    dichotomy_from_table, estimate_noncriticality, expansive_to_noncritical, expansiveness_from_table,
    growth_from_table, sample_projections, verify_from_table, DichotomyConstants, DichotomyFit, DichotomyReport,
    ExpansivenessConfig, ExpansivenessConstants, GrowthBound, GrowthMode, NoncriticalityConstants, TransitionTable,
};
use crate::error::{Error, Result};
use crate::family::EvolutionFamily;
use crate::grid::SigmaGrid;
use crate::rate::GrowthRate;
use crate::rescale::rescale_family;
use crate::sphere::SphereConfig;

/// Slack allowed when comparing constants derived along different routes.
const CLOSURE_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Length of the σ grid, starting at `ln h(a0*)`.
    pub span: f64,
    pub step: f64,
    /// σ-horizon for the stable-subspace SVD.
    pub horizon: f64,
    pub gap_threshold: f64,
    /// Values of `C` tried for uniform noncriticality.
    pub c_values: Vec<f64>,
    /// Expansiveness exponent used when no dichotomy rate is available.
    pub beta: f64,
    /// Margin for the expansiveness-to-noncriticality formula.
    pub margin: f64,
    /// Smallest decay rate accepted as a dichotomy.
    pub min_rate: f64,
    pub divergence_slope: f64,
    pub max_window: Option<f64>,
    pub sphere: SphereConfig,
    /// Repeat the run on the rescaled family with the exponential rate.
    pub cross_check: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            span: 5.0,
            step: 0.25,
            horizon: 8.0,
            gap_threshold: 100.0,
            c_values: vec![0.5, 1.0, 2.0],
            beta: 1.0,
            margin: 0.5,
            min_rate: 1e-3,
            divergence_slope: 0.25,
            max_window: None,
            sphere: SphereConfig::default(),
            cross_check: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Dichotomic,
    NotDichotomic,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct GridSummary {
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub step: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionA {
    pub pass: bool,
    pub fit: Option<DichotomyFit>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionB {
    pub pass: bool,
    pub beta: f64,
    pub estimate: Option<ExpansivenessConstants>,
    /// `L ≤ D` when (a) holds with `β = λ`.
    pub bounded_by_d: Option<bool>,
    /// `(C, θ)` from the formula, and the estimated `θ` at that `C` when the
    /// grid reaches it.
    pub implied: Option<NoncriticalityConstants>,
    pub implied_estimate: Option<NoncriticalityConstants>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionC {
    pub pass: bool,
    pub estimates: Vec<NoncriticalityConstants>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Construction {
    pub constants: DerivedConstants,
    pub report: DichotomyReport,
    /// `K e^{μC}` from the growth bound; the measured `D` must not exceed it.
    pub growth_bound: f64,
    pub growth_bound_holds: bool,
    /// `B ≥ D` and `α ≤ λ` against the constants fitted in (a).
    pub b_covers_d: Option<bool>,
    pub alpha_within_lambda: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RescalingCheck {
    pub verdict: Verdict,
    pub agrees: bool,
    /// Largest relative difference among the compared constants.
    pub max_discrepancy: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineReport {
    pub family: String,
    pub rate: String,
    pub a0_star: f64,
    pub grid: GridSummary,
    pub growth: Option<GrowthBound>,
    pub decay: Option<GrowthBound>,
    pub subspace: Option<SubspacePair>,
    pub a: CriterionA,
    pub b: CriterionB,
    pub c: CriterionC,
    pub construction: Option<Construction>,
    pub rescaling: Option<RescalingCheck>,
    pub verdict: Verdict,
    pub causes: Vec<String>,
}

/// Run every stage of the equivalence check for `family` under `rate` on
/// `[a0*, ∞)`, sampled on a σ grid of `cfg.span` units.
///
/// Only invalid input is returned as an error; failures inside a stage are
/// recorded as causes and lead to an inconclusive verdict.
pub fn equivalence_pipeline(
    family: &EvolutionFamily,
    rate: &GrowthRate,
    a0_star: f64,
    cfg: &PipelineConfig,
) -> Result<PipelineReport> {
    if !(a0_star > family.a0()) {
        return Err(Error::Domain(format!("a0* = {a0_star} must exceed a0 = {}", family.a0())));
    }
    if cfg.c_values.is_empty() || cfg.c_values.iter().any(|c| !(*c > 0.0)) {
        return Err(Error::InvalidArgument("c_values must be nonempty and positive".into()));
    }
    let grid = SigmaGrid::from_anchor(rate, a0_star, cfg.span, cfg.step)?;
    if grid.len() < 3 {
        return Err(Error::InvalidArgument(format!("grid has only {} points", grid.len())));
    }
    let mut report = run_on_grid(family, rate, a0_star, &grid, cfg);

    if cfg.cross_check && !rate.is_exp() {
        let check = match rescale_family(family, rate).and_then(|f| {
            let inner_grid = grid.to_exponential()?;
            let inner_cfg = PipelineConfig { cross_check: false, ..cfg.clone() };
            Ok(run_on_grid(&f, &GrowthRate::exp(), grid.sigma_min(), &inner_grid, &inner_cfg))
        }) {
            Ok(inner) => {
                let agrees = inner.verdict == report.verdict;
                RescalingCheck { verdict: inner.verdict, agrees, max_discrepancy: discrepancy(&report, &inner) }
            }
            Err(e) => {
                report.causes.push(format!("rescaling cross-check failed: {e}"));
                RescalingCheck { verdict: Verdict::Inconclusive, agrees: false, max_discrepancy: f64::NAN }
            }
        };
        if !check.agrees {
            report
                .causes
                .push(format!("verdict {:?} differs from {:?} on the rescaled family", report.verdict, check.verdict));
            report.verdict = Verdict::Inconclusive;
        }
        report.rescaling = Some(check);
    }
    Ok(report)
}

fn run_on_grid(
    family: &EvolutionFamily,
    rate: &GrowthRate,
    a0_star: f64,
    grid: &SigmaGrid,
    cfg: &PipelineConfig,
) -> PipelineReport {
    let mut causes = Vec::new();
    let mut report = PipelineReport {
        family: family.name().to_string(),
        rate: rate.name().to_string(),
        a0_star,
        grid: GridSummary {
            sigma_min: grid.sigma_min(),
            sigma_max: grid.sigma_max(),
            step: grid.step(),
            points: grid.len(),
        },
        growth: None,
        decay: None,
        subspace: None,
        a: CriterionA { pass: false, fit: None },
        b: CriterionB {
            pass: false,
            beta: cfg.beta,
            estimate: None,
            bounded_by_d: None,
            implied: None,
            implied_estimate: None,
        },
        c: CriterionC { pass: false, estimates: Vec::new() },
        construction: None,
        rescaling: None,
        verdict: Verdict::Inconclusive,
        causes: Vec::new(),
    };
    let tol = family.tolerance();
    let table = match TransitionTable::new(family, grid) {
        Ok(t) => t,
        Err(e) => {
            report.causes.push(format!("sampling transitions: {e}"));
            return report;
        }
    };

    // Standing hypotheses: bounded growth and decay.
    for mode in [GrowthMode::Growth, GrowthMode::Decay] {
        match growth_from_table(&table, grid, mode, tol) {
            Ok(g) => {
                if !g.pass {
                    causes.push(format!("{mode:?} bound violated by {:.3e}", g.max_violation));
                }
                match mode {
                    GrowthMode::Growth => report.growth = Some(g),
                    GrowthMode::Decay => report.decay = Some(g),
                }
            }
            Err(e) => causes.push(format!("{mode:?} fit: {e}")),
        }
    }

    // Splitting at the anchor and the projection family.
    let anchor = grid.t(0);
    let split_at = |h: f64| stable_subspace(family, rate, anchor, h, cfg.gap_threshold);
    // slowly growing rates can push the horizon past the representable
    // times; fall back to the longest horizon that still evaluates
    let unrepresentable = |r: &Result<SubspacePair>| {
        matches!(r, Err(Error::Domain(_) | Error::Convergence(_) | Error::Numerical(_) | Error::Integration { .. }))
    };
    let mut horizon = cfg.horizon;
    let mut split = split_at(horizon);
    if unrepresentable(&split) && cfg.horizon > grid_span(grid) {
        let (mut lo, mut hi) = (grid_span(grid), cfg.horizon);
        let mut best = split_at(lo);
        if !unrepresentable(&best) {
            for _ in 0..30 {
                let mid = 0.5 * (lo + hi);
                let r = split_at(mid);
                if unrepresentable(&r) {
                    hi = mid;
                } else {
                    lo = mid;
                    best = r;
                }
            }
        }
        horizon = lo;
        split = best;
        causes.push(format!("splitting horizon reduced to {horizon:.4}"));
    }
    let projections = split
        .and_then(|pair| {
            let proj = build_projections(family, &pair, Some(grid))?;
            report.subspace = Some(pair);
            Ok(proj)
        })
        .and_then(|proj| sample_projections(&proj, grid));
    let samples = match projections {
        Ok(s) => Some(s),
        Err(e) => {
            causes.push(format!("stable subspace: {e}"));
            None
        }
    };

    // (a) h-dichotomy with fitted constants.
    if let Some(samples) = &samples {
        match dichotomy_from_table(&table, samples, grid, cfg.min_rate, tol) {
            Ok(fit) => {
                report.a.pass = fit.pass;
                if !fit.pass {
                    let rate = [fit.stable_rate, fit.unstable_rate].into_iter().flatten().fold(f64::INFINITY, f64::min);
                    causes.push(format!("(a) fails: fitted decay rate {rate:.3e}"));
                }
                report.a.fit = Some(fit);
            }
            Err(e) => causes.push(format!("(a): {e}")),
        }
    }
    let fitted = report.a.fit.as_ref().filter(|f| f.pass).map(|f| f.constants);

    // (b) h-expansiveness, with β = λ when (a) holds.
    let beta = fitted.map_or(cfg.beta, |c| c.lambda);
    report.b.beta = beta;
    let exp_cfg = ExpansivenessConfig {
        beta,
        max_window: cfg.max_window,
        divergence_slope: cfg.divergence_slope,
        sphere: cfg.sphere,
    };
    match expansiveness_from_table(&table, grid, family.dim(), &exp_cfg) {
        Ok(est) => {
            report.b.pass = est.pass();
            if let Some(c) = fitted {
                report.b.bounded_by_d = Some(est.l <= c.d + CLOSURE_SLACK);
            }
            if est.pass() {
                match expansive_to_noncritical(est.l, beta, cfg.margin) {
                    Ok(nc) => {
                        if grid.sigma_min() + nc.c <= grid.sigma_max() {
                            match estimate_noncriticality(family, rate, nc.c, grid, &cfg.sphere) {
                                Ok(e) => report.b.implied_estimate = Some(without_detail(e)),
                                Err(e) => causes.push(format!("(b)⇒(c) estimate: {e}")),
                            }
                        }
                        report.b.implied = Some(nc);
                    }
                    Err(e) => causes.push(format!("(b)⇒(c): {e}")),
                }
            } else {
                causes.push(format!("(b) fails: L grows with slope {:.3} in the window width", est.profile_slope));
            }
            report.b.estimate = Some(est);
        }
        Err(e) => causes.push(format!("(b): {e}")),
    }

    // (c) uniform h-noncriticality for each C.
    for &c in &cfg.c_values {
        match estimate_noncriticality(family, rate, c, grid, &cfg.sphere) {
            Ok(est) => report.c.estimates.push(est),
            Err(e) => causes.push(format!("(c) at C = {c}: {e}")),
        }
    }
    report.c.pass = report.c.estimates.iter().any(|e| e.pass);
    if !report.c.pass && !report.c.estimates.is_empty() {
        let best = report.c.estimates.iter().map(|e| e.theta).fold(f64::INFINITY, f64::min);
        causes.push(format!("(c) fails: θ ≥ {best:.6} at every tested C"));
    }

    // (c) ⇒ (a): constants from θ, C and the measured D, re-verified. Of the
    // passing C values, the one giving the largest rate α = −ln θ / C is used.
    let sharpest =
        report.c.estimates.iter().filter(|e| e.pass).fold(None::<&NoncriticalityConstants>, |best, e| match best {
            Some(b) if -b.theta.ln() / b.c >= -e.theta.ln() / e.c => Some(b),
            _ => Some(e),
        });
    if let (Some(samples), Some(nc)) = (&samples, sharpest) {
        let built = stable_bound_from_table(&table, &samples.p).and_then(|d| {
            let constants = derive_constants(nc.theta, nc.c, d)?;
            let verified = verify_from_table(
                &table,
                samples,
                grid,
                DichotomyConstants { d: constants.b, lambda: constants.alpha },
                tol,
            )?;
            Ok((constants, verified))
        });
        match built {
            Ok((constants, verified)) => {
                let growth_bound = report.growth.as_ref().map_or(f64::INFINITY, |g| g.k * (g.mu * nc.c).exp());
                let growth_bound_holds = constants.d <= growth_bound * (1.0 + tol);
                if !growth_bound_holds {
                    causes.push(format!("measured D = {} exceeds K e^(μC) = {growth_bound}", constants.d));
                }
                if !verified.pass {
                    causes.push("constructed constants do not re-verify".into());
                }
                report.construction = Some(Construction {
                    constants,
                    report: verified,
                    growth_bound,
                    growth_bound_holds,
                    b_covers_d: fitted.map(|f| constants.b >= f.d - CLOSURE_SLACK),
                    alpha_within_lambda: fitted
                        .map(|f| constants.alpha > 0.0 && constants.alpha <= f.lambda + CLOSURE_SLACK),
                });
            }
            Err(e) => causes.push(format!("construction: {e}")),
        }
    }

    let constructed = report.construction.as_ref().is_some_and(|c| c.report.pass);
    report.verdict = if report.a.pass && report.b.pass && report.c.pass && constructed {
        Verdict::Dichotomic
    } else if !report.a.pass && !report.c.pass {
        Verdict::NotDichotomic
    } else {
        causes.push(format!(
            "criteria disagree: (a) {}, (b) {}, (c) {}, construction {}",
            report.a.pass, report.b.pass, report.c.pass, constructed
        ));
        Verdict::Inconclusive
    };
    report.causes = causes;
    report
}

fn grid_span(grid: &SigmaGrid) -> f64 {
    grid.sigma_max() - grid.sigma_min()
}

fn without_detail(mut c: NoncriticalityConstants) -> NoncriticalityConstants {
    c.detail = None;
    c
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
    }
}

/// Largest relative difference between the constants of two runs.
fn discrepancy(x: &PipelineReport, y: &PipelineReport) -> f64 {
    let mut pairs: Vec<(f64, f64)> = Vec::new();
    for (g, h) in [(&x.growth, &y.growth), (&x.decay, &y.decay)] {
        if let (Some(g), Some(h)) = (g, h) {
            pairs.push((g.k, h.k));
            pairs.push((g.mu, h.mu));
        }
    }
    if let (Some(f), Some(g)) = (&x.a.fit, &y.a.fit) {
        pairs.push((f.constants.d, g.constants.d));
        pairs.push((f.constants.lambda, g.constants.lambda));
    }
    if let (Some(e), Some(f)) = (&x.b.estimate, &y.b.estimate) {
        pairs.push((e.l, f.l));
    }
    for (e, f) in x.c.estimates.iter().zip(&y.c.estimates) {
        pairs.push((e.theta, f.theta));
    }
    if let (Some(c), Some(d)) = (&x.construction, &y.construction) {
        pairs.push((c.constants.b, d.constants.b));
        pairs.push((c.constants.alpha, d.constants.alpha));
    }
    pairs.iter().map(|&(a, b)| rel(a, b)).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems;

    fn cfg() -> PipelineConfig {
        PipelineConfig { sphere: SphereConfig { samples: 500, ..Default::default() }, ..Default::default() }
    }

    #[test]
    fn hyperbolic_poly_is_dichotomic() {
        let h = GrowthRate::poly();
        let f = systems::diag_hyperbolic(&h, 1.0);
        let r = equivalence_pipeline(&f, &h, 1.0, &cfg()).unwrap();
        assert_eq!(r.verdict, Verdict::Dichotomic, "{:?}", r.causes);
        let c = r.construction.unwrap();
        assert!(c.report.pass);
        assert!(c.b_covers_d.unwrap() && c.alpha_within_lambda.unwrap());
        assert!((r.a.fit.unwrap().constants.lambda - 1.0).abs() < 1e-9);
        let check = r.rescaling.unwrap();
        assert!(check.agrees);
        assert_eq!(check.max_discrepancy, 0.0);
    }

    #[test]
    fn rotation_is_not_dichotomic() {
        let h = GrowthRate::exp();
        let f = systems::rotation(&h, 1.0);
        let r = equivalence_pipeline(&f, &h, 0.0, &cfg()).unwrap();
        assert_eq!(r.verdict, Verdict::NotDichotomic);
        assert!(r.c.estimates.iter().all(|e| e.theta >= 1.0 - 1e-12));
        assert!(r.causes.iter().any(|c| c.contains("no singular-value gap")), "{:?}", r.causes);
    }

    #[test]
    fn neutral_direction_is_not_dichotomic() {
        let h = GrowthRate::log();
        let f = systems::neutral(&h, 1.0);
        let r = equivalence_pipeline(&f, &h, std::f64::consts::E, &cfg()).unwrap();
        assert_eq!(r.verdict, Verdict::NotDichotomic, "{:?}", r.causes);
        assert!(r.growth.unwrap().pass && r.decay.unwrap().pass);
        assert_eq!(r.subspace.unwrap().stable_dim(), 1);
    }

    #[test]
    fn bad_anchor() {
        let h = GrowthRate::poly();
        let f = systems::diag_hyperbolic(&h, 1.0);
        assert!(matches!(equivalence_pipeline(&f, &h, 0.0, &cfg()), Err(Error::Domain(_))));
    }
}
