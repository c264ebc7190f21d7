use serde::{Deserialize, Serialize};

use super::{least_squares, TransitionTable};
use crate::error::Result;
use crate::family::EvolutionFamily;
use crate::grid::SigmaGrid;
use crate::linalg::operator_norm;
use crate::rate::GrowthRate;

/// Smallest exponent the fit will report.
pub const MIN_EXPONENT: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GrowthMode {
    /// `‖T(t, s)‖ ≤ K (h(t)/h(s))^μ` for `t ≥ s`.
    Growth,
    /// `‖T(t, s)‖ ≤ K (h(s)/h(t))^μ` for `t ≤ s`.
    Decay,
}

#[derive(Debug, Clone, Serialize)]
pub struct GrowthBound {
    pub mode: GrowthMode,
    #[serde(rename = "K")]
    pub k: f64,
    pub mu: f64,
    /// Largest relative excess of `‖T(t, s)‖` over the bound on the grid.
    pub max_violation: f64,
    /// Factor by which `K` was raised above the least-squares intercept.
    pub inflation: f64,
    /// All norm samples coincided; `μ = 1` by convention.
    pub degenerate: bool,
    pub samples: usize,
    pub pass: bool,
}

/// Fit `ln‖T(t, s)‖ ≤ ln K + μ |σ_t − σ_s|` over ordered grid pairs.
///
/// `μ` is the least-squares slope (raised to at least [`MIN_EXPONENT`]),
/// then `K` is the smallest constant for which the bound holds at every
/// sampled pair.
pub fn fit_growth_bound(
    family: &EvolutionFamily,
    rate: &GrowthRate,
    grid: &SigmaGrid,
    mode: GrowthMode,
) -> Result<GrowthBound> {
    grid.check_rate(rate)?;
    let table = TransitionTable::new(family, grid)?;
    fit_from_table(&table, grid, mode, family.tolerance())
}

pub(crate) fn fit_from_table(
    table: &TransitionTable,
    grid: &SigmaGrid,
    mode: GrowthMode,
    tol: f64,
) -> Result<GrowthBound> {
    let n = grid.len();
    let mut deltas = Vec::new();
    let mut logs = Vec::new();
    let mut norms = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let ordered = match mode {
                GrowthMode::Growth => i >= j,
                GrowthMode::Decay => i <= j,
            };
            if !ordered {
                continue;
            }
            let norm = operator_norm(table.get(i, j))?;
            deltas.push((grid.sigma(i) - grid.sigma(j)).abs());
            logs.push(norm.ln());
            norms.push(norm);
        }
    }
    let max_norm = norms.iter().cloned().fold(0.0, f64::max);
    let min_norm = norms.iter().cloned().fold(f64::INFINITY, f64::min);
    let (fit_x, fit_y): (Vec<f64>, Vec<f64>) =
        deltas.iter().zip(&logs).filter(|(d, _)| **d > 0.0).map(|(d, y)| (*d, *y)).unzip();
    let slope = least_squares(&fit_x, &fit_y).map(|(_, b)| b);

    let coincide = max_norm - min_norm <= 1e-12 * max_norm.max(1.0);
    let (k, mu, inflation, degenerate) = match slope {
        Some(b) if !coincide => {
            let mu = b.max(MIN_EXPONENT);
            let excess: Vec<f64> = deltas.iter().zip(&logs).map(|(d, y)| y - mu * d).collect();
            let log_k = excess.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mean = excess.iter().sum::<f64>() / excess.len() as f64;
            let k = log_k.exp().max(1.0);
            (k, mu, (k.ln() - mean).exp(), false)
        }
        _ => (max_norm.max(1.0), 1.0, 1.0, true),
    };
    let max_violation =
        deltas.iter().zip(&norms).map(|(d, norm)| (norm / (k * (mu * d).exp()) - 1.0).max(0.0)).fold(0.0, f64::max);
    Ok(GrowthBound {
        mode,
        k,
        mu,
        max_violation,
        inflation,
        degenerate,
        samples: norms.len(),
        pass: max_violation <= tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems;

    fn grid(rate: &GrowthRate) -> SigmaGrid {
        SigmaGrid::new(rate, 0.0, 3.0, 0.1).unwrap()
    }

    #[test]
    fn hyperbolic_family_has_unit_constants() {
        let h = GrowthRate::poly();
        let f = systems::diag_hyperbolic(&h, 1.0);
        for mode in [GrowthMode::Growth, GrowthMode::Decay] {
            let b = fit_growth_bound(&f, &h, &grid(&h), mode).unwrap();
            assert!((b.k - 1.0).abs() < 1e-12, "{b:?}");
            assert!((b.mu - 1.0).abs() < 1e-12);
            assert!(b.pass && !b.degenerate);
        }
    }

    #[test]
    fn isometries_use_the_degenerate_rule() {
        let h = GrowthRate::exp();
        for f in [systems::identity(&h, 2), systems::rotation(&h, 1.0)] {
            let b = fit_growth_bound(&f, &h, &grid(&h), GrowthMode::Growth).unwrap();
            assert!(b.degenerate);
            assert!((b.k - 1.0).abs() < 1e-12);
            assert_eq!(b.mu, 1.0);
            assert!(b.pass);
        }
    }

    #[test]
    fn contracting_family_gets_the_minimum_exponent() {
        let h = GrowthRate::log();
        let f = systems::scalar_stable(&h, 2.0);
        let g = fit_growth_bound(&f, &h, &grid(&h), GrowthMode::Growth).unwrap();
        assert_eq!(g.mu, MIN_EXPONENT);
        assert!((g.k - 1.0).abs() < 1e-12);
        let d = fit_growth_bound(&f, &h, &grid(&h), GrowthMode::Decay).unwrap();
        assert!((d.mu - 2.0).abs() < 1e-10);
        assert!(d.pass);
    }

    #[test]
    fn scaled_family_needs_inflation() {
        let h = GrowthRate::exp();
        let f = systems::Builtin::ScaledStable { lambda: 0.1 }.closed_form(&h);
        let b = fit_growth_bound(&f, &h, &grid(&h), GrowthMode::Growth).unwrap();
        assert!(b.k > 1.0 && b.k <= 2.0);
        assert!(b.inflation >= 1.0);
        assert!(b.max_violation <= 1e-12);
    }

    #[test]
    fn grid_for_another_rate_is_rejected() {
        let h = GrowthRate::poly();
        let f = systems::diag_hyperbolic(&h, 1.0);
        assert!(fit_growth_bound(&f, &h, &grid(&GrowthRate::exp()), GrowthMode::Growth).is_err());
    }
}
