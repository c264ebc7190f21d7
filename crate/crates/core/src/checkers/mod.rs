//! Estimators and verifiers for h-bounded growth and decay, h-dichotomies,
//! h-expansiveness and uniform h-noncriticality.
//!
//! Every check samples transitions at the points of a [`SigmaGrid`] and
//! measures rate weights `h(t)/h(s)` as `e^{σ_t − σ_s}` from the grid's σ
//! values. A family and its rescaling therefore see the same operators and
//! the same weights on corresponding grids.

mod dichotomy;
mod expansive;
mod growth;
mod noncritical;

pub use dichotomy::{
    fit_dichotomy, verify_h_dichotomy, DichotomyConstants, DichotomyFit, DichotomyReport, ProjectionFamily,
};
pub use expansive::{estimate_expansiveness, expansive_to_noncritical, ExpansivenessConfig, ExpansivenessConstants};
pub use growth::{fit_growth_bound, GrowthBound, GrowthMode};
pub use noncritical::{estimate_noncriticality, NoncriticalDetail, NoncriticalityConstants, NONCRITICAL_MARGIN};

pub(crate) use dichotomy::{fit_from_table as dichotomy_from_table, sample_projections, verify_from_table};
pub(crate) use expansive::estimate_from_table as expansiveness_from_table;
pub(crate) use growth::fit_from_table as growth_from_table;

use rayon::prelude::*;

use crate::error::Result;
use crate::family::EvolutionFamily;
use crate::grid::SigmaGrid;
use crate::linalg::Matrix;

/// `T(t_i, t_j)` for every pair of grid points.
pub(crate) struct TransitionTable {
    n: usize,
    mats: Vec<Matrix>,
}

impl TransitionTable {
    pub(crate) fn new(family: &EvolutionFamily, grid: &SigmaGrid) -> Result<Self> {
        let n = grid.len();
        let times = grid.times();
        let mats = (0..n * n)
            .into_par_iter()
            .map(|k| family.transition(times[k / n], times[k % n]))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { n, mats })
    }

    pub(crate) fn get(&self, i: usize, j: usize) -> &Matrix {
        &self.mats[i * self.n + j]
    }
}

/// Least-squares slope and intercept of `y ≈ a + b x`.
pub(crate) fn least_squares(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Some((my - slope * mx, slope))
}
