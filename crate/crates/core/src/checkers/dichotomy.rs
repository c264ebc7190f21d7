use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{least_squares, TransitionTable};
use crate::error::{Error, Result};
use crate::family::EvolutionFamily;
use crate::grid::SigmaGrid;
use crate::linalg::{self, operator_norm, Matrix};
use crate::rate::GrowthRate;

/// Tolerance on `‖P² − P‖` (relative to `‖P‖`).
pub const IDEMPOTENCE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DichotomyConstants {
    #[serde(rename = "D")]
    pub d: f64,
    pub lambda: f64,
}

#[derive(Clone)]
enum ProjRepr {
    Constant(Matrix),
    /// `P(t) = T(t, anchor) P(anchor) T(anchor, t)`.
    Propagated {
        family: EvolutionFamily,
        anchor: f64,
        at_anchor: Matrix,
    },
    Function(Arc<dyn Fn(f64) -> Matrix + Send + Sync>),
}

/// A time-indexed family of projections `P(t)`.
#[derive(Clone)]
pub struct ProjectionFamily {
    dim: usize,
    rank: usize,
    repr: ProjRepr,
}

impl fmt::Debug for ProjectionFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.repr {
            ProjRepr::Constant(_) => "constant",
            ProjRepr::Propagated { .. } => "propagated",
            ProjRepr::Function(_) => "function",
        };
        f.debug_struct("ProjectionFamily")
            .field("dim", &self.dim)
            .field("rank", &self.rank)
            .field("kind", &kind)
            .finish()
    }
}

fn check_projection(p: &Matrix) -> Result<usize> {
    if p.nrows() != p.ncols() {
        return Err(Error::InvalidArgument("projection must be square".into()));
    }
    let defect = (p * p - p).norm() / p.norm().max(1.0);
    if !(defect <= IDEMPOTENCE_TOL) {
        return Err(Error::InvalidArgument(format!("matrix is not a projection (‖P²−P‖ = {defect:.2e})")));
    }
    linalg::projection_rank(p)
}

impl ProjectionFamily {
    /// `P(t) ≡ p`.
    pub fn constant(p: Matrix) -> Result<Self> {
        let rank = check_projection(&p)?;
        Ok(Self { dim: p.nrows(), rank, repr: ProjRepr::Constant(p) })
    }

    /// Projections transported along the flow from `P(anchor) = at_anchor`,
    /// which makes `P(t) T(t, s) = T(t, s) P(s)` hold by construction.
    pub fn propagated(family: &EvolutionFamily, anchor: f64, at_anchor: Matrix) -> Result<Self> {
        let rank = check_projection(&at_anchor)?;
        if at_anchor.nrows() != family.dim() {
            return Err(Error::InvalidArgument("projection and family dimensions differ".into()));
        }
        Ok(Self { dim: family.dim(), rank, repr: ProjRepr::Propagated { family: family.clone(), anchor, at_anchor } })
    }

    /// An arbitrary map `t ↦ P(t)`; the rank is read off at `reference`.
    pub fn from_fn<F>(dim: usize, reference: f64, f: F) -> Result<Self>
    where
        F: Fn(f64) -> Matrix + Send + Sync + 'static,
    {
        let p0 = f(reference);
        if p0.nrows() != dim {
            return Err(Error::InvalidArgument("projection has the wrong dimension".into()));
        }
        let rank = check_projection(&p0)?;
        Ok(Self { dim, rank, repr: ProjRepr::Function(Arc::new(f)) })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn at(&self, t: f64) -> Result<Matrix> {
        match &self.repr {
            ProjRepr::Constant(p) => Ok(p.clone()),
            ProjRepr::Propagated { family, anchor, at_anchor } => {
                Ok(family.transition(t, *anchor)? * at_anchor * family.transition(*anchor, t)?)
            }
            ProjRepr::Function(f) => Ok(f(t)),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DichotomyReport {
    pub constants: DichotomyConstants,
    pub rank: usize,
    pub max_idempotence_defect: f64,
    /// `max ‖P(t)T(t,s) − T(t,s)P(s)‖ / max(1, ‖T(t,s)‖)` over `t ≥ s`.
    pub max_violation_invariance: f64,
    /// Largest relative excess of `‖T(t,s)P(s)‖` over `D e^{−λ(σ_t−σ_s)}`, `t ≥ s`.
    pub max_violation_stable: f64,
    /// Largest relative excess of `‖T(t,s)(Id−P(s))‖` over `D e^{−λ(σ_s−σ_t)}`, `t ≤ s`.
    pub max_violation_unstable: f64,
    pub tolerance: f64,
    pub pass: bool,
}

pub(crate) struct ProjectionSamples {
    pub(crate) p: Vec<Matrix>,
    pub(crate) rank: usize,
    pub(crate) idempotence: f64,
}

pub(crate) fn sample_projections(proj: &ProjectionFamily, grid: &SigmaGrid) -> Result<ProjectionSamples> {
    let p = grid.times().iter().map(|&t| proj.at(t)).collect::<Result<Vec<_>>>()?;
    let ranks = p.iter().map(linalg::projection_rank).collect::<Result<Vec<_>>>()?;
    let (min, max) = (*ranks.iter().min().unwrap_or(&0), *ranks.iter().max().unwrap_or(&0));
    if min != max {
        return Err(Error::Rank { min, max });
    }
    let idempotence = p.iter().map(|m| (m * m - m).norm() / m.norm().max(1.0)).fold(0.0, f64::max);
    Ok(ProjectionSamples { p, rank: min, idempotence })
}

/// Check the invariance identity and both dichotomy bounds on every ordered
/// pair of grid points. Backward transitions restricted to `ker P(s)` are
/// realized as the global inverse composed with `Id − P(s)`.
pub fn verify_h_dichotomy(
    family: &EvolutionFamily,
    rate: &GrowthRate,
    proj: &ProjectionFamily,
    constants: DichotomyConstants,
    grid: &SigmaGrid,
) -> Result<DichotomyReport> {
    grid.check_rate(rate)?;
    if !(constants.d > 0.0 && constants.lambda > 0.0) {
        return Err(Error::InvalidArgument(format!("dichotomy constants must be positive: {constants:?}")));
    }
    let table = TransitionTable::new(family, grid)?;
    let samples = sample_projections(proj, grid)?;
    verify_from_table(&table, &samples, grid, constants, family.tolerance())
}

pub(crate) fn verify_from_table(
    table: &TransitionTable,
    samples: &ProjectionSamples,
    grid: &SigmaGrid,
    constants: DichotomyConstants,
    tol: f64,
) -> Result<DichotomyReport> {
    let n = grid.len();
    let dim = samples.p.first().map(|p| p.nrows()).unwrap_or(0);
    let id = Matrix::identity(dim, dim);
    let (mut inv, mut stable, mut unstable) = (0.0_f64, 0.0_f64, 0.0_f64);
    for i in 0..n {
        for j in 0..n {
            let t_ij = table.get(i, j);
            let delta = (grid.sigma(i) - grid.sigma(j)).abs();
            let bound = constants.d * (-constants.lambda * delta).exp();
            if i >= j {
                let comm = (&samples.p[i] * t_ij - t_ij * &samples.p[j]).norm();
                inv = inv.max(comm / operator_norm(t_ij)?.max(1.0));
                let norm = operator_norm(&(t_ij * &samples.p[j]))?;
                stable = stable.max(norm / bound - 1.0);
            }
            if i <= j {
                let norm = operator_norm(&(t_ij * (&id - &samples.p[j])))?;
                unstable = unstable.max(norm / bound - 1.0);
            }
        }
    }
    let (stable, unstable) = (stable.max(0.0), unstable.max(0.0));
    let pass = inv <= tol && stable <= tol && unstable <= tol && samples.idempotence <= IDEMPOTENCE_TOL;
    Ok(DichotomyReport {
        constants,
        rank: samples.rank,
        max_idempotence_defect: samples.idempotence,
        max_violation_invariance: inv,
        max_violation_stable: stable,
        max_violation_unstable: unstable,
        tolerance: tol,
        pass,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DichotomyFit {
    pub constants: DichotomyConstants,
    /// Least-squares decay rate of `‖T(t,s)P(s)‖`; `None` when `P = 0`.
    pub stable_rate: Option<f64>,
    /// Least-squares decay rate of `‖T(t,s)(Id−P(s))‖` backward; `None` when `P = Id`.
    pub unstable_rate: Option<f64>,
    pub report: DichotomyReport,
    pub pass: bool,
}

/// Estimate `(D, λ)` for a given projection family: `λ` is the smaller of
/// the two fitted decay rates, then `D` is the least constant making both
/// bounds hold on the grid. Passes when `λ ≥ min_rate` and the bounds verify.
pub fn fit_dichotomy(
    family: &EvolutionFamily,
    rate: &GrowthRate,
    proj: &ProjectionFamily,
    grid: &SigmaGrid,
    min_rate: f64,
) -> Result<DichotomyFit> {
    grid.check_rate(rate)?;
    let table = TransitionTable::new(family, grid)?;
    let samples = sample_projections(proj, grid)?;
    fit_from_table(&table, &samples, grid, min_rate, family.tolerance())
}

pub(crate) fn fit_from_table(
    table: &TransitionTable,
    samples: &ProjectionSamples,
    grid: &SigmaGrid,
    min_rate: f64,
    tol: f64,
) -> Result<DichotomyFit> {
    let n = grid.len();
    let dim = samples.p.first().map(|p| p.nrows()).unwrap_or(0);
    let id = Matrix::identity(dim, dim);
    // (Δ, ‖·‖) for the stable and unstable parts
    let mut st = Vec::new();
    let mut un = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let t_ij = table.get(i, j);
            let delta = (grid.sigma(i) - grid.sigma(j)).abs();
            if i >= j && samples.rank > 0 {
                st.push((delta, operator_norm(&(t_ij * &samples.p[j]))?));
            }
            if i <= j && samples.rank < dim {
                un.push((delta, operator_norm(&(t_ij * (&id - &samples.p[j])))?));
            }
        }
    }
    let rate_of = |pts: &[(f64, f64)]| -> Option<f64> {
        let (x, y): (Vec<f64>, Vec<f64>) =
            pts.iter().filter(|(d, v)| *d > 0.0 && *v > 0.0).map(|(d, v)| (*d, v.ln())).unzip();
        least_squares(&x, &y).map(|(_, b)| -b)
    };
    let stable_rate = rate_of(&st);
    let unstable_rate = rate_of(&un);
    let raw = match (stable_rate, unstable_rate) {
        (Some(a), Some(b)) => a.min(b),
        (Some(a), None) | (None, Some(a)) => a,
        (None, None) => 0.0,
    };
    let lambda = raw.max(min_rate);
    let d = st.iter().chain(&un).map(|(delta, v)| v * (lambda * delta).exp()).fold(1.0_f64, f64::max);
    let constants = DichotomyConstants { d, lambda };
    let report = verify_from_table(table, samples, grid, constants, tol)?;
    let pass = raw >= min_rate && report.pass;
    Ok(DichotomyFit { constants, stable_rate, unstable_rate, report, pass })
}
