//! Constructive route from uniform noncriticality to a dichotomy.
//!
//! The stable subspace at the anchor is read off from the singular-value
//! gap of a long-horizon transition matrix; its orthogonal complement serves
//! as `Z`. Projections onto `S(t)` along `Z(t) = T(t, a0*) Z` are obtained by
//! transporting the anchor projection along the flow, and the dichotomy
//! constants follow from `B = D/θ`, `α = −ln θ / C`.

mod pipeline;

pub use pipeline::{
    equivalence_pipeline, Construction, CriterionA, CriterionB, CriterionC, PipelineConfig, PipelineReport,
    RescalingCheck, Verdict,
};

use serde::Serialize;

use crate::checkers::{ProjectionFamily, TransitionTable};
use crate::error::{Error, Result};
use crate::family::EvolutionFamily;
use crate::grid::SigmaGrid;
use crate::linalg::{self, operator_norm, serialize_rows, Matrix};
use crate::rate::GrowthRate;

/// Projections with norm above this on the grid are rejected.
pub const MAX_PROJECTION_NORM: f64 = 1e6;
/// Largest admissible condition number of `[S | Z]`.
pub const MAX_SPLIT_CONDITION: f64 = 1e3;

#[derive(Debug, Clone, Serialize)]
pub struct SubspacePair {
    /// Orthonormal basis of the stable directions at the anchor, `n × k`.
    #[serde(serialize_with = "serialize_rows")]
    pub s_basis: Matrix,
    /// Orthonormal basis of the complement, `n × (n − k)`.
    #[serde(serialize_with = "serialize_rows")]
    pub z_basis: Matrix,
    pub anchor: f64,
    /// (largest small singular value) / (smallest large singular value).
    pub gap_ratio: f64,
    /// Singular values of `T(t_end, anchor)`, ascending.
    pub singular_values: Vec<f64>,
    pub condition: f64,
}

impl SubspacePair {
    pub fn stable_dim(&self) -> usize {
        self.s_basis.ncols()
    }

    /// Projection onto `S` along `Z`.
    pub fn projection(&self) -> Result<Matrix> {
        let n = self.s_basis.nrows();
        let k = self.stable_dim();
        let mut w = Matrix::zeros(n, n);
        w.columns_mut(0, k).copy_from(&self.s_basis);
        w.columns_mut(k, n - k).copy_from(&self.z_basis);
        let mut sel = Matrix::zeros(n, n);
        for i in 0..k {
            sel[(i, i)] = 1.0;
        }
        Ok(&w * sel * linalg::inverse(&w)?)
    }
}

/// Split ℝⁿ at the anchor by the singular values of `T(t_end, anchor)`,
/// where `ln h(t_end) = ln h(anchor) + horizon_sigma`.
///
/// The split is placed at the largest ratio between consecutive singular
/// values, with the unit level acting as a virtual neighbour at both ends
/// (so a uniformly contracting family has `S = ℝⁿ`). The right singular
/// vectors below the split span `S`, the rest span `Z`.
pub fn stable_subspace(
    family: &EvolutionFamily,
    rate: &GrowthRate,
    anchor: f64,
    horizon_sigma: f64,
    gap_threshold: f64,
) -> Result<SubspacePair> {
    if !(horizon_sigma > 0.0) || !(gap_threshold > 1.0) {
        return Err(Error::InvalidArgument(format!(
            "need horizon > 0 and gap threshold > 1, got {horizon_sigma} and {gap_threshold}"
        )));
    }
    let t_end = rate.t_of_sigma(rate.sigma_of_t(anchor)? + horizon_sigma)?;
    let m = family.transition(t_end, anchor)?;
    let (sv, vecs) = linalg::right_singular_pairs(&m)?;
    let n = sv.len();
    let gap = |k: usize| -> f64 {
        let below = if k == 0 { 1.0 } else { sv[k - 1] };
        let above = if k == n { 1.0 } else { sv[k] };
        above / below
    };
    let mut best_k = 0;
    for k in 1..=n {
        if gap(k) > gap(best_k) {
            best_k = k;
        }
    }
    let best = gap(best_k);
    if !(best >= gap_threshold) {
        return Err(Error::NoGap { threshold: gap_threshold, best });
    }
    let s_basis = vecs.columns(0, best_k).into_owned();
    let z_basis = vecs.columns(best_k, n - best_k).into_owned();
    let mut w = Matrix::zeros(n, n);
    w.columns_mut(0, best_k).copy_from(&s_basis);
    w.columns_mut(best_k, n - best_k).copy_from(&z_basis);
    let (wsv, _) = linalg::right_singular_pairs(&w)?;
    let condition = wsv[n - 1] / wsv[0];
    if !(condition <= MAX_SPLIT_CONDITION) {
        return Err(Error::Numerical(format!("split basis has condition number {condition:.3e}")));
    }
    Ok(SubspacePair { s_basis, z_basis, anchor, gap_ratio: 1.0 / best, singular_values: sv, condition })
}

/// Dichotomy projections `P(t) = T(t, a0*) P(a0*) T(a0*, t)`, checked for
/// conditioning on `grid` when one is given.
pub fn build_projections(
    family: &EvolutionFamily,
    pair: &SubspacePair,
    grid: Option<&SigmaGrid>,
) -> Result<ProjectionFamily> {
    let proj = ProjectionFamily::propagated(family, pair.anchor, pair.projection()?)?;
    if let Some(grid) = grid {
        for &t in grid.times() {
            let norm = operator_norm(&proj.at(t)?)?;
            if !(norm <= MAX_PROJECTION_NORM) {
                return Err(Error::Conditioning { t, norm });
            }
        }
    }
    Ok(proj)
}

/// `D = max(1, max_{t ≥ s} ‖T(t, s)P(s)‖)` over grid pairs.
pub fn uniform_stable_bound(family: &EvolutionFamily, proj: &ProjectionFamily, grid: &SigmaGrid) -> Result<f64> {
    let table = TransitionTable::new(family, grid)?;
    let p = grid.times().iter().map(|&t| proj.at(t)).collect::<Result<Vec<_>>>()?;
    stable_bound_from_table(&table, &p)
}

pub(crate) fn stable_bound_from_table(table: &TransitionTable, p: &[Matrix]) -> Result<f64> {
    let mut d = 1.0_f64;
    for i in 0..p.len() {
        for (j, pj) in p.iter().enumerate().take(i + 1) {
            d = d.max(operator_norm(&(table.get(i, j) * pj))?);
        }
    }
    Ok(d)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedConstants {
    #[serde(rename = "B")]
    pub b: f64,
    pub alpha: f64,
    pub theta: f64,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "D")]
    pub d: f64,
}

/// `B = θ⁻¹ D` and `α = −C⁻¹ ln θ`.
pub fn derive_constants(theta: f64, c: f64, d: f64) -> Result<DerivedConstants> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::Range(format!("θ must lie in (0, 1), got {theta}")));
    }
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::Range(format!("C must be positive, got {c}")));
    }
    if !(d >= 1.0) || !d.is_finite() {
        return Err(Error::Range(format!("D must be at least 1, got {d}")));
    }
    Ok(DerivedConstants { b: d / theta, alpha: -theta.ln() / c, theta, c, d })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{self, Builtin};
    use nalgebra::DVector;

    fn diag(v: &[f64]) -> Matrix {
        Matrix::from_diagonal(&DVector::from_column_slice(v))
    }

    #[test]
    fn hyperbolic_split() {
        let h = GrowthRate::poly();
        let f = systems::diag_hyperbolic(&h, 1.0);
        let pair = stable_subspace(&f, &h, 1.0, 5.0, 10.0).unwrap();
        assert_eq!(pair.stable_dim(), 1);
        assert!((pair.s_basis[(0, 0)].abs() - 1.0).abs() < 1e-12);
        assert!((pair.z_basis[(1, 0)].abs() - 1.0).abs() < 1e-12);
        assert!((pair.gap_ratio - (-10.0f64).exp()).abs() < 1e-12 * (-10.0f64).exp());
        let p = build_projections(&f, &pair, None).unwrap();
        for t in [1.0, 3.0, 40.0] {
            assert!((p.at(t).unwrap() - diag(&[1.0, 0.0])).norm() < 1e-12);
        }
    }

    #[test]
    fn contracting_scalar_is_all_stable() {
        let h = GrowthRate::exp();
        let f = systems::scalar_stable(&h, 1.0);
        let pair = stable_subspace(&f, &h, 0.0, 5.0, 10.0).unwrap();
        assert_eq!(pair.stable_dim(), 1);
        assert_eq!(pair.z_basis.ncols(), 0);
        let p = build_projections(&f, &pair, None).unwrap();
        assert!((p.at(2.0).unwrap() - Matrix::identity(1, 1)).norm() < 1e-12);
    }

    #[test]
    fn rotation_has_no_gap() {
        let h = GrowthRate::exp();
        let f = systems::rotation(&h, 1.0);
        assert!(matches!(stable_subspace(&f, &h, 0.0, 5.0, 10.0), Err(Error::NoGap { .. })));
    }

    #[test]
    fn rotated_coordinates() {
        let h = GrowthRate::exp();
        let angle = 0.7;
        let f = Builtin::RotatedHyperbolic { lambda: 1.0, angle }.closed_form(&h);
        let pair = stable_subspace(&f, &h, 0.0, 8.0, 100.0).unwrap();
        let r = linalg::rotation2(angle);
        let expect = &r * diag(&[1.0, 0.0]) * r.transpose();
        let p = build_projections(&f, &pair, None).unwrap();
        for t in [0.0, 1.5, 4.0] {
            assert!((p.at(t).unwrap() - &expect).norm() < 1e-9);
        }
    }

    #[test]
    fn stable_bound_values() {
        let h = GrowthRate::exp();
        let grid = SigmaGrid::new(&h, 0.0, 3.0, 0.1).unwrap();
        let f = systems::diag_hyperbolic(&h, 1.0);
        let p = ProjectionFamily::constant(diag(&[1.0, 0.0])).unwrap();
        assert!((uniform_stable_bound(&f, &p, &grid).unwrap() - 1.0).abs() < 1e-15);

        let g = |t: f64| 1.5 + 0.5 * t.sin();
        let f = Builtin::ScaledStable { lambda: 1.0 }.closed_form(&h);
        let id = ProjectionFamily::constant(Matrix::identity(1, 1)).unwrap();
        let d = uniform_stable_bound(&f, &id, &grid).unwrap();
        let mut brute = 1.0_f64;
        for (i, &t) in grid.times().iter().enumerate() {
            for &s in &grid.times()[..=i] {
                brute = brute.max((-(t - s)).exp() * g(t) / g(s));
            }
        }
        assert!((d - brute).abs() < 1e-12);
        assert!(d <= 2.0);
    }

    #[test]
    fn constants_from_formula() {
        let c = derive_constants(0.5, 4f64.ln(), 1.0).unwrap();
        assert!((c.b - 2.0).abs() < 1e-12);
        assert!((c.alpha - 0.5).abs() < 1e-12);
        let lambda = 0.8;
        let c = derive_constants((-lambda * 1.7f64).exp(), 1.7, 1.0).unwrap();
        assert!((c.alpha - lambda).abs() < 1e-12);
        let c = derive_constants(1.0 - 1e-12, 1.0, 1.0).unwrap();
        assert!(c.alpha > 0.0 && c.alpha < 1e-11);
        assert!(matches!(derive_constants(1.0, 1.0, 1.0), Err(Error::Range(_))));
        assert!(matches!(derive_constants(0.5, 1.0, 0.5), Err(Error::Range(_))));
    }
}
