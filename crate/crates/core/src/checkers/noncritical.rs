use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::family::EvolutionFamily;
use crate::grid::SigmaGrid;
use crate::rate::GrowthRate;
use crate::sphere::{self, SphereConfig, SphereObjective, SphereSamples};

/// `θ` must stay below `1 − NONCRITICAL_MARGIN` to pass.
pub const NONCRITICAL_MARGIN: f64 = 1e-6;
/// Number of sub-grid intervals across `[−C, C]`, i.e. a step of `C/50`.
const SUBGRID_INTERVALS: usize = 100;

#[derive(Debug, Clone, Serialize)]
pub struct NoncriticalityConstants {
    pub theta: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<NoncriticalDetail>,
}

#[derive(Debug, Clone, Serialize)]
pub struct NoncriticalDetail {
    /// Grid points with `σ_t ≥ σ_min + C`.
    pub admissible: usize,
    /// `θ` from raw sphere samples only (never above `theta`).
    pub sampled_theta: f64,
    pub worst_sigma: f64,
    pub worst_vector: Vec<f64>,
    /// `(σ_t, θ_t)` for every admissible grid point.
    pub per_point: Vec<[f64; 2]>,
}

struct MaxOfNorms {
    n: usize,
    mats: Vec<f64>,
}

impl SphereObjective for MaxOfNorms {
    fn value(&self, v: &[f64]) -> f64 {
        let n = self.n;
        let mut best = 0.0_f64;
        for m in self.mats.chunks_exact(n * n) {
            let mut sq = 0.0;
            for i in 0..n {
                let r = sphere::dot(&m[i * n..(i + 1) * n], v);
                sq += r * r;
            }
            best = best.max(sq);
        }
        best.sqrt()
    }
}

/// Estimate the smallest `θ` with `‖v‖ ≤ θ sup{‖T(u,t)v‖ : |ln h(u) − ln h(t)| ≤ C}`
/// for all grid points `t` with `h(t) ≥ e^C h(a0*)`, where `a0*` is the
/// first grid point. The supremum over `u` runs over a sub-grid of step
/// `C/50` in σ, so the reported `θ` is a lower bound of the exact value.
pub fn estimate_noncriticality(
    family: &EvolutionFamily,
    rate: &GrowthRate,
    c: f64,
    grid: &SigmaGrid,
    sphere_cfg: &SphereConfig,
) -> Result<NoncriticalityConstants> {
    grid.check_rate(rate)?;
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::InvalidArgument(format!("C must be positive, got {c}")));
    }
    let lo = grid.sigma_min() + c - 1e-12;
    let admissible: Vec<usize> = (0..grid.len()).filter(|&i| grid.sigma(i) >= lo).collect();
    if admissible.is_empty() {
        return Err(Error::EmptyRegion(format!(
            "no grid point with σ ≥ {} (grid ends at {})",
            grid.sigma_min() + c,
            grid.sigma_max()
        )));
    }
    let dim = family.dim();
    let samples = SphereSamples::new(dim, sphere_cfg);
    let offsets: Vec<f64> =
        (0..=SUBGRID_INTERVALS).map(|k| -c + 2.0 * c * k as f64 / SUBGRID_INTERVALS as f64).collect();

    let per_point = admissible
        .par_iter()
        .map(|&i| -> Result<(f64, f64, Vec<f64>)> {
            let t = grid.t(i);
            let mut mats = Vec::with_capacity(offsets.len() * dim * dim);
            for off in &offsets {
                let u = rate.t_of_sigma(grid.sigma(i) + off)?;
                let m = family.transition(u, t)?;
                for r in 0..dim {
                    for col in 0..dim {
                        mats.push(m[(r, col)]);
                    }
                }
            }
            let obj = MaxOfNorms { n: dim, mats };
            let min = sphere::minimize(&obj, &samples, sphere_cfg);
            Ok((1.0 / min.value, 1.0 / min.sampled, min.argmin))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut worst = 0;
    for (k, p) in per_point.iter().enumerate() {
        if p.0 > per_point[worst].0 {
            worst = k;
        }
    }
    let theta = per_point[worst].0;
    let sampled_theta = per_point.iter().map(|p| p.1).fold(0.0, f64::max);
    Ok(NoncriticalityConstants {
        theta,
        c,
        pass: theta < 1.0 - NONCRITICAL_MARGIN,
        detail: Some(NoncriticalDetail {
            admissible: admissible.len(),
            sampled_theta,
            worst_sigma: grid.sigma(admissible[worst]),
            worst_vector: per_point[worst].2.clone(),
            per_point: admissible.iter().zip(&per_point).map(|(&i, p)| [grid.sigma(i), p.0]).collect(),
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems;

    fn sphere() -> SphereConfig {
        SphereConfig { samples: 2_000, ..Default::default() }
    }

    #[test]
    fn scalar_stable_theta() {
        let h = GrowthRate::log();
        let f = systems::scalar_stable(&h, 0.8);
        let grid = SigmaGrid::new(&h, 0.0, 3.0, 0.25).unwrap();
        let c = estimate_noncriticality(&f, &h, 1.0, &grid, &sphere()).unwrap();
        assert!((c.theta - (-0.8f64).exp()).abs() < 1e-12);
        assert!(c.pass);
        assert_eq!(c.detail.unwrap().admissible, 9);
    }

    #[test]
    fn hyperbolic_theta() {
        let h = GrowthRate::exp();
        let f = systems::diag_hyperbolic(&h, 1.0);
        let grid = SigmaGrid::new(&h, 0.0, 2.0, 0.5).unwrap();
        let c = estimate_noncriticality(&f, &h, 1.0, &grid, &sphere()).unwrap();
        let expect = 2f64.cosh().powf(-0.5);
        assert!((c.theta - expect).abs() < 1e-6 * expect, "{} vs {expect}", c.theta);
    }

    #[test]
    fn identity_is_critical() {
        let h = GrowthRate::poly();
        let f = systems::identity(&h, 2);
        let grid = SigmaGrid::new(&h, 0.0, 2.0, 0.5).unwrap();
        let c = estimate_noncriticality(&f, &h, 1.0, &grid, &sphere()).unwrap();
        assert!((c.theta - 1.0).abs() < 1e-12);
        assert!(!c.pass);
    }

    #[test]
    fn empty_region() {
        let h = GrowthRate::exp();
        let f = systems::identity(&h, 1);
        let grid = SigmaGrid::new(&h, 0.0, 1.0, 0.5).unwrap();
        assert!(matches!(estimate_noncriticality(&f, &h, 2.0, &grid, &sphere()), Err(Error::EmptyRegion(_))));
    }
}
