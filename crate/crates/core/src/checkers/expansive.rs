use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::noncritical::{NoncriticalityConstants, NONCRITICAL_MARGIN};
use super::{least_squares, TransitionTable};
use crate::error::{Error, Result};
use crate::family::EvolutionFamily;
use crate::grid::SigmaGrid;
use crate::linalg::Matrix;
use crate::rate::GrowthRate;
use crate::sphere::{self, SphereConfig, SphereObjective, SphereSamples};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExpansivenessConfig {
    pub beta: f64,
    /// Largest window `σ_b − σ_a` to test; the whole grid when `None`.
    pub max_window: Option<f64>,
    /// The window profile `ln L(W)` is called divergent when its slope over
    /// the upper half of tested widths exceeds `divergence_slope · β`.
    pub divergence_slope: f64,
    pub sphere: SphereConfig,
}

impl Default for ExpansivenessConfig {
    fn default() -> Self {
        Self { beta: 1.0, max_window: None, divergence_slope: 0.25, sphere: SphereConfig::default() }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct WindowPoint {
    /// Window width `σ_b − σ_a`.
    pub width: f64,
    /// Supremum of observed ratios over windows of at most this width.
    #[serde(rename = "L")]
    pub l: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExpansivenessConstants {
    #[serde(rename = "L")]
    pub l: f64,
    pub beta: f64,
    /// Largest tested `σ_b − σ_a`.
    pub window_max: f64,
    /// `L` from raw sphere samples only (never above `l`).
    pub sampled_l: f64,
    pub divergent: bool,
    /// Slope of `ln L(W)` over the upper half of window widths.
    pub profile_slope: f64,
    /// `(σ_a, σ_t, σ_b)` of the worst window.
    pub worst_window: [f64; 3],
    pub worst_vector: Vec<f64>,
    pub triples: usize,
    pub profile: Vec<WindowPoint>,
}

impl ExpansivenessConstants {
    pub fn pass(&self) -> bool {
        !self.divergent && self.l.is_finite()
    }
}

struct Objective {
    n: usize,
    back: Vec<f64>,
    fwd: Vec<f64>,
    w_back: f64,
    w_fwd: f64,
}

fn flat(m: &Matrix) -> Vec<f64> {
    // row-major
    let n = m.nrows();
    (0..n * n).map(|k| m[(k / n, k % n)]).collect()
}

fn matvec(m: &[f64], v: &[f64], out: &mut [f64]) {
    let n = v.len();
    for (i, o) in out.iter_mut().enumerate() {
        *o = sphere::dot(&m[i * n..(i + 1) * n], v);
    }
}

impl SphereObjective for Objective {
    fn value(&self, v: &[f64]) -> f64 {
        let mut tmp = [0.0; 8];
        let mut buf = vec![];
        let out: &mut [f64] = if self.n <= 8 {
            &mut tmp[..self.n]
        } else {
            buf.resize(self.n, 0.0);
            &mut buf
        };
        matvec(&self.back, v, out);
        let a = sphere::dot(out, out).sqrt();
        matvec(&self.fwd, v, out);
        let b = sphere::dot(out, out).sqrt();
        self.w_back * a + self.w_fwd * b
    }

    fn gradient(&self, v: &[f64], grad: &mut [f64]) -> bool {
        let n = self.n;
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut av = vec![0.0; n];
        for (m, w) in [(&self.back, self.w_back), (&self.fwd, self.w_fwd)] {
            matvec(m, v, &mut av);
            let norm = sphere::dot(&av, &av).sqrt();
            if norm < 1e-300 {
                return false;
            }
            // w Mᵀ M v / ‖M v‖
            for j in 0..n {
                let col: f64 = (0..n).map(|i| m[i * n + j] * av[i]).sum();
                grad[j] += w * col / norm;
            }
        }
        true
    }
}

/// Estimate the smallest `L` with
/// `‖v‖ ≤ L((h(t)/h(a))^{−β}‖T(a,t)v‖ + (h(b)/h(t))^{−β}‖T(b,t)v‖)` over
/// grid triples `a ≤ t ≤ b` and unit vectors `v`.
pub fn estimate_expansiveness(
    family: &EvolutionFamily,
    rate: &GrowthRate,
    grid: &SigmaGrid,
    cfg: &ExpansivenessConfig,
) -> Result<ExpansivenessConstants> {
    grid.check_rate(rate)?;
    if !(cfg.beta > 0.0) || !cfg.beta.is_finite() {
        return Err(Error::InvalidArgument(format!("β must be positive, got {}", cfg.beta)));
    }
    let table = TransitionTable::new(family, grid)?;
    estimate_from_table(&table, grid, family.dim(), cfg)
}

pub(crate) fn estimate_from_table(
    table: &TransitionTable,
    grid: &SigmaGrid,
    dim: usize,
    cfg: &ExpansivenessConfig,
) -> Result<ExpansivenessConstants> {
    let n = grid.len();
    let max_k = match cfg.max_window {
        Some(w) => ((w / grid.step()) + 1e-9).floor() as usize,
        None => n - 1,
    }
    .min(n - 1);
    let mut triples = Vec::new();
    for a in 0..n {
        for b in a..n.min(a + max_k + 1) {
            for t in a..=b {
                triples.push((a, t, b));
            }
        }
    }
    let samples = SphereSamples::new(dim, &cfg.sphere);
    let flats: Vec<Vec<f64>> = (0..n * n).map(|k| flat(table.get(k / n, k % n))).collect();
    let beta = cfg.beta;
    // (ratio, sampled ratio, argmax)
    let results: Vec<(f64, f64, Vec<f64>)> = triples
        .par_iter()
        .map(|&(a, t, b)| {
            let obj = Objective {
                n: dim,
                back: flats[a * n + t].clone(),
                fwd: flats[b * n + t].clone(),
                w_back: (-beta * (grid.sigma(t) - grid.sigma(a))).exp(),
                w_fwd: (-beta * (grid.sigma(b) - grid.sigma(t))).exp(),
            };
            let m = sphere::minimize(&obj, &samples, &cfg.sphere);
            (1.0 / m.value, 1.0 / m.sampled, m.argmin)
        })
        .collect();

    let mut by_width = vec![0.0_f64; max_k + 1];
    let (mut best, mut sampled_best, mut worst) = (0.0_f64, 0.0_f64, 0usize);
    for (idx, ((a, _, b), (ratio, sampled, _))) in triples.iter().zip(&results).enumerate() {
        let k = b - a;
        by_width[k] = by_width[k].max(*ratio);
        sampled_best = sampled_best.max(*sampled);
        if *ratio > best {
            best = *ratio;
            worst = idx;
        }
    }
    let mut profile = Vec::with_capacity(by_width.len());
    let mut running = 0.0_f64;
    for (k, l) in by_width.iter().enumerate() {
        running = running.max(*l);
        profile.push(WindowPoint { width: k as f64 * grid.step(), l: running });
    }
    let upper: Vec<&WindowPoint> = profile.iter().skip(max_k / 2).collect();
    let slope = least_squares(
        &upper.iter().map(|p| p.width).collect::<Vec<_>>(),
        &upper.iter().map(|p| p.l.ln()).collect::<Vec<_>>(),
    )
    .map(|(_, b)| b)
    .unwrap_or(0.0);
    let (a, t, b) = triples[worst];
    Ok(ExpansivenessConstants {
        l: best,
        beta,
        window_max: max_k as f64 * grid.step(),
        sampled_l: sampled_best,
        divergent: slope > cfg.divergence_slope * beta,
        profile_slope: slope,
        worst_window: [grid.sigma(a), grid.sigma(t), grid.sigma(b)],
        worst_vector: results[worst].2.clone(),
        triples: triples.len(),
        profile,
    })
}

/// Turn expansiveness constants into noncriticality constants:
/// `C = β⁻¹ ln(2L/(1 − margin))` and `θ = 2L e^{−βC} = 1 − margin`.
pub fn expansive_to_noncritical(l: f64, beta: f64, margin: f64) -> Result<NoncriticalityConstants> {
    if !(beta > 0.0) || !beta.is_finite() || !l.is_finite() {
        return Err(Error::InvalidArgument(format!("need finite L and β > 0, got L = {l}, β = {beta}")));
    }
    // a = t = b gives ‖v‖ ≤ 2L‖v‖, so L < 1/2 is never attainable
    if l < 0.5 {
        return Err(Error::InvalidArgument(format!("L = {l} is below 1/2")));
    }
    if !(margin > 0.0 && margin < 1.0) {
        return Err(Error::InvalidArgument(format!("margin must lie in (0, 1), got {margin}")));
    }
    let c = (2.0 * l / (1.0 - margin)).ln() / beta;
    let theta = 2.0 * l * (-beta * c).exp();
    Ok(NoncriticalityConstants { theta, c, pass: theta < 1.0 - NONCRITICAL_MARGIN, detail: None })
}
