//! Time grids that are uniform in `σ = ln h(t)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::rate::GrowthRate;

#[derive(Debug, Clone, Serialize)]
pub struct SigmaGrid {
    rate: String,
    step: f64,
    sigma: Vec<f64>,
    t: Vec<f64>,
}

impl SigmaGrid {
    /// Points `σ_i = sigma_min + i·step` up to `sigma_max` (inclusive up to
    /// round-off) with preimages `t_i = h⁻¹(e^{σ_i})`.
    pub fn new(rate: &GrowthRate, sigma_min: f64, sigma_max: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::InvalidArgument(format!("grid step must be positive, got {step}")));
        }
        if !sigma_min.is_finite() || !sigma_max.is_finite() || sigma_max < sigma_min {
            return Err(Error::InvalidArgument(format!("empty σ range [{sigma_min}, {sigma_max}]")));
        }
        let count = ((sigma_max - sigma_min) / step + 1e-9).floor() as usize + 1;
        let sigma: Vec<f64> = (0..count).map(|i| sigma_min + i as f64 * step).collect();
        let t = sigma.iter().map(|&s| rate.t_of_sigma(s)).collect::<Result<Vec<_>>>()?;
        if t.iter().any(|&x| x <= rate.a0()) || t.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Numerical(format!(
                "preimages of the σ grid are not strictly increasing for rate {}",
                rate.name()
            )));
        }
        Ok(Self { rate: rate.name().to_string(), step, sigma, t })
    }

    /// Grid starting at `σ = ln h(a0_star)` and covering `span` σ-units.
    pub fn from_anchor(rate: &GrowthRate, a0_star: f64, span: f64, step: f64) -> Result<Self> {
        let lo = rate.sigma_of_t(a0_star)?;
        Self::new(rate, lo, lo + span, step)
    }

    /// The same σ values as a grid for the exponential rate, i.e. the grid on
    /// which the rescaled family is sampled.
    pub fn to_exponential(&self) -> Result<Self> {
        Self::new(&GrowthRate::exp(), self.sigma_min(), self.sigma_max(), self.step)
    }

    pub fn rate_name(&self) -> &str {
        &self.rate
    }

    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn sigma(&self, i: usize) -> f64 {
        self.sigma[i]
    }

    pub fn t(&self, i: usize) -> f64 {
        self.t[i]
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigma
    }

    pub fn times(&self) -> &[f64] {
        &self.t
    }

    pub fn sigma_min(&self) -> f64 {
        self.sigma[0]
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigma[self.sigma.len() - 1]
    }

    pub(crate) fn check_rate(&self, rate: &GrowthRate) -> Result<()> {
        if rate.name() != self.rate {
            return Err(Error::InvalidArgument(format!(
                "grid built for rate {} used with rate {}",
                self.rate,
                rate.name()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_in_sigma() {
        for rate in [GrowthRate::exp(), GrowthRate::poly(), GrowthRate::log()] {
            let g = SigmaGrid::new(&rate, 0.0, 5.0, 0.1).unwrap();
            assert_eq!(g.len(), 51);
            for w in g.sigmas().windows(2) {
                assert!((w[1] - w[0] - 0.1).abs() < 1e-12);
            }
            for i in 0..g.len() {
                assert!(g.t(i) > rate.a0());
                assert!((rate.sigma_of_t(g.t(i)).unwrap() - g.sigma(i)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn anchored_grid_starts_at_anchor() {
        let g = SigmaGrid::from_anchor(&GrowthRate::poly(), 2.0, 1.0, 0.25).unwrap();
        assert!((g.t(0) - 2.0).abs() < 1e-15);
        assert_eq!(g.len(), 5);
    }

    #[test]
    fn rejects_bad_ranges() {
        let h = GrowthRate::exp();
        assert!(SigmaGrid::new(&h, 1.0, 0.0, 0.1).is_err());
        assert!(SigmaGrid::new(&h, 0.0, 1.0, 0.0).is_err());
        // h⁻¹(e^σ) = exp(exp(σ)) overflows for large σ
        assert!(SigmaGrid::new(&GrowthRate::log(), 0.0, 7.0, 0.5).is_err());
    }
}
