//! Growth rates: increasing bijections `h: (a0, ∞) → (0, ∞)`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Relative tolerance of the forward/inverse round trip.
pub const ROUND_TRIP_TOL: f64 = 1e-12;

const MAX_BRACKET_STEPS: usize = 2_000;
const MAX_BISECTION_STEPS: usize = 400;

type RateFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum RateKind {
    Exp,
    /// `h(t) = t^p` on `(0, ∞)`.
    Power(f64),
    /// `h(t) = ln t` on `(1, ∞)`.
    Log,
    Table(Arc<MonotoneTable>),
    Custom(RateFn),
}

/// An increasing bijection onto `(0, ∞)`. The left endpoint `a0` may be
/// `-∞`, stored as `f64::NEG_INFINITY`.
#[derive(Clone)]
pub struct GrowthRate {
    name: String,
    a0: f64,
    kind: RateKind,
}

impl fmt::Debug for GrowthRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GrowthRate").field("name", &self.name).field("a0", &self.a0).finish()
    }
}

impl GrowthRate {
    /// `h(t) = eᵗ`; the exponential case.
    pub fn exp() -> Self {
        Self { name: "exp".into(), a0: f64::NEG_INFINITY, kind: RateKind::Exp }
    }

    /// `h(t) = t`.
    pub fn poly() -> Self {
        Self { name: "poly".into(), a0: 0.0, kind: RateKind::Power(1.0) }
    }

    /// `h(t) = t^p` for `p > 0`.
    pub fn power(p: f64) -> Result<Self> {
        if !(p > 0.0 && p.is_finite()) {
            return Err(Error::InvalidArgument(format!("power rate needs p > 0, got {p}")));
        }
        let name = if p == 1.0 { "poly".to_string() } else { format!("poly^{p}") };
        Ok(Self { name, a0: 0.0, kind: RateKind::Power(p) })
    }

    /// `h(t) = ln t` on `(1, ∞)`.
    pub fn log() -> Self {
        Self { name: "log".into(), a0: 1.0, kind: RateKind::Log }
    }

    /// A rate given only through its forward map; the inverse is computed by
    /// bisection. The caller is responsible for `f` being an increasing
    /// bijection `(a0, ∞) → (0, ∞)`.
    pub fn custom<F>(name: impl Into<String>, a0: f64, f: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self { name: name.into(), a0, kind: RateKind::Custom(Arc::new(f)) }
    }

    /// Monotone interpolation of a strictly increasing `(t, h(t))` table,
    /// piecewise linear in `(t, ln h)` and extended linearly past both ends,
    /// so the domain is all of ℝ.
    pub fn from_table(name: impl Into<String>, ts: &[f64], hs: &[f64]) -> Result<Self> {
        let table = MonotoneTable::new(ts, hs)?;
        Ok(Self { name: name.into(), a0: f64::NEG_INFINITY, kind: RateKind::Table(Arc::new(table)) })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn a0(&self) -> f64 {
        self.a0
    }

    pub fn is_exp(&self) -> bool {
        matches!(self.kind, RateKind::Exp)
    }

    fn check_domain(&self, t: f64) -> Result<()> {
        if !t.is_finite() || t <= self.a0 {
            return Err(Error::Domain(format!("t = {t} outside ({}, ∞) for rate {}", self.a0, self.name)));
        }
        Ok(())
    }

    fn raw(&self, t: f64) -> f64 {
        match &self.kind {
            RateKind::Exp => t.exp(),
            RateKind::Power(p) => t.powf(*p),
            RateKind::Log => t.ln(),
            RateKind::Table(tab) => tab.log_h(t).exp(),
            RateKind::Custom(f) => f(t),
        }
    }

    /// `h(t)`.
    pub fn eval(&self, t: f64) -> Result<f64> {
        self.check_domain(t)?;
        let y = self.raw(t);
        if !(y > 0.0) || !y.is_finite() {
            return Err(Error::Numerical(format!("rate {} gave h({t}) = {y}", self.name)));
        }
        Ok(y)
    }

    /// `h⁻¹(y)` for `y > 0`.
    pub fn inverse(&self, y: f64) -> Result<f64> {
        if !(y > 0.0) || !y.is_finite() {
            return Err(Error::Domain(format!("h⁻¹ needs y > 0, got {y}")));
        }
        let t = match &self.kind {
            RateKind::Exp => y.ln(),
            RateKind::Power(p) => y.powf(1.0 / p),
            RateKind::Log => y.exp(),
            RateKind::Table(_) | RateKind::Custom(_) => bisect_inverse(|t| self.raw(t), self.a0, y)?,
        };
        if !t.is_finite() || t <= self.a0 {
            return Err(Error::Domain(format!("h⁻¹({y}) = {t} is not representable for rate {}", self.name)));
        }
        Ok(t)
    }

    /// `σ = ln h(t)`.
    pub fn sigma_of_t(&self, t: f64) -> Result<f64> {
        self.check_domain(t)?;
        match &self.kind {
            RateKind::Exp => Ok(t),
            RateKind::Power(p) => Ok(p * t.ln()),
            RateKind::Table(tab) => Ok(tab.log_h(t)),
            _ => Ok(self.eval(t)?.ln()),
        }
    }

    /// `t = h⁻¹(e^σ)`.
    pub fn t_of_sigma(&self, sigma: f64) -> Result<f64> {
        if !sigma.is_finite() {
            return Err(Error::Domain(format!("σ = {sigma} is not finite")));
        }
        match &self.kind {
            RateKind::Exp => Ok(sigma),
            RateKind::Power(p) => {
                let t = (sigma / p).exp();
                if t > 0.0 && t.is_finite() {
                    Ok(t)
                } else {
                    Err(Error::Domain(format!("h⁻¹(e^{sigma}) not representable")))
                }
            }
            _ => self.inverse(sigma.exp()),
        }
    }

    /// `(ln h)'(t)`, used to build ODE generators graded by this rate.
    pub fn log_derivative(&self, t: f64) -> Result<f64> {
        self.check_domain(t)?;
        match &self.kind {
            RateKind::Exp => Ok(1.0),
            RateKind::Power(p) => Ok(p / t),
            RateKind::Log => Ok(1.0 / (t * t.ln())),
            RateKind::Table(tab) => Ok(tab.slope(t)),
            RateKind::Custom(_) => {
                let dt = 1e-6 * t.abs().max(1.0);
                let lo = if t - dt > self.a0 { t - dt } else { t };
                let hi = t + dt;
                Ok((self.eval(hi)?.ln() - self.eval(lo)?.ln()) / (hi - lo))
            }
        }
    }
}

/// Invert an increasing map by an expanding bracket followed by bisection
/// down to adjacent floating-point numbers.
fn bisect_inverse(f: impl Fn(f64) -> f64, a0: f64, y: f64) -> Result<f64> {
    let start = if a0.is_finite() { a0 + 1.0 } else { 0.0 };
    let (mut lo, mut hi);
    if f(start) < y {
        lo = start;
        let mut width = 1.0;
        hi = lo + width;
        let mut steps = 0;
        while f(hi) < y {
            lo = hi;
            width *= 2.0;
            hi = lo + width;
            steps += 1;
            if steps > MAX_BRACKET_STEPS || !hi.is_finite() {
                return Err(Error::Convergence(format!("no upper bracket for y = {y}")));
            }
        }
    } else {
        hi = start;
        let mut width = 1.0;
        let mut steps = 0;
        loop {
            lo = if a0.is_finite() { a0 + (hi - a0) * 0.5 } else { hi - width };
            if f(lo) < y {
                break;
            }
            if lo <= a0 || !lo.is_finite() || steps > MAX_BRACKET_STEPS {
                return Err(Error::Convergence(format!("no lower bracket for y = {y}")));
            }
            hi = lo;
            width *= 2.0;
            steps += 1;
        }
    }
    for _ in 0..MAX_BISECTION_STEPS {
        let mid = lo + (hi - lo) * 0.5;
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if (f(lo) - y).abs() <= (f(hi) - y).abs() {
        Ok(lo)
    } else {
        Ok(hi)
    }
}

#[derive(Debug)]
struct MonotoneTable {
    ts: Vec<f64>,
    log_hs: Vec<f64>,
}

impl MonotoneTable {
    fn new(ts: &[f64], hs: &[f64]) -> Result<Self> {
        if ts.len() != hs.len() || ts.len() < 2 {
            return Err(Error::InvalidArgument("rate table needs at least two (t, h) rows of equal length".into()));
        }
        for w in ts.windows(2).zip(hs.windows(2)) {
            let (t, h) = w;
            if !(t[1] > t[0]) || !(h[1] > h[0]) {
                return Err(Error::InvalidArgument("rate table must be strictly increasing in t and h".into()));
            }
        }
        if hs.iter().any(|&h| !(h > 0.0) || !h.is_finite()) || ts.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidArgument("rate table values must be finite with h > 0".into()));
        }
        Ok(Self { ts: ts.to_vec(), log_hs: hs.iter().map(|h| h.ln()).collect() })
    }

    fn segment(&self, t: f64) -> usize {
        let n = self.ts.len();
        match self.ts.partition_point(|&x| x <= t) {
            0 => 0,
            i if i >= n => n - 2,
            i => i - 1,
        }
    }

    fn slope_of(&self, i: usize) -> f64 {
        (self.log_hs[i + 1] - self.log_hs[i]) / (self.ts[i + 1] - self.ts[i])
    }

    fn log_h(&self, t: f64) -> f64 {
        let i = self.segment(t);
        self.log_hs[i] + self.slope_of(i) * (t - self.ts[i])
    }

    fn slope(&self, t: f64) -> f64 {
        self.slope_of(self.segment(t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    fn cubic() -> GrowthRate {
        GrowthRate::custom("t+t^3", 0.0, |t| t + t * t * t)
    }

    #[test]
    fn builtin_values() {
        assert_eq!(GrowthRate::exp().eval(0.0).unwrap(), 1.0);
        assert_eq!(GrowthRate::poly().eval(2.0).unwrap(), 2.0);
        assert!((GrowthRate::log().eval(E).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(GrowthRate::exp().inverse(1.0).unwrap(), 0.0);
        assert_eq!(GrowthRate::poly().inverse(5.0).unwrap(), 5.0);
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(GrowthRate::poly().eval(0.0), Err(Error::Domain(_))));
        assert!(matches!(GrowthRate::log().eval(0.5), Err(Error::Domain(_))));
        assert!(matches!(GrowthRate::exp().inverse(0.0), Err(Error::Domain(_))));
        assert!(matches!(GrowthRate::exp().inverse(-1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn bisection_inverse_of_cubic() {
        let h = cubic();
        let t = h.inverse(2.0).unwrap();
        assert!((h.eval(t).unwrap() - 2.0).abs() <= 1e-12);
        assert!((t - 1.0).abs() < 1e-12);
        // tiny targets force the bracket toward a0
        let t = h.inverse(1e-9).unwrap();
        assert!(t > 0.0);
        assert!((h.eval(t).unwrap() - 1e-9).abs() <= 1e-12);
    }

    #[test]
    fn sigma_coordinates() {
        assert_eq!(GrowthRate::exp().sigma_of_t(3.0).unwrap(), 3.0);
        assert!((GrowthRate::poly().sigma_of_t(E * E).unwrap() - 2.0).abs() < 1e-15);
        assert!((GrowthRate::log().t_of_sigma(0.0).unwrap() - E).abs() < 1e-15);
    }

    #[test]
    fn table_rate_is_monotone_and_invertible() {
        let h = GrowthRate::from_table("tab", &[0.0, 1.0, 3.0], &[1.0, 2.0, 20.0]).unwrap();
        assert!((h.eval(1.0).unwrap() - 2.0).abs() < 1e-14);
        assert!((h.eval(2.0).unwrap() - (2.0f64 * 20.0).sqrt()).abs() < 1e-12);
        for y in [0.01, 1.5, 7.0, 1e3] {
            let t = h.inverse(y).unwrap();
            assert!((h.eval(t).unwrap() - y).abs() <= ROUND_TRIP_TOL * y.max(1.0));
        }
        assert!(GrowthRate::from_table("bad", &[0.0, 1.0], &[2.0, 1.0]).is_err());
    }

    #[test]
    fn log_derivative_matches_finite_differences() {
        for h in [GrowthRate::exp(), GrowthRate::poly(), GrowthRate::log(), cubic()] {
            let t = 2.5;
            let d = 1e-5;
            let fd = (h.sigma_of_t(t + d).unwrap() - h.sigma_of_t(t - d).unwrap()) / (2.0 * d);
            assert!((h.log_derivative(t).unwrap() - fd).abs() < 1e-6, "{}", h.name());
        }
    }
}
