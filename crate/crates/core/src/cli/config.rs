//! Run configuration: system, rate, grid and command parameters.
//!
//! ```toml
//! seed = 7
//! a0_star = 1.0
//!
//! [system]
//! name = "diag-hyperbolic"
//! lambda = 1.0
//!
//! [rate]
//! name = "poly"
//!
//! [grid]
//! span = 5.0
//! step = 0.25
//!
//! [params]
//! C = 1.0
//! ```

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::construct::PipelineConfig;
use crate::error::{Error, Result};
use crate::family::EvolutionFamily;
use crate::grid::SigmaGrid;
use crate::linalg::Matrix;
use crate::ode::make_ode_family_at;
use crate::rate::GrowthRate;
use crate::rescale::rescale_family;
use crate::sphere::SphereConfig;
use crate::systems::Builtin;

pub const DEFAULT_SPAN: f64 = 5.0;
pub const DEFAULT_STEP: f64 = 0.25;
pub const DEFAULT_ODE_STEP: f64 = 1e-3;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub a0_star: Option<f64>,
    pub system: SystemSpec,
    #[serde(default)]
    pub rate: RateSpec,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub params: Params,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SystemKind {
    /// A builtin system in closed form.
    #[default]
    Builtin,
    /// A builtin system integrated from its generator.
    Ode,
    /// `x' = A(t)x` with `A` interpolated from a table.
    Coefficients,
    /// `T_h` for a base system and rate.
    Rescaled,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    #[serde(default)]
    pub kind: SystemKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub angle: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    /// RK4 step for integrated systems.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    /// Integration origin; defaults to `a0_star`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub origin: Option<f64>,
    /// Knots and row-major coefficient matrices for `coefficients`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matrices: Option<Vec<Vec<Vec<f64>>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub base: Option<Box<SystemSpec>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub base_rate: Option<RateSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub base_a0_star: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RateSpec {
    #[default]
    Exp,
    Poly,
    Power {
        p: f64,
    },
    Log,
    /// Strictly increasing samples `(t, h(t))`.
    Table {
        t: Vec<f64>,
        h: Vec<f64>,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub span: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[serde(rename = "C", skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_values: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(rename = "D", skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap_threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_window: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub restarts: Option<usize>,
    /// Constant projection (rows) for `check-dichotomy`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub projection: Option<Vec<Vec<f64>>>,
}

impl RunConfig {
    /// Read TOML, or JSON when the file ends in `.json`.
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            Self::from_json(&text)
        } else {
            Self::from_toml(&text)
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn rate(&self) -> Result<GrowthRate> {
        self.rate.build()
    }

    /// `a0_star`, defaulting to `a0 + 1` (or `0` for rates on all of ℝ).
    pub fn a0_star(&self) -> Result<f64> {
        let rate = self.rate()?;
        let a0_star = self.a0_star.unwrap_or(if rate.a0().is_finite() { rate.a0() + 1.0 } else { 0.0 });
        if !(a0_star > rate.a0()) || !a0_star.is_finite() {
            return Err(Error::Config(format!("a0_star = {a0_star} must exceed a0 = {}", rate.a0())));
        }
        Ok(a0_star)
    }

    pub fn family(&self) -> Result<EvolutionFamily> {
        self.system.build(&self.rate()?, self.a0_star()?)
    }

    pub fn grid(&self) -> Result<SigmaGrid> {
        let rate = self.rate()?;
        let lo = match self.grid.sigma_min {
            Some(s) => s,
            None => rate.sigma_of_t(self.a0_star()?)?,
        };
        let hi = self.grid.sigma_max.unwrap_or(lo + self.grid.span.unwrap_or(DEFAULT_SPAN));
        SigmaGrid::new(&rate, lo, hi, self.grid.step.unwrap_or(DEFAULT_STEP))
            .map_err(|e| Error::Config(format!("grid: {e}")))
    }

    pub fn sphere(&self) -> SphereConfig {
        let d = SphereConfig::default();
        SphereConfig {
            samples: self.params.samples.unwrap_or(d.samples),
            restarts: self.params.restarts.unwrap_or(d.restarts),
            seed: self.seed,
        }
    }

    pub fn pipeline(&self) -> Result<PipelineConfig> {
        let d = PipelineConfig::default();
        let grid = self.grid()?;
        let p = &self.params;
        Ok(PipelineConfig {
            span: grid.sigma_max() - grid.sigma_min(),
            step: grid.step(),
            horizon: p.horizon.unwrap_or(d.horizon),
            gap_threshold: p.gap_threshold.unwrap_or(d.gap_threshold),
            c_values: p.c_values.clone().or(p.c.map(|c| vec![c])).unwrap_or(d.c_values),
            beta: p.beta.unwrap_or(d.beta),
            margin: p.margin.unwrap_or(d.margin),
            min_rate: p.min_rate.unwrap_or(d.min_rate),
            divergence_slope: d.divergence_slope,
            max_window: p.max_window,
            sphere: self.sphere(),
            cross_check: true,
        })
    }

    /// The same problem posed for `T_h` under the exponential rate.
    pub fn rescaled(&self) -> Result<Self> {
        let rate = self.rate()?;
        let a0_star = self.a0_star()?;
        let sigma_min = match self.grid.sigma_min {
            Some(s) => s,
            None => rate.sigma_of_t(a0_star)?,
        };
        let system = SystemSpec {
            kind: SystemKind::Rescaled,
            base: Some(Box::new(self.system.clone())),
            base_rate: Some(self.rate.clone()),
            base_a0_star: Some(a0_star),
            ..Default::default()
        };
        let grid = GridSpec {
            sigma_min: Some(sigma_min),
            sigma_max: Some(self.grid()?.sigma_max()),
            span: None,
            step: self.grid.step,
        };
        Ok(Self {
            seed: self.seed,
            a0_star: Some(sigma_min),
            system,
            rate: RateSpec::Exp,
            grid,
            params: self.params.clone(),
        })
    }
}

impl RateSpec {
    pub fn build(&self) -> Result<GrowthRate> {
        let rate = match self {
            RateSpec::Exp => GrowthRate::exp(),
            RateSpec::Poly => GrowthRate::poly(),
            RateSpec::Power { p } => GrowthRate::power(*p)?,
            RateSpec::Log => GrowthRate::log(),
            RateSpec::Table { t, h } => GrowthRate::from_table("table", t, h)?,
        };
        Ok(rate)
    }
}

impl SystemSpec {
    fn builtin(&self) -> Result<Builtin> {
        let name = self.name.clone().ok_or_else(|| Error::Config("system needs a name".into()))?;
        let mut obj = serde_json::Map::new();
        obj.insert("name".into(), name.clone().into());
        for (key, value) in [("lambda", self.lambda), ("omega", self.omega), ("angle", self.angle)] {
            if let Some(v) = value {
                obj.insert(key.into(), v.into());
            }
        }
        if let Some(dim) = self.dim {
            obj.insert("dim".into(), dim.into());
        }
        let builtin: Builtin =
            serde_json::from_value(obj.into()).map_err(|e| Error::Config(format!("system {name}: {e}")))?;
        if builtin.dim() == 0 {
            return Err(Error::Config("system dimension must be positive".into()));
        }
        Ok(builtin)
    }

    pub fn build(&self, rate: &GrowthRate, a0_star: f64) -> Result<EvolutionFamily> {
        let step = self.step.unwrap_or(DEFAULT_ODE_STEP);
        let origin = self.origin.unwrap_or(a0_star);
        match self.kind {
            SystemKind::Builtin => Ok(self.builtin()?.closed_form(rate)),
            SystemKind::Ode => self.builtin()?.ode(rate, origin, step),
            SystemKind::Coefficients => {
                let (times, mats) = match (&self.times, &self.matrices) {
                    (Some(t), Some(m)) => (t.clone(), m),
                    _ => return Err(Error::Config("coefficient systems need `times` and `matrices`".into())),
                };
                let table = CoefficientTable::new(times, mats)?;
                let dim = table.dim;
                let name = self.name.clone().unwrap_or_else(|| "coefficients".into());
                let table = Arc::new(table);
                make_ode_family_at(name, dim, rate.a0(), origin, step, move |t| table.at(t))
            }
            SystemKind::Rescaled => {
                let base = self.base.as_ref().ok_or_else(|| Error::Config("rescaled system needs `base`".into()))?;
                let base_rate = self.base_rate.as_ref().unwrap_or(&RateSpec::Exp).build()?;
                if !rate.is_exp() {
                    return Err(Error::Config("a rescaled system is graded by the exponential rate".into()));
                }
                let base_a0_star = match self.base_a0_star {
                    Some(a) => a,
                    None => base_rate.t_of_sigma(a0_star)?,
                };
                rescale_family(&base.build(&base_rate, base_a0_star)?, &base_rate)
            }
        }
    }
}

/// Piecewise-linear `A(t)`, constant outside the knot range.
struct CoefficientTable {
    dim: usize,
    times: Vec<f64>,
    mats: Vec<Matrix>,
}

impl CoefficientTable {
    fn new(times: Vec<f64>, rows: &[Vec<Vec<f64>>]) -> Result<Self> {
        if times.is_empty() || times.len() != rows.len() {
            return Err(Error::Config("`times` and `matrices` must be nonempty and of equal length".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) || times.iter().any(|t| !t.is_finite()) {
            return Err(Error::Config("`times` must be finite and strictly increasing".into()));
        }
        let dim = rows[0].len();
        let mut mats = Vec::with_capacity(rows.len());
        for m in rows {
            if dim == 0 || m.len() != dim || m.iter().any(|r| r.len() != dim) {
                return Err(Error::Config("coefficient matrices must be square and of one size".into()));
            }
            mats.push(Matrix::from_fn(dim, dim, |i, j| m[i][j]));
        }
        Ok(Self { dim, times, mats })
    }

    fn at(&self, t: f64) -> Matrix {
        let n = self.times.len();
        if t <= self.times[0] {
            return self.mats[0].clone();
        }
        if t >= self.times[n - 1] {
            return self.mats[n - 1].clone();
        }
        let k = self.times.partition_point(|&x| x <= t) - 1;
        let w = (t - self.times[k]) / (self.times[k + 1] - self.times[k]);
        &self.mats[k] * (1.0 - w) + &self.mats[k + 1] * w
    }
}
