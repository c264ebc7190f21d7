//! Invertible evolution families `T(t, s)` on ℝⁿ.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::ode::OdePropagator;
use crate::rate::GrowthRate;

/// Residual tolerance for families given in closed form.
pub const CLOSED_FORM_TOL: f64 = 1e-9;
/// Residual tolerance for families produced by numerical integration.
pub const ODE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    ClosedForm,
    OdeGenerated,
    Rescaled,
}

type ForwardMap = Arc<dyn Fn(f64, f64) -> Matrix + Send + Sync>;

#[derive(Clone)]
enum Repr {
    /// Forward map, evaluated for `t ≥ s` only.
    ClosedForm(ForwardMap),
    Ode(Arc<OdePropagator>),
    Rescaled {
        base: Box<EvolutionFamily>,
        rate: GrowthRate,
    },
    /// `R T(t, s) Rᵀ` for an orthogonal `R`.
    Conjugated {
        base: Box<EvolutionFamily>,
        rot: Matrix,
    },
}

/// A two-parameter family of invertible `n × n` transition matrices with
/// `T(t, t) = Id` and `T(t, s) T(s, r) = T(t, r)`, defined for `t, s > a0`.
#[derive(Clone)]
pub struct EvolutionFamily {
    name: String,
    dim: usize,
    a0: f64,
    repr: Repr,
}

impl fmt::Debug for EvolutionFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EvolutionFamily")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("a0", &self.a0)
            .field("kind", &self.kind())
            .finish()
    }
}

impl EvolutionFamily {
    /// A family from its forward map `(t, s) ↦ T(t, s)`, `t ≥ s`. Backward
    /// transitions are obtained by inversion.
    pub fn closed_form<F>(name: impl Into<String>, dim: usize, a0: f64, forward: F) -> Self
    where
        F: Fn(f64, f64) -> Matrix + Send + Sync + 'static,
    {
        Self { name: name.into(), dim, a0, repr: Repr::ClosedForm(Arc::new(forward)) }
    }

    pub(crate) fn from_ode(name: impl Into<String>, prop: OdePropagator) -> Self {
        Self { name: name.into(), dim: prop.dim(), a0: prop.a0(), repr: Repr::Ode(Arc::new(prop)) }
    }

    pub(crate) fn rescaled(base: &EvolutionFamily, rate: &GrowthRate) -> Self {
        Self {
            name: format!("{}@{}", base.name, rate.name()),
            dim: base.dim,
            a0: f64::NEG_INFINITY,
            repr: Repr::Rescaled { base: Box::new(base.clone()), rate: rate.clone() },
        }
    }

    /// The family `R T(t, s) Rᵀ`; `rot` must be orthogonal.
    pub fn conjugated(&self, rot: &Matrix) -> Result<Self> {
        if rot.nrows() != self.dim || rot.ncols() != self.dim {
            return Err(Error::InvalidArgument("conjugating matrix has the wrong shape".into()));
        }
        let defect = (rot.transpose() * rot - Matrix::identity(self.dim, self.dim)).norm();
        if defect > 1e-12 {
            return Err(Error::InvalidArgument(format!("conjugating matrix is not orthogonal ({defect:.1e})")));
        }
        Ok(Self {
            name: format!("{}~conj", self.name),
            dim: self.dim,
            a0: self.a0,
            repr: Repr::Conjugated { base: Box::new(self.clone()), rot: rot.clone() },
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn a0(&self) -> f64 {
        self.a0
    }

    pub fn kind(&self) -> FamilyKind {
        match &self.repr {
            Repr::ClosedForm(_) => FamilyKind::ClosedForm,
            Repr::Ode(_) => FamilyKind::OdeGenerated,
            Repr::Rescaled { .. } => FamilyKind::Rescaled,
            Repr::Conjugated { base, .. } => base.kind(),
        }
    }

    /// Kind of the underlying representation, looking through rescaling.
    pub fn base_kind(&self) -> FamilyKind {
        match &self.repr {
            Repr::Rescaled { base, .. } | Repr::Conjugated { base, .. } => base.base_kind(),
            Repr::ClosedForm(_) => FamilyKind::ClosedForm,
            Repr::Ode(_) => FamilyKind::OdeGenerated,
        }
    }

    /// Residual tolerance appropriate for this family.
    pub fn tolerance(&self) -> f64 {
        match self.base_kind() {
            FamilyKind::OdeGenerated => ODE_TOL,
            _ => CLOSED_FORM_TOL,
        }
    }

    fn check_domain(&self, t: f64) -> Result<()> {
        if !t.is_finite() || t <= self.a0 {
            return Err(Error::Domain(format!("time {t} outside ({}, ∞) for family {}", self.a0, self.name)));
        }
        Ok(())
    }

    /// `T(t, s)`; for `t < s` this is `T(s, t)⁻¹`.
    pub fn transition(&self, t: f64, s: f64) -> Result<Matrix> {
        self.check_domain(t)?;
        self.check_domain(s)?;
        if t == s {
            return Ok(Matrix::identity(self.dim, self.dim));
        }
        let m = match &self.repr {
            Repr::ClosedForm(f) => {
                if t > s {
                    f(t, s)
                } else {
                    let fwd = f(s, t);
                    if !linalg::is_finite(&fwd) {
                        return Err(Error::Numerical(format!("{}: non-finite T({s}, {t})", self.name)));
                    }
                    linalg::inverse(&fwd)?
                }
            }
            Repr::Ode(prop) => prop.transition(t, s)?,
            Repr::Rescaled { base, rate } => base.transition(rate.t_of_sigma(t)?, rate.t_of_sigma(s)?)?,
            Repr::Conjugated { base, rot } => rot * base.transition(t, s)? * rot.transpose(),
        };
        if m.nrows() != self.dim || m.ncols() != self.dim {
            return Err(Error::Numerical(format!("{}: transition has shape {}x{}", self.name, m.nrows(), m.ncols())));
        }
        if !linalg::is_finite(&m) {
            return Err(Error::Numerical(format!("{}: non-finite T({t}, {s})", self.name)));
        }
        Ok(m)
    }
}
