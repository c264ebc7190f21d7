//! Reference systems with closed-form transitions, graded by a growth rate.
//!
//! Each system is available both in closed form and through an ODE
//! generator `A(t)` whose fundamental solution is the same family. With
//! `Δ = ln h(t) − ln h(s)`:
//!
//! | system               | `T(t, s)`                                |
//! |----------------------|------------------------------------------|
//! | scalar-stable        | `e^{−λΔ}`                                |
//! | diag-hyperbolic      | `diag(e^{−λΔ}, e^{λΔ})`                   |
//! | neutral              | `diag(e^{−λΔ}, 1)`                        |
//! | rotation             | rotation by `−ω(t − s)`                   |
//! | identity             | `Id`                                     |
//! | rotated-hyperbolic   | `R diag(e^{−λΔ}, e^{λΔ}) Rᵀ`              |
//! | scaled-stable        | `e^{−λΔ} g(t)/g(s)`, `g = 3/2 + sin(t)/2` |

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::family::EvolutionFamily;
use crate::linalg::{rotation2, Matrix};
use crate::ode::make_ode_family_at;
use crate::rate::GrowthRate;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Builtin {
    ScalarStable {
        #[serde(default = "one")]
        lambda: f64,
    },
    DiagHyperbolic {
        #[serde(default = "one")]
        lambda: f64,
    },
    Neutral {
        #[serde(default = "one")]
        lambda: f64,
    },
    Rotation {
        #[serde(default = "one")]
        omega: f64,
    },
    Identity {
        #[serde(default = "two")]
        dim: usize,
    },
    RotatedHyperbolic {
        #[serde(default = "one")]
        lambda: f64,
        #[serde(default = "default_angle")]
        angle: f64,
    },
    ScaledStable {
        #[serde(default = "one")]
        lambda: f64,
    },
}

fn one() -> f64 {
    1.0
}

fn two() -> usize {
    2
}

fn default_angle() -> f64 {
    0.5
}

fn g(t: f64) -> f64 {
    1.5 + 0.5 * t.sin()
}

fn g_log_derivative(t: f64) -> f64 {
    0.5 * t.cos() / g(t)
}

fn diag(values: &[f64]) -> Matrix {
    Matrix::from_diagonal(&DVector::from_column_slice(values))
}

impl Builtin {
    pub fn dim(&self) -> usize {
        match self {
            Builtin::ScalarStable { .. } | Builtin::ScaledStable { .. } => 1,
            Builtin::Identity { dim } => *dim,
            _ => 2,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Builtin::ScalarStable { lambda } => format!("scalar-stable(λ={lambda})"),
            Builtin::DiagHyperbolic { lambda } => format!("diag-hyperbolic(λ={lambda})"),
            Builtin::Neutral { lambda } => format!("neutral(λ={lambda})"),
            Builtin::Rotation { omega } => format!("rotation(ω={omega})"),
            Builtin::Identity { dim } => format!("identity(n={dim})"),
            Builtin::RotatedHyperbolic { lambda, angle } => format!("rotated-hyperbolic(λ={lambda},φ={angle})"),
            Builtin::ScaledStable { lambda } => format!("scaled-stable(λ={lambda})"),
        }
    }

    /// Closed-form family on the rate's domain.
    pub fn closed_form(&self, rate: &GrowthRate) -> EvolutionFamily {
        let sys = self.clone();
        let h = rate.clone();
        let sigma = move |t: f64| h.sigma_of_t(t).unwrap_or(f64::NAN);
        EvolutionFamily::closed_form(self.label(), self.dim(), rate.a0(), move |t, s| {
            let delta = sigma(t) - sigma(s);
            match &sys {
                Builtin::ScalarStable { lambda } => diag(&[(-lambda * delta).exp()]),
                Builtin::DiagHyperbolic { lambda } => diag(&[(-lambda * delta).exp(), (lambda * delta).exp()]),
                Builtin::Neutral { lambda } => diag(&[(-lambda * delta).exp(), 1.0]),
                Builtin::Rotation { omega } => rotation2(-omega * (t - s)),
                Builtin::Identity { dim } => Matrix::identity(*dim, *dim),
                Builtin::RotatedHyperbolic { lambda, angle } => {
                    let r = rotation2(*angle);
                    &r * diag(&[(-lambda * delta).exp(), (lambda * delta).exp()]) * r.transpose()
                }
                Builtin::ScaledStable { lambda } => diag(&[(-lambda * delta).exp() * g(t) / g(s)]),
            }
        })
    }

    /// `A(t)` whose fundamental solution reproduces [`Builtin::closed_form`].
    pub fn generator(&self, rate: &GrowthRate) -> impl Fn(f64) -> Matrix + Send + Sync + 'static {
        let sys = self.clone();
        let h = rate.clone();
        move |t: f64| {
            let r = h.log_derivative(t).unwrap_or(f64::NAN);
            match &sys {
                Builtin::ScalarStable { lambda } => diag(&[-lambda * r]),
                Builtin::DiagHyperbolic { lambda } => diag(&[-lambda * r, lambda * r]),
                Builtin::Neutral { lambda } => diag(&[-lambda * r, 0.0]),
                Builtin::Rotation { omega } => Matrix::from_row_slice(2, 2, &[0.0, *omega, -omega, 0.0]),
                Builtin::Identity { dim } => Matrix::zeros(*dim, *dim),
                Builtin::RotatedHyperbolic { lambda, angle } => {
                    let rot = rotation2(*angle);
                    &rot * diag(&[-lambda * r, lambda * r]) * rot.transpose()
                }
                Builtin::ScaledStable { lambda } => diag(&[-lambda * r + g_log_derivative(t)]),
            }
        }
    }

    /// ODE-generated family with RK4 step `step`, integrated from `origin`.
    pub fn ode(&self, rate: &GrowthRate, origin: f64, step: f64) -> Result<EvolutionFamily> {
        make_ode_family_at(format!("{}[ode]", self.label()), self.dim(), rate.a0(), origin, step, self.generator(rate))
    }
}

pub fn scalar_stable(rate: &GrowthRate, lambda: f64) -> EvolutionFamily {
    Builtin::ScalarStable { lambda }.closed_form(rate)
}

pub fn diag_hyperbolic(rate: &GrowthRate, lambda: f64) -> EvolutionFamily {
    Builtin::DiagHyperbolic { lambda }.closed_form(rate)
}

pub fn neutral(rate: &GrowthRate, lambda: f64) -> EvolutionFamily {
    Builtin::Neutral { lambda }.closed_form(rate)
}

pub fn rotation(rate: &GrowthRate, omega: f64) -> EvolutionFamily {
    Builtin::Rotation { omega }.closed_form(rate)
}

pub fn identity(rate: &GrowthRate, dim: usize) -> EvolutionFamily {
    Builtin::Identity { dim }.closed_form(rate)
}
