//! Numerical checks for nonuniform hyperbolicity of invertible evolution
//! families on ℝⁿ under a general growth rate `h`.
//!
//! A family `T(t, s)` is sampled on grids that are uniform in `σ = ln h(t)`.
//! Three equivalent properties can be estimated and verified: the
//! h-dichotomy, h-expansiveness and uniform h-noncriticality. Time
//! rescaling (`rescale_family`) maps every `h`-statement to the
//! exponential case, and `construct` builds projections and dichotomy
//! constants from noncriticality data.

// `!(x > 0.0)` is used on purpose so that NaN is rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checkers;
pub mod cli;
pub mod construct;
pub mod error;
pub mod family;
pub mod grid;
pub mod linalg;
pub mod ode;
pub mod rate;
pub mod rescale;
pub mod sphere;
pub mod systems;

pub use error::{Error, Result};
pub use family::{EvolutionFamily, FamilyKind};
pub use grid::SigmaGrid;
pub use ode::{make_ode_family, make_ode_family_at};
pub use rate::GrowthRate;
pub use rescale::rescale_family;
