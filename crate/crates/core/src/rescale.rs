//! Time rescaling `T ↦ T_h`, `T_h(t, s) = T(h⁻¹(eᵗ), h⁻¹(eˢ))`.
//!
//! The rescaled family is graded exponentially: `h`-bounds on `T` over
//! `[a0*, ∞)` become exponential bounds on `T_h` over `[ln h(a0*), ∞)`, and
//! `T(t, s) = T_h(ln h(t), ln h(s))`. Evaluation is lazy, so no
//! re-integration happens and the identity holds to round-off.

use crate::error::{Error, Result};
use crate::family::EvolutionFamily;
use crate::rate::GrowthRate;

/// The exponentially graded family `T_h`, defined for all real times whose
/// preimages `h⁻¹(e^σ)` are representable.
pub fn rescale_family(family: &EvolutionFamily, rate: &GrowthRate) -> Result<EvolutionFamily> {
    let (fa, ra) = (family.a0(), rate.a0());
    let same = fa == ra || (fa.is_infinite() && ra.is_infinite() && fa.signum() == ra.signum());
    if !same {
        return Err(Error::Domain(format!(
            "family {} lives on ({fa}, ∞) but rate {} on ({ra}, ∞)",
            family.name(),
            rate.name()
        )));
    }
    Ok(EvolutionFamily::rescaled(family, rate))
}

/// `σ = ln h(t)`.
pub fn sigma_of_t(rate: &GrowthRate, t: f64) -> Result<f64> {
    rate.sigma_of_t(t)
}

/// `t = h⁻¹(e^σ)`.
pub fn t_of_sigma(rate: &GrowthRate, sigma: f64) -> Result<f64> {
    rate.t_of_sigma(sigma)
}
