use crate::{Error, Result};

/// `P(h1 ≥ 0, h2 ≥ 0)` for a centred bivariate Gaussian with correlation `rho`.
///
/// Closed form `1/4 + asin(ρ)/(2π)`.
pub fn bivariate_orthant(rho: f64) -> Result<f64> {
    if !(rho.abs() <= 1.0 + 1e-12) {
        return Err(Error::invalid(format!("correlation {rho} outside [-1, 1]")));
    }
    let rho = rho.clamp(-1.0, 1.0);
    Ok(0.25 + rho.asin() / (2.0 * std::f64::consts::PI))
}
