use crate::error::{Error, Result};

/// Check function `ρ_τ(t) = (τ − 1{t ≤ 0}) t`.
pub fn check_loss(t: f64, tau: f64) -> Result<f64> {
    if !t.is_finite() {
        return Err(Error::InvalidParameter(format!("check loss argument {t} is not finite")));
    }
    Ok(if t > 0.0 { tau * t } else { (tau - 1.0) * t })
}

/// Asymmetric squared loss used by expectile regression:
/// `τ̃ t²` for `t > 0`, `(1 − τ̃) t²` otherwise.
pub fn expectile_loss(t: f64, tilde_tau: f64) -> Result<f64> {
    if !t.is_finite() {
        return Err(Error::InvalidParameter(format!("expectile loss argument {t} is not finite")));
    }
    let w = if t > 0.0 { tilde_tau } else { 1.0 - tilde_tau };
    Ok(w * t * t)
}
