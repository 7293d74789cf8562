//! Closed-form lower bounds for the Diederich–Fornæss index.

use crate::{Error, Result};

/// Oka index of the Fubini–Study signed distance of a pseudoconvex domain
/// in `CP^n` (Takeuchi's constant).
pub const TAKEUCHI_K: f64 = 1.0 / 12.0;

/// `I₀ = max{min{K/(8S²), 1/2}, 1 − 2S²/K}`, with `I₀ = 1` when `S = 0`.
pub fn i0_lower_bound(k: f64, s: f64) -> Result<f64> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::InvalidParameter(format!("K must be positive, got {k}")));
    }
    if !(s >= 0.0 && s.is_finite()) {
        return Err(Error::InvalidParameter(format!("S must be nonnegative, got {s}")));
    }
    if s == 0.0 {
        return Ok(1.0);
    }
    let s2 = s * s;
    let first = (k / (8.0 * s2)).min(0.5);
    let second = 1.0 - 2.0 * s2 / k;
    Ok(first.max(second))
}

/// The bound for domains in `CP^n`, i.e. [`i0_lower_bound`] with `K = 1/12`.
pub fn i0_cpn(s: f64) -> Result<f64> {
    i0_lower_bound(TAKEUCHI_K, s)
}

/// `max{min{1/(8(K₁−1)), 1/2}, 3 − 2K₁}` for `K₁ ≥ 1`; the first branch is
/// `+∞` at `K₁ = 1`.
pub fn i0_key_bound(k1: f64) -> Result<f64> {
    if !(k1 >= 1.0 && k1.is_finite()) {
        return Err(Error::InvalidParameter(format!("K1 must be at least 1, got {k1}")));
    }
    if k1 == 1.0 {
        return Ok(1.0);
    }
    let first = (1.0 / (8.0 * (k1 - 1.0))).min(0.5);
    Ok(first.max(3.0 - 2.0 * k1))
}
