//! Exponential and Laplace noise via inverse-CDF sampling.
//!
//! `Exp(rate)` is parameterized by its rate: CDF `1 - exp(-rate * x)` on
//! `[0, inf)`. `Laplace(scale)` is the symmetric distribution with density
//! proportional to `exp(-|x| / scale)`. Both samplers map a single 53-bit
//! uniform through the quantile function, so draws are reproducible across
//! platforms from a [`RandomSource`].

use crate::error::{Error, Result};
use crate::rng::RandomSource;

/// Quantile (inverse CDF) of `Exp(rate)` at `q` in `[0, 1)`.
pub fn exponential_quantile(rate: f64, q: f64) -> f64 {
    -(1.0 - q).ln() / rate
}

/// Quantile of `Laplace(0, scale)` at `q` in `(0, 1)`.
pub fn laplace_quantile(scale: f64, q: f64) -> f64 {
    if q < 0.5 {
        scale * (2.0 * q).ln()
    } else {
        -scale * (2.0 * (1.0 - q)).ln()
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "{name} must be a positive finite real, got {v}"
        )));
    }
    Ok(())
}

/// One draw from `Exp(rate)`. Always nonnegative.
pub fn sample_exponential(rate: f64, rng: &mut RandomSource) -> Result<f64> {
    check_positive("rate", rate)?;
    Ok(exponential_quantile(rate, rng.uniform()))
}

/// One draw from `Laplace(0, scale)`.
pub fn sample_laplace(scale: f64, rng: &mut RandomSource) -> Result<f64> {
    check_positive("scale", scale)?;
    Ok(laplace_quantile(scale, rng.uniform_open()))
}
