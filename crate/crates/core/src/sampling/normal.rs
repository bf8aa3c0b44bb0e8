use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// `mean + std * Phi^-1(u)`.
pub fn to_gaussian(u: f64, mean: f64, std: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::OutsideUnitInterval(u));
    }
    Ok(mean + std * standard_normal().inverse_cdf(u))
}

pub fn standard_normal() -> Normal {
    Normal::standard()
}
