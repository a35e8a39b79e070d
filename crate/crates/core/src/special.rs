//! Standard normal distribution helpers.

use statrs::distribution::{ContinuousCDF, Normal};

fn standard() -> Normal {
    Normal::standard()
}

/// `Φ(x)`.
pub fn normal_cdf(x: f64) -> f64 {
    if x == f64::INFINITY {
        1.0
    } else if x == f64::NEG_INFINITY {
        0.0
    } else {
        standard().cdf(x)
    }
}

/// Upper tail `Q(x) = 1 - Φ(x)`, accurate for large `x`.
pub fn normal_sf(x: f64) -> f64 {
    if x == f64::INFINITY {
        0.0
    } else if x == f64::NEG_INFINITY {
        1.0
    } else {
        standard().sf(x)
    }
}

/// `Φ⁻¹(p)` for `p` in `(0, 1)`.
pub fn normal_quantile(p: f64) -> f64 {
    standard().inverse_cdf(p)
}
