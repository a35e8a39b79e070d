//! BER and rate functionals, and Monte-Carlo error counting.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::special::normal_sf;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Gray-coded K-PSK bit error rate at SINDR `gamma`:
/// `(2/log2 K)(1 - Φ(√(γ log2 K) sin(π/K)))`.
pub fn ber_from_sindr(gamma: f64, order: usize) -> f64 {
    let bits = (order as f64).log2();
    let arg = (gamma.max(0.0) * bits).sqrt() * (PI / order as f64).sin();
    (2.0 / bits * normal_sf(arg)).min(0.5)
}

/// `log2(1 + γ)`.
pub fn rate(gamma: f64) -> f64 {
    (1.0 + gamma).log2()
}

/// Mean over realizations of the per-(user, tone) average of `log2(1 + γ)`.
pub fn rate_tight<I, J>(realizations: I) -> f64
where
    I: IntoIterator<Item = J>,
    J: IntoIterator<Item = f64>,
{
    let (sum, count) = realizations
        .into_iter()
        .map(|gammas| {
            let (s, c) = gammas
                .into_iter()
                .fold((0.0, 0usize), |(s, c), g| (s + rate(g), c + 1));
            s / c as f64
        })
        .fold((0.0, 0usize), |(s, c), r| (s + r, c + 1));
    sum / count as f64
}

/// `R' = log2(1 + γ')`, since `γ'` is common to all users and tones.
pub fn rate_approx(gamma: f64) -> f64 {
    rate(gamma)
}

/// Counted bit errors with a Wilson score interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BerEstimate {
    pub errors: u64,
    pub bits: u64,
}

impl BerEstimate {
    pub fn new(errors: u64, bits: u64) -> Self {
        assert!(errors <= bits);
        BerEstimate { errors, bits }
    }

    pub fn value(&self) -> f64 {
        if self.bits == 0 {
            0.0
        } else {
            self.errors as f64 / self.bits as f64
        }
    }

    /// 95% Wilson interval.
    pub fn interval(&self) -> (f64, f64) {
        wilson_interval(self.errors, self.bits, Z95)
    }

    /// Binomial standard error `√(p(1-p)/n)`.
    pub fn stderr(&self) -> f64 {
        if self.bits == 0 {
            return 0.0;
        }
        let p = self.value();
        (p * (1.0 - p) / self.bits as f64).sqrt()
    }

    pub fn merge(self, other: BerEstimate) -> BerEstimate {
        BerEstimate {
            errors: self.errors + other.errors,
            bits: self.bits + other.bits,
        }
    }

    pub fn contains(&self, p: f64) -> bool {
        let (lo, hi) = self.interval();
        lo <= p && p <= hi
    }
}

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Hamming distance between two bit streams.
pub fn count_errors(tx: &[u8], rx: &[u8]) -> Result<BerEstimate> {
    if tx.len() != rx.len() {
        return Err(Error::LengthMismatch(tx.len(), rx.len()));
    }
    let errors = tx.iter().zip(rx).filter(|(a, b)| a != b).count();
    Ok(BerEstimate::new(errors as u64, tx.len() as u64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::normal_quantile;
    use approx::assert_relative_eq;

    #[test]
    fn ber_examples() {
        assert_relative_eq!(ber_from_sindr(0.0, 4), 0.5, epsilon = 1e-15);
        let g = normal_quantile(0.999).powi(2);
        assert_relative_eq!(g, 9.55, epsilon = 0.01);
        assert_relative_eq!(ber_from_sindr(g, 4), 1e-3, max_relative = 1e-9);
        assert_eq!(ber_from_sindr(f64::INFINITY, 4), 0.0);
        for k in [2, 4, 8, 16] {
            let mut last = 1.0;
            for i in 0..400 {
                let b = ber_from_sindr(i as f64 * 0.1, k);
                assert!(b <= last);
                last = b;
            }
        }
    }

    #[test]
    fn rate_examples() {
        assert_eq!(rate_tight(vec![vec![1.0; 4]]), 1.0);
        assert_eq!(rate_tight(vec![vec![0.0; 4]]), 0.0);
        assert_relative_eq!(rate_tight(vec![vec![1.0, 3.0]]), 1.5, epsilon = 1e-15);
        assert_eq!(rate_approx(1.0), 1.0);
        assert_eq!(rate_approx(3.0), 2.0);
    }

    #[test]
    fn rate_is_concave_increasing() {
        let h = 1e-3;
        for i in 1..100 {
            let g = i as f64 * 0.3;
            let d1 = rate(g + h) - rate(g);
            let d2 = rate(g + h) - 2.0 * rate(g) + rate(g - h);
            assert!(d1 > 0.0 && d2 < 0.0);
        }
    }

    #[test]
    fn error_counting() {
        let tx: Vec<u8> = (0..1000).map(|i| (i % 2) as u8).collect();
        assert_eq!(count_errors(&tx, &tx).unwrap().value(), 0.0);
        let inv: Vec<u8> = tx.iter().map(|b| 1 - b).collect();
        assert_eq!(count_errors(&tx, &inv).unwrap().value(), 1.0);
        let mut rx = tx.clone();
        for i in [3, 100, 101, 555, 999] {
            rx[i] ^= 1;
        }
        let e = count_errors(&tx, &rx).unwrap();
        assert_eq!(e.value(), 0.005);
        let (lo, hi) = e.interval();
        assert_relative_eq!(lo, 0.002137, epsilon = 1e-5);
        assert_relative_eq!(hi, 0.011651, epsilon = 1e-5);
        assert!(e.contains(0.005));
        assert!(matches!(count_errors(&tx, &rx[1..]), Err(Error::LengthMismatch(1000, 999))));
    }
}
