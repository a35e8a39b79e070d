//! Gray-labelled PSK alphabets.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::ConfigError;

pub const SUPPORTED_ORDERS: [usize; 4] = [2, 4, 8, 16];

/// Unit-modulus K-PSK with binary-reflected Gray labels.
///
/// Point `i` sits at angle `2πi/K + offset` and carries label `i ^ (i >> 1)`,
/// so neighbours on the circle differ in exactly one bit. BPSK uses no offset
/// (points ±1); higher orders are rotated by π/K (QPSK at ±45°, ±135°).
#[derive(Debug, Clone, PartialEq)]
pub struct Psk {
    order: usize,
    offset: f64,
    points: Vec<Complex64>,
    labels: Vec<u32>,
}

pub fn psk_constellation(order: usize) -> Result<Psk, ConfigError> {
    if !SUPPORTED_ORDERS.contains(&order) {
        return Err(ConfigError::UnsupportedOrder(order));
    }
    let offset = if order == 2 { 0.0 } else { PI / order as f64 };
    let points = (0..order)
        .map(|i| Complex64::from_polar(1.0, 2.0 * PI * i as f64 / order as f64 + offset))
        .collect();
    let labels = (0..order as u32).map(|i| i ^ (i >> 1)).collect();
    Ok(Psk {
        order,
        offset,
        points,
        labels,
    })
}

impl Psk {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.order.trailing_zeros() as usize
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn point(&self, index: usize) -> Complex64 {
        self.points[index]
    }

    pub fn label(&self, index: usize) -> u32 {
        self.labels[index]
    }

    /// Index of the point closest to `x`. Only the phase matters for PSK.
    pub fn slice(&self, x: Complex64) -> usize {
        let k = self.order as f64;
        let pos = (x.arg() - self.offset) * k / (2.0 * PI);
        (pos.round() as i64).rem_euclid(self.order as i64) as usize
    }

    /// Appends the label bits of point `index`, MSB first.
    pub fn push_bits(&self, index: usize, out: &mut Vec<u8>) {
        let label = self.labels[index];
        for b in (0..self.bits_per_symbol()).rev() {
            out.push(((label >> b) & 1) as u8);
        }
    }
}
