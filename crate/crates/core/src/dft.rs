//! DFT conventions used everywhere: forward `Σ x[n] e^{-j2πnk/N}` (unscaled),
//! inverse `(1/N) Σ X[k] e^{+j2πnk/N}`.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

#[derive(Clone)]
pub struct Dft {
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Dft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Dft").field("len", &self.len).finish()
    }
}

impl Dft {
    pub fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        Dft {
            len,
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn forward_in_place(&self, buf: &mut [Complex64]) {
        self.forward.process(buf);
    }

    pub fn forward(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut buf = x.to_vec();
        self.forward.process(&mut buf);
        buf
    }

    /// Unscaled `Σ X[k] e^{+j2πnk/N}`.
    pub fn backward_in_place(&self, buf: &mut [Complex64]) {
        self.inverse.process(buf);
    }

    pub fn inverse(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut buf = x.to_vec();
        self.inverse.process(&mut buf);
        let scale = 1.0 / self.len as f64;
        buf.iter_mut().for_each(|v| *v *= scale);
        buf
    }
}
