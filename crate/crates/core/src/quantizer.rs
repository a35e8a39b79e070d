//! Memoryless complex quantizers: the sign quantizer and the uniform midrise
//! quantizer, applied separately to the real and imaginary parts.

use num_complex::Complex64;

use crate::channel::RxBlock;
use crate::config::{AdcSpec, StepPolicy, ValidatedConfig};
use crate::dft::Dft;
use crate::error::ConfigError;
use crate::special::normal_quantile;

/// `sign(x)` with `sign(0) = +1`.
pub fn sign(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// `sign(Re z) + j sign(Im z)`.
pub fn sign_complex(z: Complex64) -> Complex64 {
    Complex64::new(sign(z.re), sign(z.im))
}

/// Uniform midrise quantizer with `2^q` levels `ℓ_i = Δ(i - L'/2 + 1/2)`
/// and thresholds `b_i = Δ(i - L'/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MidriseCodec {
    bits: u32,
    step: f64,
}

impl MidriseCodec {
    pub fn new(bits: u32, step: f64) -> Result<Self, ConfigError> {
        if !(1..=16).contains(&bits) {
            return Err(ConfigError::InvalidBits(bits));
        }
        if !(step > 0.0 && step.is_finite()) {
            return Err(ConfigError::InvalidParameter {
                name: "adc.step",
                what: "positive and finite",
                value: step,
            });
        }
        Ok(MidriseCodec { bits, step })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// `L' = 2^q`.
    pub fn level_count(&self) -> usize {
        1usize << self.bits
    }

    pub fn level(&self, i: usize) -> f64 {
        self.step * (i as f64 - self.level_count() as f64 / 2.0 + 0.5)
    }

    pub fn levels(&self) -> Vec<f64> {
        (0..self.level_count()).map(|i| self.level(i)).collect()
    }

    /// `b_i` for `i = 0..=L'`, with `b_0 = -∞` and `b_{L'} = +∞`.
    pub fn threshold(&self, i: usize) -> f64 {
        let l = self.level_count();
        if i == 0 {
            f64::NEG_INFINITY
        } else if i >= l {
            f64::INFINITY
        } else {
            self.step * (i as f64 - l as f64 / 2.0)
        }
    }

    /// The finite thresholds `b_1..b_{L'-1}`.
    pub fn thresholds(&self) -> Vec<f64> {
        (1..self.level_count()).map(|i| self.threshold(i)).collect()
    }

    /// Index of the cell `[b_i, b_{i+1})` containing `x`.
    pub fn cell(&self, x: f64) -> usize {
        let l = self.level_count();
        let i = (x / self.step + l as f64 / 2.0).floor();
        i.clamp(0.0, (l - 1) as f64) as usize
    }

    pub fn quantize_real(&self, x: f64) -> f64 {
        self.level(self.cell(x))
    }

    pub fn quantize(&self, z: Complex64) -> Complex64 {
        Complex64::new(self.quantize_real(z.re), self.quantize_real(z.im))
    }

    /// Edge of the granular region, `A_max = Δ L' / 2`.
    pub fn a_max(&self) -> f64 {
        self.step * self.level_count() as f64 / 2.0
    }
}

/// Amplitude exceeded with total probability `clip_prob` by a real zero-mean
/// Gaussian of variance `avg_rx_power / 2`.
pub fn clip_amplitude(avg_rx_power: f64, clip_prob: f64) -> Result<f64, ConfigError> {
    if !(clip_prob > 0.0 && clip_prob < 1.0) {
        return Err(ConfigError::InvalidClipProb(clip_prob));
    }
    Ok((avg_rx_power / 2.0).sqrt() * normal_quantile(1.0 - clip_prob / 2.0))
}

/// Step size from the ADC policy: `Δ = 2 A_max / L'` for the clip-probability
/// rule, or the explicit step.
pub fn choose_step_size(adc: &AdcSpec, avg_rx_power: f64) -> Result<MidriseCodec, ConfigError> {
    let step = match adc.step {
        StepPolicy::Explicit(step) => step,
        StepPolicy::ClipProbability(p) => {
            2.0 * clip_amplitude(avg_rx_power, p)? / adc.levels() as f64
        }
    };
    MidriseCodec::new(adc.bits, step)
}

/// An ADC model applied per antenna and sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Quantizer {
    OneBit,
    Midrise(MidriseCodec),
    /// Infinite resolution (diagnostics only).
    Bypass,
}

impl Quantizer {
    /// The configured ADC with the step chosen from the ensemble receive power.
    pub fn from_config(cfg: &ValidatedConfig) -> Result<Self, ConfigError> {
        if cfg.adc.is_one_bit() {
            Ok(Quantizer::OneBit)
        } else {
            Ok(Quantizer::Midrise(choose_step_size(&cfg.adc, cfg.rx_power())?))
        }
    }

    pub fn apply(&self, z: Complex64) -> Complex64 {
        match self {
            Quantizer::OneBit => sign_complex(z),
            Quantizer::Midrise(c) => c.quantize(z),
            Quantizer::Bypass => z,
        }
    }

    pub fn quantize(&self, r: &RxBlock, dft: &Dft) -> QuantizedBlock {
        let time: Vec<Vec<Complex64>> = r
            .time
            .iter()
            .map(|row| row.iter().map(|&z| self.apply(z)).collect())
            .collect();
        QuantizedBlock::from_time(time, dft)
    }
}

/// Quantized samples `d[n]` and their DFT `d̃[k]`, per antenna.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedBlock {
    pub time: Vec<Vec<Complex64>>,
    pub freq: Vec<Vec<Complex64>>,
}

impl QuantizedBlock {
    pub fn from_time(time: Vec<Vec<Complex64>>, dft: &Dft) -> Self {
        let freq = time.iter().map(|r| dft.forward(r)).collect();
        QuantizedBlock { time, freq }
    }

    pub fn freq_vector(&self, k: usize) -> nalgebra::DVector<Complex64> {
        nalgebra::DVector::from_iterator(self.freq.len(), self.freq.iter().map(|r| r[k]))
    }
}

pub fn quantize_onebit(r: &RxBlock, dft: &Dft) -> QuantizedBlock {
    Quantizer::OneBit.quantize(r, dft)
}

pub fn quantize_midrise(r: &RxBlock, codec: &MidriseCodec, dft: &Dft) -> QuantizedBlock {
    Quantizer::Midrise(*codec).quantize(r, dft)
}
