//! Bussgang linearization of the quantized receive signal and the covariance
//! machinery behind it: per-tone receive covariances, their lag-domain
//! counterparts, the arcsine law and the per-tone distortion covariance.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::channel::ChannelRealization;
use crate::config::ValidatedConfig;
use crate::dft::Dft;
use crate::error::{Error, Result};
use crate::quantizer::{MidriseCodec, Quantizer};
use crate::special::normal_cdf;
use crate::CMat;

/// Distortion variance of a one-bit quantizer with unit-variance input, `2 - 4/π`.
pub const ONE_BIT_DISTORTION: f64 = 2.0 - 4.0 / PI;

/// Which tones carry thermal noise in [`freq_covariance`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseSupport {
    /// White noise on every tone, as generated by the simulator.
    #[default]
    AllTones,
    /// Noise only on occupied tones; unoccupied tones get a zero covariance.
    OccupiedOnly,
}

/// Per-tone receive covariances `C_r̃[k]`, `k = 0..N`.
#[derive(Debug, Clone, PartialEq)]
pub struct FreqCovarianceSet {
    mats: Vec<CMat>,
}

impl FreqCovarianceSet {
    pub fn new(mats: Vec<CMat>) -> Self {
        assert!(!mats.is_empty());
        FreqCovarianceSet { mats }
    }

    pub fn len(&self) -> usize {
        self.mats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mats.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.mats[0].nrows()
    }

    pub fn get(&self, k: usize) -> &CMat {
        &self.mats[k]
    }

    pub fn mats(&self) -> &[CMat] {
        &self.mats
    }
}

/// `C_r̃[k] = ρ² N H̃[k] H̃[k]^H + N N_o I` with `ρ_d` and the desired users'
/// columns on `K_D`, `ρ_i` and the interferers' columns on `K_I`.
pub fn freq_covariance(
    ch: &ChannelRealization,
    cfg: &ValidatedConfig,
    support: NoiseSupport,
) -> FreqCovarianceSet {
    let n = cfg.fft_size;
    let m = cfg.antennas;
    let nf = n as f64;
    let noise = CMat::identity(m, m) * Complex64::new(nf * cfg.noise_var, 0.0);
    let mut mats = vec![
        match support {
            NoiseSupport::AllTones => noise.clone(),
            NoiseSupport::OccupiedOnly => CMat::zeros(m, m),
        };
        n
    ];
    let mut fill = |tones: &[usize], cols: std::ops::Range<usize>, rho: f64| {
        for &k in tones {
            let h = ch.freq()[k].columns(cols.start, cols.len());
            let hh = h * h.adjoint();
            mats[k] = hh * Complex64::new(rho * rho * nf, 0.0) + &noise;
        }
    };
    fill(cfg.desired_tones(), 0..cfg.users, cfg.rho_d);
    fill(
        cfg.interfering_tones(),
        cfg.users..cfg.total_users(),
        cfg.rho_i,
    );
    FreqCovarianceSet::new(mats)
}

/// Applies `transform` to the length-N sequence of every matrix entry.
fn entrywise(mats: &[CMat], transform: impl Fn(&mut [Complex64])) -> Vec<CMat> {
    let n = mats.len();
    let (rows, cols) = mats[0].shape();
    let mut out = vec![CMat::zeros(rows, cols); n];
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for i in 0..rows {
        for j in 0..cols {
            for (b, m) in buf.iter_mut().zip(mats) {
                *b = m[(i, j)];
            }
            transform(&mut buf);
            for (o, b) in out.iter_mut().zip(&buf) {
                o[(i, j)] = *b;
            }
        }
    }
    out
}

/// `C_r[m] = (1/N²) Σ_k C_r̃[k] e^{j2πmk/N}` for one lag, by direct summation.
pub fn prop1_lag_covariance(fc: &FreqCovarianceSet, m: usize) -> CMat {
    let n = fc.len();
    let mut acc = CMat::zeros(fc.dim(), fc.dim());
    for (k, c) in fc.mats().iter().enumerate() {
        let phase = 2.0 * PI * ((m * k) % n) as f64 / n as f64;
        acc += c * Complex64::from_polar(1.0, phase);
    }
    acc / Complex64::new((n * n) as f64, 0.0)
}

/// `C_r[m]` for every lag `m = 0..N`, by one inverse FFT per matrix entry.
pub fn lag_covariances(fc: &FreqCovarianceSet) -> Vec<CMat> {
    let n = fc.len();
    let dft = Dft::new(n);
    let scale = 1.0 / (n * n) as f64;
    entrywise(fc.mats(), |buf| {
        dft.backward_in_place(buf);
        buf.iter_mut().for_each(|v| *v *= scale);
    })
}

/// Per-antenna variances `diag(C_r[0])`, all required to be positive.
fn checked_diagonal(c_r0: &CMat) -> Result<DVector<f64>> {
    let d = DVector::from_iterator(c_r0.nrows(), c_r0.diagonal().iter().map(|v| v.re));
    for (index, &value) in d.iter().enumerate() {
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::SingularInput { index, value });
        }
    }
    Ok(d)
}

/// One-bit gain `√(4/π) diag(C_r[0])^{-1/2}`, as the diagonal entries.
pub fn gain_onebit(c_r0: &CMat) -> Result<DVector<f64>> {
    Ok(checked_diagonal(c_r0)?.map(|s| (4.0 / PI).sqrt() / s.sqrt()))
}

/// Midrise gain for a circular Gaussian input of complex variance `sigma2`:
/// `(Δ/(√π σ)) Σ_{i=1}^{L'-1} exp(-b_i²/σ²)`.
pub fn multibit_gain(codec: &MidriseCodec, sigma2: f64) -> f64 {
    let sigma = sigma2.sqrt();
    let sum: f64 = codec
        .thresholds()
        .iter()
        .map(|b| (-b * b / sigma2).exp())
        .sum();
    codec.step() / (PI.sqrt() * sigma) * sum
}

pub fn gain_multibit(c_r0: &CMat, codec: &MidriseCodec) -> Result<DVector<f64>> {
    Ok(checked_diagonal(c_r0)?.map(|s| multibit_gain(codec, s)))
}

/// `E|d|² = 2 Σ_i ℓ_i² (Φ(√2 b_{i+1}/σ) - Φ(√2 b_i/σ))` for a circular Gaussian
/// input of complex variance `sigma2`.
pub fn multibit_output_power(codec: &MidriseCodec, sigma2: f64) -> f64 {
    let sigma = sigma2.sqrt();
    let cdf = |b: f64| normal_cdf(2f64.sqrt() * b / sigma);
    2.0 * (0..codec.level_count())
        .map(|i| {
            let l = codec.level(i);
            l * l * (cdf(codec.threshold(i + 1)) - cdf(codec.threshold(i)))
        })
        .sum::<f64>()
}

/// Per-antenna distortion variance `E|d|² - A² σ²` of the midrise quantizer.
pub fn multibit_distortion(codec: &MidriseCodec, sigma2: f64) -> f64 {
    let a = multibit_gain(codec, sigma2);
    (multibit_output_power(codec, sigma2) - a * a * sigma2).max(0.0)
}

const ASIN_TOLERANCE: f64 = 1e-9;

fn checked_asin(x: f64, row: usize, col: usize) -> Result<f64> {
    if !x.is_finite() || x.abs() > 1.0 + ASIN_TOLERANCE {
        return Err(Error::DomainError {
            row,
            col,
            value: x,
        });
    }
    Ok(x.clamp(-1.0, 1.0).asin())
}

/// Sign-quantizer output covariance at one lag,
/// `(4/π)(asin(D^{-1/2} Re C_r[m] D^{-1/2}) + j asin(D^{-1/2} Im C_r[m] D^{-1/2}))`,
/// with `D = diag(C_r[0])`.
pub fn arcsine_law(c_r0: &CMat, c_rm: &CMat) -> Result<CMat> {
    let d = checked_diagonal(c_r0)?;
    let inv = d.map(|v| 1.0 / v.sqrt());
    let m = c_rm.nrows();
    let mut out = CMat::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            let z = c_rm[(i, j)] * (inv[i] * inv[j]);
            out[(i, j)] = Complex64::new(checked_asin(z.re, i, j)?, checked_asin(z.im, i, j)?)
                * (4.0 / PI);
        }
    }
    Ok(out)
}

/// `C_q[m] = C_d[m] - A C_r[m] A` for a real diagonal `A`.
pub fn quant_noise_lag(c_d: &CMat, gain: &DVector<f64>, c_r: &CMat) -> CMat {
    let m = c_r.nrows();
    CMat::from_fn(m, m, |i, j| c_d[(i, j)] - c_r[(i, j)] * (gain[i] * gain[j]))
}

/// Lag-domain covariances of the receive signal, the sign-quantizer output and
/// its distortion.
#[derive(Debug, Clone, PartialEq)]
pub struct LagCovarianceSet {
    pub c_r: Vec<CMat>,
    pub c_d: Vec<CMat>,
    pub c_q: Vec<CMat>,
    pub gain: DVector<f64>,
}

/// All lag covariances for a one-bit ADC.
pub fn onebit_lag_covariances(fc: &FreqCovarianceSet) -> Result<LagCovarianceSet> {
    let c_r = lag_covariances(fc);
    let gain = gain_onebit(&c_r[0])?;
    let c_d = c_r
        .iter()
        .map(|c| arcsine_law(&c_r[0], c))
        .collect::<Result<Vec<_>>>()?;
    let c_q = c_d
        .iter()
        .zip(&c_r)
        .map(|(d, r)| quant_noise_lag(d, &gain, r))
        .collect();
    Ok(LagCovarianceSet {
        c_r,
        c_d,
        c_q,
        gain,
    })
}

/// `C_q[k] = DFT{Γ}[k] + DFT{Γ}[k]^H - N C_q[0]` with `Γ[m] = (N-m) C_q[m]`,
/// for one tone, by direct summation.
pub fn prop2_freq_quant_cov(c_q: &[CMat], k: usize) -> CMat {
    let n = c_q.len();
    let dim = c_q[0].nrows();
    let mut f = CMat::zeros(dim, dim);
    for (m, c) in c_q.iter().enumerate() {
        let phase = -2.0 * PI * ((m * k) % n) as f64 / n as f64;
        f += c * Complex64::from_polar((n - m) as f64, phase);
    }
    let adj = f.adjoint();
    f + adj - &c_q[0] * Complex64::new(n as f64, 0.0)
}

/// [`prop2_freq_quant_cov`] for every tone, with one FFT per matrix entry.
pub fn prop2_all_tones(c_q: &[CMat]) -> Vec<CMat> {
    let n = c_q.len();
    let dft = Dft::new(n);
    let gamma: Vec<CMat> = c_q
        .iter()
        .enumerate()
        .map(|(m, c)| c * Complex64::new((n - m) as f64, 0.0))
        .collect();
    let f = entrywise(&gamma, |buf| dft.forward_in_place(buf));
    let lag0 = &c_q[0] * Complex64::new(n as f64, 0.0);
    f.into_iter().map(|x| &x + x.adjoint() - &lag0).collect()
}

/// Ensemble-average scalars: the data-phase receive power `μ`, the data-phase gain
/// `G`, and for one-bit ADCs the pilot-phase power and gain `G'`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarGains {
    pub mu: f64,
    pub g: f64,
    pub mu_pilot: f64,
    pub g_pilot: f64,
    /// Per-antenna distortion variance at power `μ`.
    pub distortion: f64,
}

/// `G = 2/√π μ^{-1/2}` (or the midrise gain at `μ`), `G' = 2/√π μ_p^{-1/2}`.
pub fn scalar_gains(cfg: &ValidatedConfig) -> Result<ScalarGains, crate::error::ConfigError> {
    let mu = cfg.rx_power();
    let mu_pilot = cfg.pilot_rx_power();
    let onebit = |p: f64| 2.0 / PI.sqrt() / p.sqrt();
    let (g, distortion) = match Quantizer::from_config(cfg)? {
        Quantizer::Midrise(codec) => (multibit_gain(&codec, mu), multibit_distortion(&codec, mu)),
        _ => (onebit(mu), ONE_BIT_DISTORTION),
    };
    Ok(ScalarGains {
        mu,
        g,
        mu_pilot,
        g_pilot: onebit(mu_pilot),
        distortion,
    })
}

/// Linear model `d̃[k] = A r̃[k] + q̃[k]`: the diagonal gain and per-tone `C_q[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BussgangModel {
    pub gain: DVector<f64>,
    pub c_q: Vec<CMat>,
}

impl BussgangModel {
    /// Exact one-bit model from the realization's covariances.
    pub fn one_bit(fc: &FreqCovarianceSet) -> Result<Self> {
        let lags = onebit_lag_covariances(fc)?;
        Ok(BussgangModel {
            c_q: prop2_all_tones(&lags.c_q),
            gain: lags.gain,
        })
    }

    /// Midrise model with uncorrelated distortion across lags and antennas:
    /// `C_q[k] = N diag(E|d_m|² - A_mm² σ_m²)` on every tone.
    pub fn multi_bit(fc: &FreqCovarianceSet, codec: &MidriseCodec) -> Result<Self> {
        let c_r0 = lag_covariances(fc).swap_remove(0);
        let sig = checked_diagonal(&c_r0)?;
        let gain = sig.map(|s| multibit_gain(codec, s));
        let n = fc.len() as f64;
        let diag = DVector::from_iterator(
            sig.len(),
            sig.iter()
                .map(|&s| Complex64::new(n * multibit_distortion(codec, s), 0.0)),
        );
        let cq = CMat::from_diagonal(&diag);
        Ok(BussgangModel {
            gain,
            c_q: vec![cq; fc.len()],
        })
    }

    /// Realization-independent model `A = G I`, `C_q[k] = N d I` with the
    /// ensemble gain `G` and distortion variance `d`.
    pub fn ensemble(cfg: &ValidatedConfig) -> Result<Self> {
        let s = scalar_gains(cfg)?;
        let m = cfg.antennas;
        let n = cfg.fft_size as f64;
        Ok(BussgangModel {
            gain: DVector::from_element(m, s.g),
            c_q: vec![CMat::identity(m, m) * Complex64::new(n * s.distortion, 0.0); cfg.fft_size],
        })
    }

    /// No quantizer: `A = I`, `C_q = 0`.
    pub fn bypass(antennas: usize, n: usize) -> Self {
        BussgangModel {
            gain: DVector::from_element(antennas, 1.0),
            c_q: vec![CMat::zeros(antennas, antennas); n],
        }
    }

    /// The exact model matching a quantizer.
    pub fn for_quantizer(fc: &FreqCovarianceSet, quantizer: &Quantizer) -> Result<Self> {
        match quantizer {
            Quantizer::OneBit => Self::one_bit(fc),
            Quantizer::Midrise(codec) => Self::multi_bit(fc, codec),
            Quantizer::Bypass => Ok(Self::bypass(fc.dim(), fc.len())),
        }
    }

    /// `A` as a dense matrix.
    pub fn gain_matrix(&self) -> CMat {
        DMatrix::from_diagonal(&self.gain.map(|g| Complex64::new(g, 0.0)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{complex_gaussian, draw_channel, PowerDelayProfile};
    use crate::config::{validate_config, Band, SystemConfig};
    use crate::quantizer::sign_complex;
    use crate::rng::{Purpose, RngStream};
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn eye(m: usize, v: f64) -> CMat {
        CMat::identity(m, m) * c(v, 0.0)
    }

    fn max_abs(a: &CMat) -> f64 {
        a.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    fn small_cfg() -> ValidatedConfig {
        let mut cfg = SystemConfig::desk();
        cfg.antennas = 3;
        cfg.users = 1;
        cfg.interferers = 1;
        cfg.fft_size = 16;
        cfg.taps = 2;
        cfg.cp_len = 2;
        cfg.desired_band = Band::range_excluding(-3, 3, &[0]);
        cfg.interfering_band = Band::range_excluding(5, 9, &[]);
        cfg.pilot.length = 16;
        cfg.pilot.tones = Band::range_excluding(-3, 3, &[0]);
        validate_config(cfg).unwrap()
    }

    #[test]
    fn freq_covariance_structure() {
        let cfg = small_cfg();
        let mut rng = RngStream::new(1, 0, Purpose::Channel).rng();
        let ch = draw_channel(&cfg, &PowerDelayProfile::uniform(cfg.taps), &mut rng);
        let literal = freq_covariance(&ch, &cfg, NoiseSupport::OccupiedOnly);
        let white = freq_covariance(&ch, &cfg, NoiseSupport::AllTones);
        // tone 4 is in neither band
        assert_eq!(max_abs(literal.get(4)), 0.0);
        assert_relative_eq!(white.get(4)[(0, 0)].re, 16.0 * cfg.noise_var, epsilon = 1e-12);
        for k in 0..16 {
            let c = white.get(k);
            assert!(max_abs(&(c - c.adjoint())) < 1e-12);
            let eig = nalgebra::linalg::SymmetricEigen::new(c.clone()).eigenvalues;
            assert!(eig.iter().all(|&e| e > -1e-9));
        }
    }

    #[test]
    fn scalar_single_antenna_covariance() {
        let mut cfg = SystemConfig::desk();
        cfg.antennas = 2;
        cfg.users = 1;
        cfg.interferers = 0;
        cfg.interfering_band = Band::empty();
        cfg.taps = 1;
        cfg.cp_len = 1;
        let cfg = validate_config(cfg).unwrap();
        let ones = DMatrix::from_element(2, 1, c(1.0, 0.0));
        let ch = ChannelRealization::from_taps(vec![ones], cfg.fft_size);
        let fc = freq_covariance(&ch, &cfg, NoiseSupport::OccupiedOnly);
        let k = cfg.desired_tones()[0];
        let n = cfg.fft_size as f64;
        assert_relative_eq!(fc.get(k)[(0, 0)].re, n * (1.0 + cfg.noise_var), epsilon = 1e-9);
    }

    #[test]
    fn two_point_transform() {
        let fc = FreqCovarianceSet::new(vec![eye(2, 2.0), eye(2, 2.0)]);
        let lags = lag_covariances(&fc);
        assert!(max_abs(&(&lags[0] - eye(2, 1.0))) < 1e-15);
        assert!(max_abs(&lags[1]) < 1e-15);
        assert!(max_abs(&(prop1_lag_covariance(&fc, 0) - eye(2, 1.0))) < 1e-15);
    }

    #[test]
    fn lag_fft_matches_direct_sum() {
        let cfg = small_cfg();
        let mut rng = RngStream::new(2, 0, Purpose::Channel).rng();
        let ch = draw_channel(&cfg, &PowerDelayProfile::uniform(cfg.taps), &mut rng);
        let fc = freq_covariance(&ch, &cfg, NoiseSupport::AllTones);
        let lags = lag_covariances(&fc);
        for (m, l) in lags.iter().enumerate() {
            let direct = prop1_lag_covariance(&fc, m);
            assert!(max_abs(&(l - &direct)) < 1e-12 * max_abs(&lags[0]));
        }
        // conjugate-lag symmetry of a periodic sequence
        for m in 1..16 {
            assert!(max_abs(&(&lags[16 - m] - lags[m].adjoint())) < 1e-12);
        }
    }

    #[test]
    fn onebit_gain_examples() {
        let a = gain_onebit(&eye(2, 1.0)).unwrap();
        assert_relative_eq!(a[0], 2.0 / PI.sqrt(), epsilon = 1e-15);
        let b = gain_onebit(&eye(2, 4.0)).unwrap();
        assert_relative_eq!(b[1], a[1] / 2.0, epsilon = 1e-15);
        let mut bad = eye(2, 1.0);
        bad[(1, 1)] = c(0.0, 0.0);
        assert!(matches!(gain_onebit(&bad), Err(Error::SingularInput { index: 1, .. })));
    }

    #[test]
    fn multibit_gain_collapses_to_onebit() {
        let q1 = MidriseCodec::new(1, 2.0).unwrap();
        for s2 in [0.3, 1.0, 7.0] {
            assert_relative_eq!(multibit_gain(&q1, s2), 2.0 / (PI * s2).sqrt(), epsilon = 1e-14);
            assert_relative_eq!(multibit_output_power(&q1, s2), 2.0, epsilon = 1e-14);
        }
        let fine = crate::quantizer::choose_step_size(
            &crate::config::AdcSpec::midrise(6, 0.01),
            1.0,
        )
        .unwrap();
        let g = multibit_gain(&fine, 1.0);
        assert!(g > 0.95 && g < 1.0, "{g}");
    }

    #[test]
    fn fine_quantizer_preserves_power() {
        let q = MidriseCodec::new(8, 0.02).unwrap();
        assert_relative_eq!(multibit_output_power(&q, 1.0), 1.0, epsilon = 1e-3);
    }

    #[test]
    fn output_power_monotone_in_sigma() {
        let q = MidriseCodec::new(3, 0.5).unwrap();
        let mut last = 0.0;
        for i in 1..200 {
            let p = multibit_output_power(&q, (i as f64 * 0.05).powi(2));
            assert!(p >= last - 1e-15);
            last = p;
        }
    }

    #[test]
    fn arcsine_examples() {
        let cd = arcsine_law(&eye(2, 1.0), &eye(2, 1.0)).unwrap();
        assert!(max_abs(&(cd - eye(2, 2.0))) < 1e-15);
        let mut cr = eye(2, 1.0);
        cr[(0, 1)] = c(0.5, 0.0);
        cr[(1, 0)] = c(0.5, 0.0);
        let cd = arcsine_law(&cr, &cr).unwrap();
        assert_relative_eq!(cd[(0, 1)].re, 2.0 / 3.0, epsilon = 1e-14);
        let zero = arcsine_law(&eye(2, 1.0), &CMat::zeros(2, 2)).unwrap();
        assert_eq!(max_abs(&zero), 0.0);
        let mut over = eye(2, 1.0);
        over[(0, 1)] = c(1.0 + 1e-12, 0.0);
        assert!(arcsine_law(&eye(2, 1.0), &over).is_ok());
        over[(0, 1)] = c(1.01, 0.0);
        assert!(matches!(
            arcsine_law(&eye(2, 1.0), &over),
            Err(Error::DomainError { row: 0, col: 1, .. })
        ));
    }

    #[test]
    fn onebit_distortion_at_unit_variance() {
        let cr = eye(3, 1.0);
        let a = gain_onebit(&cr).unwrap();
        let cd = arcsine_law(&cr, &cr).unwrap();
        let cq = quant_noise_lag(&cd, &a, &cr);
        assert!(max_abs(&(cq - eye(3, ONE_BIT_DISTORTION))) < 1e-15);
        assert_relative_eq!(ONE_BIT_DISTORTION, 0.7268, epsilon = 1e-4);
        assert_eq!(max_abs(&quant_noise_lag(&CMat::zeros(2, 2), &a.rows(0, 2).into(), &CMat::zeros(2, 2))), 0.0);
    }

    #[test]
    fn prop2_white_lags_are_flat() {
        let n = 8;
        let mut lags = vec![CMat::zeros(2, 2); n];
        lags[0] = eye(2, 0.3);
        for k in 0..n {
            assert!(max_abs(&(prop2_freq_quant_cov(&lags, k) - eye(2, 0.3 * n as f64))) < 1e-14);
        }
    }

    #[test]
    fn prop2_fft_matches_direct_and_sums() {
        let cfg = small_cfg();
        let mut rng = RngStream::new(3, 0, Purpose::Channel).rng();
        let ch = draw_channel(&cfg, &PowerDelayProfile::uniform(cfg.taps), &mut rng);
        let fc = freq_covariance(&ch, &cfg, NoiseSupport::AllTones);
        let lags = onebit_lag_covariances(&fc).unwrap();
        let all = prop2_all_tones(&lags.c_q);
        let n = 16.0;
        let mut sum = CMat::zeros(3, 3);
        for (k, cq) in all.iter().enumerate() {
            let direct = prop2_freq_quant_cov(&lags.c_q, k);
            assert!(max_abs(&(cq - &direct)) < 1e-11);
            assert!(max_abs(&(cq - cq.adjoint())) < 1e-11);
            assert!(cq.diagonal().iter().all(|v| v.re >= -1e-12));
            sum += cq;
        }
        assert!(max_abs(&(sum - &lags.c_q[0] * c(n * n, 0.0))) < 1e-9);
    }

    #[test]
    fn baseline_scalar_gain() {
        let cfg = validate_config(SystemConfig::baseline()).unwrap();
        let s = scalar_gains(&cfg).unwrap();
        assert_relative_eq!(s.mu, 600.0 * 4.0 / 1024.0 + 10f64.powf(-0.4), epsilon = 1e-12);
        assert_relative_eq!(s.g, 0.6815, epsilon = 1e-4);
    }

    #[test]
    fn unit_power_limit_gain() {
        let mut cfg = SystemConfig::desk();
        cfg.users = 1;
        cfg.interferers = 0;
        cfg.interfering_band = Band::empty();
        cfg.fft_size = 16;
        cfg.taps = 1;
        cfg.cp_len = 1;
        cfg.desired_band = Band::range_excluding(0, 15, &[]);
        cfg.noise_var = 1e-300;
        cfg.pilot.length = 16;
        cfg.pilot.tones = Band::range_excluding(0, 15, &[]);
        let cfg = validate_config(cfg).unwrap();
        assert_relative_eq!(scalar_gains(&cfg).unwrap().g, 2.0 / PI.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn gain_decreases_with_interference() {
        let mut last = f64::INFINITY;
        for sir in [30.0, 10.0, 0.0, -10.0] {
            let cfg = validate_config(SystemConfig::desk().with_sir_db(sir)).unwrap();
            let g = scalar_gains(&cfg).unwrap().g;
            assert!(g < last);
            last = g;
        }
    }

    #[test]
    fn onebit_regression_gain() {
        let mut rng = RngStream::new(9, 0, Purpose::Oracle).rng();
        let var = 2.5;
        let (mut num, mut den) = (c(0.0, 0.0), 0.0);
        for _ in 0..200_000 {
            let z = complex_gaussian(&mut rng, var);
            num += sign_complex(z) * z.conj();
            den += z.norm_sqr();
        }
        let a = gain_onebit(&eye(1, var)).unwrap()[0];
        assert!((num.re / den - a).abs() < 0.01 * a);
    }
}
