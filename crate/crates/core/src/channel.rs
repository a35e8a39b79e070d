//! Frequency-selective Rayleigh channels and the unquantized receive signal.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::config::ValidatedConfig;
use crate::dft::Dft;
use crate::error::{Error, Result};
use crate::waveform::TimeBlock;
use crate::CMat;

/// Tap powers `p[ℓ]`, summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerDelayProfile(Vec<f64>);

impl PowerDelayProfile {
    pub fn uniform(taps: usize) -> Self {
        PowerDelayProfile(vec![1.0 / taps as f64; taps])
    }

    /// Returns `None` unless all entries are non-negative and sum to one (to 1e-9).
    pub fn new(powers: Vec<f64>) -> Option<Self> {
        let sum: f64 = powers.iter().sum();
        (!powers.is_empty() && powers.iter().all(|&p| p >= 0.0) && (sum - 1.0).abs() < 1e-9)
            .then_some(PowerDelayProfile(powers))
    }

    pub fn powers(&self) -> &[f64] {
        &self.0
    }

    pub fn taps(&self) -> usize {
        self.0.len()
    }
}

/// Draws one `CN(0, var)` sample.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, var: f64) -> Complex64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * s, im * s)
}

/// Taps `H[ℓ]` (M × (U+I)) and the response `H̃[k] = Σ_ℓ H[ℓ] e^{-j2πℓk/N}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    taps: Vec<CMat>,
    freq: Vec<CMat>,
}

impl ChannelRealization {
    pub fn from_taps(taps: Vec<CMat>, n: usize) -> Self {
        let freq = frequency_response(&taps, n);
        ChannelRealization { taps, freq }
    }

    pub fn taps(&self) -> &[CMat] {
        &self.taps
    }

    pub fn freq(&self) -> &[CMat] {
        &self.freq
    }

    pub fn antennas(&self) -> usize {
        self.taps[0].nrows()
    }

    pub fn users(&self) -> usize {
        self.taps[0].ncols()
    }

    /// The response sampled on a different grid (e.g. the pilot DFT size).
    pub fn response_on(&self, n: usize) -> Vec<CMat> {
        if n == self.freq.len() {
            self.freq.clone()
        } else {
            frequency_response(&self.taps, n)
        }
    }
}

/// `Σ_ℓ H[ℓ] e^{-j2πℓk/N}` for all `k`, by zero-padded FFTs per (m, u).
pub fn frequency_response(taps: &[CMat], n: usize) -> Vec<CMat> {
    let (m, u) = taps[0].shape();
    assert!(taps.len() <= n, "more taps than DFT points");
    let dft = Dft::new(n);
    let mut out = vec![DMatrix::zeros(m, u); n];
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for i in 0..m {
        for j in 0..u {
            buf.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
            for (l, h) in taps.iter().enumerate() {
                buf[l] = h[(i, j)];
            }
            dft.forward_in_place(&mut buf);
            for (k, v) in buf.iter().enumerate() {
                out[k][(i, j)] = *v;
            }
        }
    }
    out
}

/// Entries of `H[ℓ]` i.i.d. `CN(0, p[ℓ])` across antennas, users and taps.
pub fn draw_channel<R: Rng + ?Sized>(
    cfg: &ValidatedConfig,
    pdp: &PowerDelayProfile,
    rng: &mut R,
) -> ChannelRealization {
    let (m, u) = (cfg.antennas, cfg.total_users());
    let taps = pdp
        .powers()
        .iter()
        .map(|&p| DMatrix::from_fn(m, u, |_, _| complex_gaussian(rng, p)))
        .collect();
    ChannelRealization::from_taps(taps, cfg.fft_size)
}

/// Per-antenna time samples `r_m[n]` (prefix removed) and their DFTs `r̃_m[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RxBlock {
    pub time: Vec<Vec<Complex64>>,
    pub freq: Vec<Vec<Complex64>>,
}

impl RxBlock {
    pub fn from_time(time: Vec<Vec<Complex64>>, dft: &Dft) -> Self {
        let freq = time.iter().map(|r| dft.forward(r)).collect();
        RxBlock { time, freq }
    }

    pub fn antennas(&self) -> usize {
        self.time.len()
    }

    /// `r̃[k]` as an M-vector.
    pub fn freq_vector(&self, k: usize) -> nalgebra::DVector<Complex64> {
        nalgebra::DVector::from_iterator(self.freq.len(), self.freq.iter().map(|r| r[k]))
    }
}

/// `Σ_u Σ_ℓ h_{m,u}[ℓ] s_u[n-ℓ]` for `n = 0..N-1`, reading into each user's prefix.
pub fn convolve(blocks: &[TimeBlock], ch: &ChannelRealization) -> Result<Vec<Vec<Complex64>>> {
    let taps = ch.taps();
    let n = blocks[0].len();
    assert_eq!(blocks.len(), ch.users());
    for b in blocks {
        if taps.len() > b.cp_len() + 1 {
            return Err(Error::CpViolation {
                taps: taps.len(),
                cp_len: b.cp_len(),
            });
        }
    }
    let mut out = vec![vec![Complex64::new(0.0, 0.0); n]; ch.antennas()];
    for (u, block) in blocks.iter().enumerate() {
        let s = block.samples();
        let cp = block.cp_len();
        for (l, h) in taps.iter().enumerate() {
            for (m, row) in out.iter_mut().enumerate() {
                let g = h[(m, u)];
                let shifted = &s[cp - l..cp - l + n];
                for (r, x) in row.iter_mut().zip(shifted) {
                    *r += g * x;
                }
            }
        }
    }
    Ok(out)
}

/// i.i.d. `CN(0, N_o)` noise, `antennas × n`.
pub fn draw_noise<R: Rng + ?Sized>(
    antennas: usize,
    n: usize,
    noise_var: f64,
    rng: &mut R,
) -> Vec<Vec<Complex64>> {
    (0..antennas)
        .map(|_| (0..n).map(|_| complex_gaussian(rng, noise_var)).collect())
        .collect()
}

/// Channel convolution over the CP-extended blocks plus thermal noise.
pub fn apply_channel<R: Rng + ?Sized>(
    blocks: &[TimeBlock],
    ch: &ChannelRealization,
    noise_var: f64,
    rng: &mut R,
    dft: &Dft,
) -> Result<RxBlock> {
    let mut time = convolve(blocks, ch)?;
    let noise = draw_noise(time.len(), dft.len(), noise_var, rng);
    for (row, w) in time.iter_mut().zip(noise) {
        row.iter_mut().zip(w).for_each(|(r, w)| *r += w);
    }
    Ok(RxBlock::from_time(time, dft))
}

/// Per-tone noise variance of the unnormalized DFT, `N·N_o`.
pub fn freq_noise_variance(cfg: &ValidatedConfig) -> f64 {
    cfg.fft_size as f64 * cfg.noise_var
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{noise_for_snr_db, validate_config, SystemConfig};
    use crate::constellation::psk_constellation;
    use crate::rng::{Purpose, RngStream};
    use crate::waveform::{draw_data_symbols, modulate_grid};

    fn desk() -> ValidatedConfig {
        validate_config(SystemConfig::desk()).unwrap()
    }

    #[test]
    fn uniform_profile_sums_to_one() {
        let p = PowerDelayProfile::uniform(10);
        assert!((p.powers().iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(PowerDelayProfile::new(vec![0.5, 0.6]).is_none());
        assert!(PowerDelayProfile::new(vec![0.25, 0.75]).is_some());
    }

    #[test]
    fn tap_variances_match_profile() {
        let mut cfg = SystemConfig::desk();
        cfg.antennas = 3;
        cfg.users = 1;
        cfg.interferers = 0;
        let cfg = validate_config(cfg).unwrap();
        let pdp = PowerDelayProfile::new(vec![0.4, 0.3, 0.2, 0.1]).unwrap();
        let mut rng = RngStream::new(11, 0, Purpose::Channel).rng();
        let draws = 100_000 / 3;
        let mut acc = [0.0; 4];
        let mut cross = Complex64::new(0.0, 0.0);
        for _ in 0..draws {
            let ch = draw_channel(&cfg, &pdp, &mut rng);
            for (l, h) in ch.taps().iter().enumerate() {
                acc[l] += h.iter().map(|v| v.norm_sqr()).sum::<f64>();
            }
            cross += ch.taps()[0][(0, 0)] * ch.taps()[1][(0, 0)].conj();
        }
        let samples = (draws * 3) as f64;
        for (l, p) in pdp.powers().iter().enumerate() {
            let mean = acc[l] / samples;
            // |h|^2 is exponential: std = mean
            assert!((mean - p).abs() < 3.0 * p / samples.sqrt(), "tap {l}: {mean}");
        }
        let cross = cross / draws as f64;
        let sigma = (0.4f64 * 0.3 / 2.0 / draws as f64).sqrt();
        assert!(cross.re.abs() < 3.0 * sigma && cross.im.abs() < 3.0 * sigma);
    }

    #[test]
    fn single_tap_is_flat() {
        let mut cfg = SystemConfig::desk();
        cfg.taps = 1;
        let cfg = validate_config(cfg).unwrap();
        let mut rng = RngStream::new(2, 0, Purpose::Channel).rng();
        let ch = draw_channel(&cfg, &PowerDelayProfile::uniform(1), &mut rng);
        let f0 = &ch.freq()[0];
        for f in ch.freq() {
            for (a, b) in f.iter().zip(f0.iter()) {
                assert!((a.norm() - b.norm()).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn identity_like_channel_sums_users() {
        let cfg = desk();
        let psk = psk_constellation(4).unwrap();
        let dft = Dft::new(cfg.fft_size);
        let mut rng = RngStream::new(4, 0, Purpose::Data).rng();
        let grid = draw_data_symbols(&cfg, &psk, &mut rng);
        let blocks = modulate_grid(&cfg, &grid, &dft);
        let ones = DMatrix::from_element(cfg.antennas, cfg.total_users(), Complex64::new(1.0, 0.0));
        let ch = ChannelRealization::from_taps(vec![ones], cfg.fft_size);
        let r = convolve(&blocks, &ch).unwrap();
        for n in 0..cfg.fft_size {
            let sum: Complex64 = blocks.iter().map(|b| b.body()[n]).sum();
            for row in &r {
                assert!((row[n] - sum).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn noise_only_has_variance_n0() {
        let n0 = 0.37;
        let mut rng = RngStream::new(8, 0, Purpose::Noise).rng();
        let w = draw_noise(4, 25_000, n0, &mut rng);
        let count = 100_000.0;
        let var: f64 = w.iter().flatten().map(|v| v.norm_sqr()).sum::<f64>() / count;
        assert!((var - n0).abs() < 3.0 * n0 / count.sqrt());
    }

    #[test]
    fn circulant_equivalence_in_frequency() {
        let cfg = desk();
        let psk = psk_constellation(4).unwrap();
        let dft = Dft::new(cfg.fft_size);
        let stream = RngStream::new(6, 0, Purpose::Noise);
        let mut rng = RngStream::new(6, 0, Purpose::Data).rng();
        let grid = draw_data_symbols(&cfg, &psk, &mut rng);
        let blocks = modulate_grid(&cfg, &grid, &dft);
        let mut crng = RngStream::new(6, 0, Purpose::Channel).rng();
        let ch = draw_channel(&cfg, &PowerDelayProfile::uniform(cfg.taps), &mut crng);
        let rx = apply_channel(&blocks, &ch, cfg.noise_var, &mut stream.rng(), &dft).unwrap();
        // replay the noise stream
        let noise = draw_noise(cfg.antennas, cfg.fft_size, cfg.noise_var, &mut stream.rng());
        let wf: Vec<Vec<Complex64>> = noise.iter().map(|w| dft.forward(w)).collect();
        let sqrt_n = (cfg.fft_size as f64).sqrt();
        for k in 0..cfg.fft_size {
            let rho = if cfg.interfering_tones().contains(&k) {
                cfg.rho_i
            } else {
                cfg.rho_d
            };
            let s = nalgebra::DVector::from_iterator(
                cfg.total_users(),
                grid.values.iter().map(|v| v[k]),
            );
            let expect = &ch.freq()[k] * s * Complex64::new(rho * sqrt_n, 0.0);
            for m in 0..cfg.antennas {
                let want = expect[m] + wf[m][k];
                assert!((rx.freq[m][k] - want).norm() < 1e-9 * (1.0 + want.norm()));
            }
        }
    }

    #[test]
    fn too_many_taps_violate_cp() {
        let cfg = desk();
        let dft = Dft::new(cfg.fft_size);
        let taps = vec![DMatrix::zeros(cfg.antennas, cfg.total_users()); cfg.cp_len + 2];
        let ch = ChannelRealization::from_taps(taps, cfg.fft_size);
        let blocks: Vec<TimeBlock> = (0..cfg.total_users())
            .map(|_| TimeBlock::new(cfg.cp_len, vec![Complex64::new(0.0, 0.0); cfg.fft_size + cfg.cp_len]))
            .collect();
        let mut rng = RngStream::new(0, 0, Purpose::Noise).rng();
        assert!(matches!(
            apply_channel(&blocks, &ch, 0.1, &mut rng, &dft),
            Err(Error::CpViolation { .. })
        ));
    }

    #[test]
    fn per_tone_noise_variance() {
        let mut cfg = SystemConfig::baseline();
        cfg.noise_var = noise_for_snr_db(1.0, 4.0);
        let v = validate_config(cfg.clone()).unwrap();
        assert!((freq_noise_variance(&v) - 407.6).abs() < 0.1);
        let doubled = validate_config(cfg.with_fft_size(2048)).unwrap();
        assert!((freq_noise_variance(&doubled) - 2.0 * freq_noise_variance(&v)).abs() < 1e-9);
    }
}
