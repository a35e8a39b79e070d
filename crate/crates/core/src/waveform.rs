//! Frequency-domain symbol grids, CP-OFDM synthesis and pilot blocks.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rand::Rng;

use crate::config::ValidatedConfig;
use crate::constellation::Psk;
use crate::dft::Dft;
use crate::rng::{Purpose, RngStream};

/// Per-user length-N spectra `s̃_u[k]`, zero outside each user's band.
#[derive(Debug, Clone, PartialEq)]
pub struct FreqGrid {
    /// Users `0..U` are desired, `U..U+I` interfering.
    pub values: Vec<Vec<Complex64>>,
    /// Transmitted constellation indices, one per tone of the user's band, in band order.
    pub symbols: Vec<Vec<usize>>,
}

/// Samples `s_u[n]` for `n = -L_cp .. N-1`; index 0 of `samples` is `n = -L_cp`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeBlock {
    cp_len: usize,
    samples: Vec<Complex64>,
}

impl TimeBlock {
    pub fn new(cp_len: usize, samples: Vec<Complex64>) -> Self {
        assert!(samples.len() >= cp_len);
        TimeBlock { cp_len, samples }
    }

    pub fn cp_len(&self) -> usize {
        self.cp_len
    }

    /// Block length without the prefix.
    pub fn len(&self) -> usize {
        self.samples.len() - self.cp_len
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All samples including the prefix.
    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    /// `s[0..N]`, prefix stripped.
    pub fn body(&self) -> &[Complex64] {
        &self.samples[self.cp_len..]
    }

    /// `s[n]` for `n >= -L_cp`.
    pub fn at(&self, n: isize) -> Complex64 {
        self.samples[(n + self.cp_len as isize) as usize]
    }

    /// Dumps `n,re,im` rows for inspection.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "n,re,im")?;
        for (i, s) in self.samples.iter().enumerate() {
            writeln!(out, "{},{},{}", i as isize - self.cp_len as isize, s.re, s.im)?;
        }
        Ok(())
    }
}

/// `s[n] = (ρ/√N) Σ_k s̃[k] e^{j2πnk/N}` with the last `cp_len` samples prepended.
pub fn ofdm_modulate(spectrum: &[Complex64], rho: f64, dft: &Dft, cp_len: usize) -> TimeBlock {
    let n = dft.len();
    assert_eq!(spectrum.len(), n);
    let mut body = spectrum.to_vec();
    dft.backward_in_place(&mut body);
    let scale = rho / (n as f64).sqrt();
    let mut samples = Vec::with_capacity(n + cp_len);
    samples.extend(body[n - cp_len..].iter().map(|v| v * scale));
    samples.extend(body.iter().map(|v| v * scale));
    TimeBlock { cp_len, samples }
}

/// Uniform i.i.d. PSK symbols on `tones` of a length-`n` grid.
pub fn draw_band_symbols<R: Rng + ?Sized>(
    tones: &[usize],
    n: usize,
    psk: &Psk,
    rng: &mut R,
) -> (Vec<Complex64>, Vec<usize>) {
    let mut spectrum = vec![Complex64::new(0.0, 0.0); n];
    let mut symbols = Vec::with_capacity(tones.len());
    for &k in tones {
        let idx = rng.random_range(0..psk.order());
        spectrum[k] = psk.point(idx);
        symbols.push(idx);
    }
    (spectrum, symbols)
}

/// Data symbols for all U + I users; interferers use the same alphabet on K_I.
pub fn draw_data_symbols<R: Rng + ?Sized>(
    cfg: &ValidatedConfig,
    psk: &Psk,
    rng: &mut R,
) -> FreqGrid {
    let n = cfg.fft_size;
    let mut values = Vec::with_capacity(cfg.total_users());
    let mut symbols = Vec::with_capacity(cfg.total_users());
    for u in 0..cfg.total_users() {
        let tones = if u < cfg.users {
            cfg.desired_tones()
        } else {
            cfg.interfering_tones()
        };
        let (v, s) = draw_band_symbols(tones, n, psk, rng);
        values.push(v);
        symbols.push(s);
    }
    FreqGrid { values, symbols }
}

/// Modulates every user of `grid` with its band's amplitude.
pub fn modulate_grid(cfg: &ValidatedConfig, grid: &FreqGrid, dft: &Dft) -> Vec<TimeBlock> {
    grid.values
        .iter()
        .enumerate()
        .map(|(u, s)| {
            let rho = if u < cfg.users { cfg.rho_d } else { cfg.rho_i };
            ofdm_modulate(s, rho, dft, cfg.cp_len)
        })
        .collect()
}

/// Tone-interleaved pilots of the desired users.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotBlock {
    /// `θ̃_u[k]` on the `N_p` grid, users `0..U`.
    pub theta: Vec<Vec<Complex64>>,
    /// `φ_u[k]`, meaningful where `θ̃_u[k] ≠ 0`.
    pub phases: Vec<Vec<f64>>,
    /// `p_u[n]` with prefix.
    pub blocks: Vec<TimeBlock>,
}

/// User owning pilot tone `k` (0-based form of `f(k) = (k mod U) + 1`).
pub fn pilot_owner(k: usize, users: usize) -> usize {
    k % users
}

/// Builds `θ̃_u[k] = √U e^{jφ_u[k]}` on the tones user `u` owns and the
/// time-domain pilot `p_u[n] = (ρ_p/√N_p) Σ θ̃_u[k] e^{j2πnk/N_p}`.
///
/// Phases are uniform on `[0, 2π)` and drawn from the plan's phase seed, so
/// the base station can regenerate them.
pub fn make_pilot_block(cfg: &ValidatedConfig, dft: &Dft) -> PilotBlock {
    let np = cfg.pilot.length;
    assert_eq!(dft.len(), np);
    let u_count = cfg.users;
    let mut rng = RngStream::new(cfg.pilot.phase_seed, 0, Purpose::PilotPhase).rng();
    let amp = (u_count as f64).sqrt();
    let mut theta = vec![vec![Complex64::new(0.0, 0.0); np]; u_count];
    let mut phases = vec![vec![0.0; np]; u_count];
    for &k in cfg.pilot_tones() {
        let u = pilot_owner(k, u_count);
        let phi = rng.random::<f64>() * 2.0 * PI;
        phases[u][k] = phi;
        theta[u][k] = Complex64::from_polar(amp, phi);
    }
    let blocks = theta
        .iter()
        .map(|t| ofdm_modulate(t, cfg.rho_p, dft, cfg.cp_len))
        .collect();
    PilotBlock {
        theta,
        phases,
        blocks,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{validate_config, Band, SystemConfig};
    use crate::constellation::psk_constellation;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn single_tone_at_dc_is_flat() {
        let dft = Dft::new(4);
        let mut s = vec![c(0.0, 0.0); 4];
        s[0] = c(1.0, 0.0);
        let b = ofdm_modulate(&s, 1.0, &dft, 2);
        assert!(b.samples().iter().all(|v| (v - c(0.5, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn empty_band_gives_zero_block() {
        let dft = Dft::new(8);
        let b = ofdm_modulate(&[c(0.0, 0.0); 8], 2.0, &dft, 3);
        assert!(b.samples().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn parseval_against_direct_idft() {
        let n = 8;
        let dft = Dft::new(n);
        let mut s = vec![c(0.0, 0.0); n];
        s[1] = Complex64::from_polar(1.0, 0.3);
        s[3] = Complex64::from_polar(1.0, -2.1);
        let rho = 1.7;
        let b = ofdm_modulate(&s, rho, &dft, 2);
        // direct synthesis
        for t in 0..n {
            let direct: Complex64 = (0..n)
                .map(|k| s[k] * Complex64::from_polar(1.0, 2.0 * PI * (t * k) as f64 / n as f64))
                .sum::<Complex64>()
                * (rho / (n as f64).sqrt());
            assert!((b.body()[t] - direct).norm() < 1e-12);
        }
        let energy: f64 = b.body().iter().map(|v| v.norm_sqr()).sum();
        assert!((energy - rho * rho * 2.0).abs() < 1e-12);
    }

    #[test]
    fn cyclic_prefix_copies_the_tail() {
        let cfg = validate_config(SystemConfig::desk()).unwrap();
        let psk = psk_constellation(4).unwrap();
        let dft = Dft::new(cfg.fft_size);
        let mut rng = RngStream::new(3, 0, Purpose::Data).rng();
        let grid = draw_data_symbols(&cfg, &psk, &mut rng);
        for b in modulate_grid(&cfg, &grid, &dft) {
            let n = b.len() as isize;
            for i in 1..=b.cp_len() as isize {
                assert_eq!(b.at(-i), b.at(n - i));
            }
        }
    }

    #[test]
    fn forward_dft_recovers_scaled_symbols() {
        let cfg = validate_config(SystemConfig::desk()).unwrap();
        let psk = psk_constellation(4).unwrap();
        let dft = Dft::new(cfg.fft_size);
        let mut rng = RngStream::new(5, 0, Purpose::Data).rng();
        let grid = draw_data_symbols(&cfg, &psk, &mut rng);
        let blocks = modulate_grid(&cfg, &grid, &dft);
        let scale = cfg.rho_d * (cfg.fft_size as f64).sqrt();
        let f = dft.forward(blocks[0].body());
        for (fk, v) in f.iter().zip(&grid.values[0]) {
            assert!((fk - v * scale).norm() < 1e-10);
        }
    }

    #[test]
    fn grid_is_confined_to_bands_with_unit_modulus() {
        let cfg = validate_config(SystemConfig::desk()).unwrap();
        let psk = psk_constellation(8).unwrap();
        let mut rng = RngStream::new(1, 0, Purpose::Data).rng();
        let grid = draw_data_symbols(&cfg, &psk, &mut rng);
        for (u, v) in grid.values.iter().enumerate() {
            let band = if u < cfg.users {
                cfg.desired_tones()
            } else {
                cfg.interfering_tones()
            };
            for (k, s) in v.iter().enumerate() {
                if band.contains(&k) {
                    assert!((s.norm() - 1.0).abs() < 1e-14);
                } else {
                    assert_eq!(s.norm(), 0.0);
                }
            }
        }
        let mut rng = RngStream::new(1, 0, Purpose::Data).rng();
        assert_eq!(grid, draw_data_symbols(&cfg, &psk, &mut rng));
    }

    #[test]
    fn per_tone_mean_vanishes() {
        let cfg = validate_config(SystemConfig::desk()).unwrap();
        let psk = psk_constellation(4).unwrap();
        let mut rng = RngStream::new(9, 0, Purpose::Data).rng();
        let k = cfg.desired_tones()[0];
        let draws = 100_000;
        let mut sum = c(0.0, 0.0);
        for _ in 0..draws {
            let (v, _) = draw_band_symbols(&[k], cfg.fft_size, &psk, &mut rng);
            sum += v[k];
        }
        let mean = sum / draws as f64;
        // each real dimension has variance 1/2
        let sigma = (0.5 / draws as f64).sqrt();
        assert!(mean.re.abs() < 3.0 * sigma && mean.im.abs() < 3.0 * sigma);
    }

    #[test]
    fn pilots_interleave_across_users() {
        let mut cfg = SystemConfig::desk();
        cfg.users = 2;
        cfg.pilot.length = 16;
        cfg.taps = 4;
        cfg.pilot.tones = Band::range_excluding(0, 3, &[]);
        cfg.interfering_band = Band::range_excluding(100, 108, &[]);
        let cfg = validate_config(cfg).unwrap();
        let dft = Dft::new(16);
        let p = make_pilot_block(&cfg, &dft);
        let owned = |u: usize| -> Vec<usize> {
            (0..16).filter(|&k| p.theta[u][k].norm() > 0.0).collect()
        };
        assert_eq!(owned(0), vec![0, 2]);
        assert_eq!(owned(1), vec![1, 3]);
        for u in 0..2 {
            for k in owned(u) {
                assert!((p.theta[u][k].norm() - 2f64.sqrt()).abs() < 1e-14);
            }
        }
        let inner: Complex64 = (0..16).map(|k| p.theta[0][k] * p.theta[1][k].conj()).sum();
        assert_eq!(inner.norm(), 0.0);
        // the base station regenerates the same phases
        assert_eq!(p, make_pilot_block(&cfg, &dft));
    }
}
