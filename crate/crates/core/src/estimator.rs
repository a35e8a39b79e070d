//! Pilot-based LMMSE channel estimation from quantized observations, with
//! cubic-spline interpolation from the pilot comb to the data tones.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use crate::bussgang::{scalar_gains, ONE_BIT_DISTORTION};
use crate::channel::{convolve, draw_noise, ChannelRealization};
use crate::config::ValidatedConfig;
use crate::constellation::Psk;
use crate::dft::Dft;
use crate::error::{Error, Result};
use crate::quantizer::Quantizer;
use crate::waveform::{draw_band_symbols, ofdm_modulate, pilot_owner, PilotBlock};
use crate::CMat;

/// DFTs of the unquantized (`y`) and quantized (`v`) pilot-phase samples,
/// `antennas × N_p`.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotObservation {
    pub y: Vec<Vec<Complex64>>,
    pub v: Vec<Vec<Complex64>>,
}

/// Pilot block through the channel, with interferers sending PSK data on
/// `K_I mod N_p`, thermal noise and the ADC.
pub fn pilot_receive<R: Rng + ?Sized, S: Rng + ?Sized>(
    ch: &ChannelRealization,
    pilots: &PilotBlock,
    cfg: &ValidatedConfig,
    psk: &Psk,
    quantizer: &Quantizer,
    interference_rng: &mut R,
    noise_rng: &mut S,
) -> Result<PilotObservation> {
    let np = cfg.pilot.length;
    let dft = Dft::new(np);
    let ki = cfg.pilot_interfering_tones();
    let mut blocks = pilots.blocks.clone();
    for _ in 0..cfg.interferers {
        let (spectrum, _) = draw_band_symbols(&ki, np, psk, interference_rng);
        blocks.push(ofdm_modulate(&spectrum, cfg.rho_i, &dft, cfg.cp_len));
    }
    let mut y = convolve(&blocks, ch)?;
    let noise = draw_noise(y.len(), np, cfg.noise_var, noise_rng);
    for (row, w) in y.iter_mut().zip(noise) {
        row.iter_mut().zip(w).for_each(|(r, w)| *r += w);
    }
    let v = y
        .iter()
        .map(|row| dft.forward(&row.iter().map(|&z| quantizer.apply(z)).collect::<Vec<_>>()))
        .collect();
    let y = y.iter().map(|row| dft.forward(row)).collect();
    Ok(PilotObservation { y, v })
}

/// The scalar in front of the derotated observation,
/// `[ρ_p G' √(N_p U) (1 + N_o/(ρ_p² U) + P/(ρ_p² U G'²))]⁻¹` with `P = 2 - 4/π`.
pub fn lmmse_scale(cfg: &ValidatedConfig) -> Result<f64> {
    let (rho2u, g) = pilot_terms(cfg)?;
    let np_u = (cfg.pilot.length * cfg.users) as f64;
    Ok(1.0 / (cfg.rho_p * g * np_u.sqrt() * denominator(cfg, rho2u, g)))
}

fn pilot_terms(cfg: &ValidatedConfig) -> Result<(f64, f64)> {
    let g = scalar_gains(cfg)?.g_pilot;
    Ok((cfg.rho_p * cfg.rho_p * cfg.users as f64, g))
}

fn denominator(cfg: &ValidatedConfig, rho2u: f64, g: f64) -> f64 {
    1.0 + cfg.noise_var / rho2u + ONE_BIT_DISTORTION / (rho2u * g * g)
}

/// Predicted normalized estimation error
/// `σ_e² = 1 - 1/(1 + N_o/(ρ_p² U) + P/(ρ_p² U G'²))`.
pub fn sigma_e2_predict(cfg: &ValidatedConfig) -> Result<f64> {
    let (rho2u, g) = pilot_terms(cfg)?;
    let s = 1.0 - 1.0 / denominator(cfg, rho2u, g);
    if (0.0..1.0).contains(&s) {
        Ok(s)
    } else {
        Err(Error::OutOfRange(s))
    }
}

/// The raw estimates `ȟ_{m,u}[v]` of one user on its pilot comb.
#[derive(Debug, Clone, PartialEq)]
pub struct CombSamples {
    pub user: usize,
    /// Signed pilot tones on the `N_p` grid, ascending.
    pub tones: Vec<i64>,
    /// `values[m][i]` is the estimate at antenna `m`, tone `tones[i]`.
    pub values: Vec<Vec<Complex64>>,
}

/// Per-tone LMMSE estimates `e^{-jφ_u[k]} ṽ_m[k] · scale` on each user's comb.
pub fn lmmse_per_tone(
    obs: &PilotObservation,
    pilots: &PilotBlock,
    cfg: &ValidatedConfig,
) -> Result<Vec<CombSamples>> {
    let scale = lmmse_scale(cfg)?;
    let np = cfg.pilot.length;
    let mut combs: Vec<CombSamples> = (0..cfg.users)
        .map(|user| CombSamples {
            user,
            tones: Vec::new(),
            values: vec![Vec::new(); obs.v.len()],
        })
        .collect();
    for &t in cfg.pilot.tones.tones() {
        let k = t.rem_euclid(np as i64) as usize;
        let u = pilot_owner(k, cfg.users);
        let rot = Complex64::from_polar(scale, -pilots.phases[u][k]);
        let comb = &mut combs[u];
        comb.tones.push(t);
        for (vals, v) in comb.values.iter_mut().zip(&obs.v) {
            vals.push(v[k] * rot);
        }
    }
    Ok(combs)
}

/// Natural cubic spline through `(x_i, y_i)`, `x` strictly increasing.
#[derive(Debug, Clone)]
struct Spline {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl Spline {
    fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        let n = x.len();
        let mut m = vec![0.0; n];
        if n > 2 {
            // Thomas algorithm for the second derivatives at the interior knots.
            let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
            let k = n - 2;
            let mut diag = vec![0.0; k];
            let mut rhs = vec![0.0; k];
            for i in 0..k {
                diag[i] = 2.0 * (h[i] + h[i + 1]);
                rhs[i] = 6.0 * ((y[i + 2] - y[i + 1]) / h[i + 1] - (y[i + 1] - y[i]) / h[i]);
            }
            for i in 1..k {
                let w = h[i] / diag[i - 1];
                diag[i] -= w * h[i];
                rhs[i] -= w * rhs[i - 1];
            }
            m[k] = rhs[k - 1] / diag[k - 1];
            for i in (0..k - 1).rev() {
                m[i + 1] = (rhs[i] - h[i + 1] * m[i + 2]) / diag[i];
            }
        }
        Spline { x, y, m }
    }

    fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        if n == 1 {
            return self.y[0];
        }
        let i = match self.x.partition_point(|&v| v <= t) {
            0 => 0,
            p if p >= n => n - 2,
            p => p - 1,
        };
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        a * self.y[i]
            + b * self.y[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }
}

/// Minimum comb size for the spline.
pub const MIN_COMB: usize = 2;

/// Interpolates one user's comb (positions `t/N_p`) onto the normalized
/// frequencies `targets`, real and imaginary parts separately.
///
/// When `cyclic` is set the comb is repeated one period to each side first,
/// which is exact for a comb spanning the whole (periodic) pilot grid.
pub fn upsample_spline(comb: &CombSamples, np: usize, targets: &[f64], cyclic: bool) -> Result<Vec<Vec<Complex64>>> {
    if comb.tones.len() < MIN_COMB {
        return Err(Error::InsufficientPilots {
            user: comb.user,
            got: comb.tones.len(),
            needed: MIN_COMB,
        });
    }
    let pos: Vec<f64> = comb.tones.iter().map(|&t| t as f64 / np as f64).collect();
    let shifts: &[f64] = if cyclic { &[-1.0, 0.0, 1.0] } else { &[0.0] };
    let x: Vec<f64> = shifts
        .iter()
        .flat_map(|s| pos.iter().map(move |p| p + s))
        .collect();
    Ok(comb
        .values
        .iter()
        .map(|vals| {
            let tile = |f: fn(&Complex64) -> f64| -> Vec<f64> {
                shifts.iter().flat_map(|_| vals.iter().map(f)).collect()
            };
            let re = Spline::new(x.clone(), tile(|c| c.re));
            let im = Spline::new(x.clone(), tile(|c| c.im));
            targets
                .iter()
                .map(|&t| Complex64::new(re.eval(t), im.eval(t)))
                .collect()
        })
        .collect())
}

/// Channel knowledge available to the detector: `Ĥ[k]` (M × U) on the desired
/// tones and the error variance used by the SINDR expressions.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimate {
    /// Indexed by tone `k = 0..N`; zero on tones the estimator does not cover.
    pub h: Vec<CMat>,
    pub sigma_e2: f64,
    /// Comb estimates (empty for perfect CSI).
    pub raw: Vec<CombSamples>,
}

impl ChannelEstimate {
    /// The true desired-user response, `σ_e² = 0`.
    pub fn perfect(ch: &ChannelRealization, cfg: &ValidatedConfig) -> Self {
        let h = ch
            .freq()
            .iter()
            .map(|f| f.columns(0, cfg.users).into_owned())
            .collect();
        ChannelEstimate {
            h,
            sigma_e2: 0.0,
            raw: Vec::new(),
        }
    }

    /// Interpolates comb estimates onto the desired tones.
    pub fn from_combs(cfg: &ValidatedConfig, combs: Vec<CombSamples>, sigma_e2: f64) -> Result<Self> {
        let n = cfg.fft_size;
        let np = cfg.pilot.length;
        let targets: Vec<f64> = cfg
            .desired_band
            .tones()
            .iter()
            .map(|&t| t as f64 / n as f64)
            .collect();
        let cyclic = cfg.pilot_tones().len() == np;
        let mut h = vec![DMatrix::zeros(cfg.antennas, cfg.users); n];
        for comb in &combs {
            let full = upsample_spline(comb, np, &targets, cyclic)?;
            for (m, row) in full.iter().enumerate() {
                for (&k, v) in cfg.desired_tones().iter().zip(row) {
                    h[k][(m, comb.user)] = *v;
                }
            }
        }
        Ok(ChannelEstimate {
            h,
            sigma_e2,
            raw: combs,
        })
    }
}

/// Runs the full estimation chain of one coherence interval.
#[allow(clippy::too_many_arguments)]
pub fn estimate_channel<R: Rng + ?Sized, S: Rng + ?Sized>(
    ch: &ChannelRealization,
    pilots: &PilotBlock,
    cfg: &ValidatedConfig,
    psk: &Psk,
    quantizer: &Quantizer,
    interference_rng: &mut R,
    noise_rng: &mut S,
) -> Result<ChannelEstimate> {
    let obs = pilot_receive(ch, pilots, cfg, psk, quantizer, interference_rng, noise_rng)?;
    let combs = lmmse_per_tone(&obs, pilots, cfg)?;
    ChannelEstimate::from_combs(cfg, combs, sigma_e2_predict(cfg)?)
}

/// Squared error of the comb estimates against the true response on the
/// pilot grid: `(Σ |ȟ - h|², count)`.
pub fn comb_error(combs: &[CombSamples], ch: &ChannelRealization, np: usize) -> (f64, usize) {
    let truth = ch.response_on(np);
    let mut sum = 0.0;
    let mut count = 0;
    for comb in combs {
        for (m, vals) in comb.values.iter().enumerate() {
            for (&t, v) in comb.tones.iter().zip(vals) {
                let k = t.rem_euclid(np as i64) as usize;
                sum += (v - truth[k][(m, comb.user)]).norm_sqr();
                count += 1;
            }
        }
    }
    (sum, count)
}

/// Squared error of `Ĥ` against the true response on the desired tones.
pub fn grid_error(est: &ChannelEstimate, ch: &ChannelRealization, cfg: &ValidatedConfig) -> (f64, usize) {
    let mut sum = 0.0;
    let mut count = 0;
    for &k in cfg.desired_tones() {
        let truth = ch.freq()[k].columns(0, cfg.users);
        sum += (&est.h[k] - truth).iter().map(|v| v.norm_sqr()).sum::<f64>();
        count += cfg.antennas * cfg.users;
    }
    (sum, count)
}
