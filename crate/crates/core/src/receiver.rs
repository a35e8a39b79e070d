//! Zero-forcing combining, PSK detection and the two SINDR engines: the
//! per-realization form and the closed-form large-array approximation.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::bussgang::{scalar_gains, BussgangModel};
use crate::config::ValidatedConfig;
use crate::constellation::Psk;
use crate::estimator::ChannelEstimate;
use crate::error::{Error, Result};
use crate::quantizer::QuantizedBlock;
use crate::{CMat, CVec};

/// Condition number above which a tone's channel matrix is rejected.
pub const MAX_CONDITION: f64 = 1e12;

/// `B̂[k] = (Ĥ^H Ĥ)⁻¹ Ĥ^H` on every desired tone, computed by QR.
#[derive(Debug, Clone, PartialEq)]
pub struct ZfCombiner {
    /// Desired tones, in the order of `b`.
    pub tones: Vec<usize>,
    /// U × M combiners.
    pub b: Vec<CMat>,
}

/// Left pseudo-inverse of a tall full-rank matrix.
pub fn zf_matrix(h: &CMat, tone: usize) -> Result<CMat> {
    let sv = h.singular_values();
    let (hi, lo) = sv
        .iter()
        .fold((0.0f64, f64::INFINITY), |(a, b), &s| (a.max(s), b.min(s)));
    let cond = hi / lo;
    if cond.is_nan() || cond > MAX_CONDITION {
        return Err(Error::RankDeficient { tone, cond });
    }
    let qr = h.clone().qr();
    let q = qr.q();
    let r = qr.r();
    r.solve_upper_triangular(&q.adjoint())
        .ok_or(Error::RankDeficient { tone, cond })
}

impl ZfCombiner {
    pub fn new(est: &ChannelEstimate, cfg: &ValidatedConfig) -> Result<Self> {
        let tones = cfg.desired_tones().to_vec();
        let b = tones
            .iter()
            .map(|&k| zf_matrix(&est.h[k], k))
            .collect::<Result<Vec<_>>>()?;
        Ok(ZfCombiner { tones, b })
    }

    /// `b̂_u[k]^H` as a row.
    pub fn row(&self, i: usize, u: usize) -> CMat {
        self.b[i].rows(u, 1).into_owned()
    }
}

/// `x̂[k] = B̂[k] d̃[k]` on every desired tone.
pub fn zf_combine(zf: &ZfCombiner, d: &QuantizedBlock) -> Vec<CVec> {
    zf.tones
        .iter()
        .zip(&zf.b)
        .map(|(&k, b)| b * d.freq_vector(k))
        .collect()
}

/// Effective per-(tone, user) gains `b̂_u[k]^H A ĥ_u[k]` used to derotate before slicing.
pub fn effective_gains(zf: &ZfCombiner, est: &ChannelEstimate, gain: &DVector<f64>) -> Vec<Vec<Complex64>> {
    zf.tones
        .iter()
        .zip(&zf.b)
        .map(|(&k, b)| {
            let h = &est.h[k];
            (0..b.nrows())
                .map(|u| {
                    (0..b.ncols())
                        .map(|m| b[(u, m)] * gain[m] * h[(m, u)])
                        .sum()
                })
                .collect()
        })
        .collect()
}

/// Symbol decisions and Gray bits, per user, in tone order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Detection {
    pub symbols: Vec<Vec<usize>>,
    pub bits: Vec<Vec<u8>>,
}

/// Minimum-distance PSK decisions on `x̂_u[k] · conj(c_u[k])`.
///
/// `gains` may be empty, in which case no derotation is applied.
pub fn detect_bits(xhat: &[CVec], gains: &[Vec<Complex64>], psk: &Psk) -> Detection {
    let users = xhat.first().map_or(0, |x| x.len());
    let mut det = Detection {
        symbols: vec![Vec::with_capacity(xhat.len()); users],
        bits: vec![Vec::with_capacity(xhat.len() * psk.bits_per_symbol()); users],
    };
    for (i, x) in xhat.iter().enumerate() {
        for u in 0..users {
            let z = match gains.get(i) {
                Some(g) => x[u] * g[u].conj(),
                None => x[u],
            };
            let s = psk.slice(z);
            det.symbols[u].push(s);
            psk.push_bits(s, &mut det.bits[u]);
        }
    }
    det
}

/// Decomposition of one (user, tone) SINDR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SindrTerms {
    pub user: usize,
    pub tone: usize,
    /// `ρ_d² N |b̂^H A ĥ_u|²`
    pub signal: f64,
    /// `ρ_d² N Σ_{z≠u} |b̂^H A ĥ_z|²`
    pub cross: f64,
    /// `ρ_d² N U σ_e² ‖b̂^H A‖²`: the estimation-error leakage of all users.
    pub estimation: f64,
    /// `N N_o ‖b̂^H A‖²`
    pub noise: f64,
    /// `b̂^H C_q[k] b̂`
    pub quant: f64,
}

impl SindrTerms {
    /// Interference `I_u = cross + (U-1)/U · estimation`.
    pub fn interference(&self, users: usize) -> f64 {
        self.cross + self.estimation * (users as f64 - 1.0) / users as f64
    }

    pub fn gamma(&self) -> f64 {
        self.signal / (self.cross + self.estimation + self.noise + self.quant)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SindrReport {
    pub terms: Vec<SindrTerms>,
}

impl SindrReport {
    pub fn gammas(&self) -> impl Iterator<Item = f64> + '_ {
        self.terms.iter().map(|t| t.gamma())
    }

    pub fn mean_gamma(&self) -> f64 {
        self.gammas().sum::<f64>() / self.terms.len() as f64
    }
}

/// Per-realization SINDR of every desired (user, tone).
pub fn sindr_tight(
    est: &ChannelEstimate,
    zf: &ZfCombiner,
    bm: &BussgangModel,
    cfg: &ValidatedConfig,
) -> SindrReport {
    let n = cfg.fft_size as f64;
    let users = cfg.users;
    let rho2n = cfg.rho_d * cfg.rho_d * n;
    let mut terms = Vec::with_capacity(zf.tones.len() * users);
    for (&k, b) in zf.tones.iter().zip(&zf.b) {
        let h = &est.h[k];
        let cq = &bm.c_q[k];
        for u in 0..users {
            let ba: Vec<Complex64> = (0..b.ncols()).map(|m| b[(u, m)] * bm.gain[m]).collect();
            let ba_norm2: f64 = ba.iter().map(|v| v.norm_sqr()).sum();
            let leak = |z: usize| -> f64 {
                ba.iter()
                    .enumerate()
                    .map(|(m, v)| v * h[(m, z)])
                    .sum::<Complex64>()
                    .norm_sqr()
            };
            let row = b.rows(u, 1);
            let quant = (row * cq * row.adjoint())[(0, 0)].re;
            terms.push(SindrTerms {
                user: u,
                tone: k,
                signal: rho2n * leak(u),
                cross: rho2n * (0..users).filter(|&z| z != u).map(leak).sum::<f64>(),
                estimation: rho2n * users as f64 * est.sigma_e2 * ba_norm2,
                noise: n * cfg.noise_var * ba_norm2,
                quant: quant.max(0.0),
            });
        }
    }
    SindrReport { terms }
}

/// Closed-form SINDR common to all users and tones,
/// `ρ_d²(1-σ_e²)(M-U)G² / (U σ_e² ρ_d² G² + C_q + N_o G²)`.
pub fn sindr_approx(cfg: &ValidatedConfig, sigma_e2: f64) -> Result<f64> {
    let s = scalar_gains(cfg)?;
    let g2 = s.g * s.g;
    let rho2 = cfg.rho_d * cfg.rho_d;
    let dof = (cfg.antennas - cfg.users) as f64;
    Ok(rho2 * (1.0 - sigma_e2) * dof * g2
        / (cfg.users as f64 * sigma_e2 * rho2 * g2 + s.distortion + cfg.noise_var * g2))
}
