//! Scenario parameters, validation and the TOML file format.

use std::fmt;
use std::ops::Deref;
use std::str::FromStr;

use crate::constellation::SUPPORTED_ORDERS;
use crate::error::ConfigError;

/// An ordered set of subcarrier indices in signed form.
///
/// Tones are stored as given (e.g. `-150..150 excl 0`) and mapped onto `[0, N)`
/// modulo the DFT size when used. Keeping the signed form lets oversampling
/// sweeps change `N` while the occupied frequencies stay put.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Band(Vec<i64>);

impl Band {
    pub fn new(mut tones: Vec<i64>) -> Self {
        tones.sort_unstable();
        tones.dedup();
        Band(tones)
    }

    /// Inclusive range `lo..=hi` minus `excluded`.
    pub fn range_excluding(lo: i64, hi: i64, excluded: &[i64]) -> Self {
        Band::new((lo..=hi).filter(|k| !excluded.contains(k)).collect())
    }

    pub fn empty() -> Self {
        Band(Vec::new())
    }

    pub fn tones(&self) -> &[i64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Tone indices reduced modulo `n`, in the band's signed order.
    pub fn indices(&self, n: usize) -> Vec<usize> {
        self.0
            .iter()
            .map(|&k| k.rem_euclid(n as i64) as usize)
            .collect()
    }

    fn runs(&self) -> Vec<(i64, i64)> {
        let mut runs: Vec<(i64, i64)> = Vec::new();
        for &k in &self.0 {
            match runs.last_mut() {
                Some((_, hi)) if *hi + 1 == k => *hi = k,
                _ => runs.push((k, k)),
            }
        }
        runs
    }
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .runs()
            .into_iter()
            .map(|(lo, hi)| {
                if lo == hi {
                    lo.to_string()
                } else {
                    format!("{lo}..{hi}")
                }
            })
            .collect();
        f.write_str(&parts.join(", "))
    }
}

impl FromStr for Band {
    type Err = String;

    /// Grammar: `item (, item)* [excl item (, item)*]` with `item := int | int..int`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        fn items(s: &str) -> Result<Vec<i64>, String> {
            let mut out = Vec::new();
            for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
                if let Some((lo, hi)) = part.split_once("..") {
                    let lo: i64 = lo.trim().parse().map_err(|_| format!("bad bound `{lo}`"))?;
                    let hi: i64 = hi.trim().parse().map_err(|_| format!("bad bound `{hi}`"))?;
                    if hi < lo {
                        return Err(format!("empty range `{part}`"));
                    }
                    out.extend(lo..=hi);
                } else {
                    out.push(part.parse().map_err(|_| format!("bad tone `{part}`"))?);
                }
            }
            Ok(out)
        }
        let s = s.trim();
        if s.is_empty() || s == "none" {
            return Ok(Band::empty());
        }
        let (incl, excl) = match s.split_once("excl") {
            Some((a, b)) => (a, Some(b)),
            None => (s, None),
        };
        let excluded = match excl {
            Some(e) => items(e)?,
            None => Vec::new(),
        };
        Ok(Band::new(
            items(incl)?
                .into_iter()
                .filter(|k| !excluded.contains(k))
                .collect(),
        ))
    }
}

/// How the midrise step size is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepPolicy {
    /// Fixed step Δ.
    Explicit(f64),
    /// Step chosen so a Gaussian input of the ensemble receive power clips with
    /// the given probability.
    ClipProbability(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdcSpec {
    pub bits: u32,
    pub step: StepPolicy,
}

impl AdcSpec {
    pub fn one_bit() -> Self {
        AdcSpec {
            bits: 1,
            step: StepPolicy::ClipProbability(0.01),
        }
    }

    pub fn midrise(bits: u32, clip_prob: f64) -> Self {
        AdcSpec {
            bits,
            step: StepPolicy::ClipProbability(clip_prob),
        }
    }

    /// Number of output levels per real dimension, `2^q`.
    pub fn levels(&self) -> usize {
        1usize << self.bits
    }

    pub fn is_one_bit(&self) -> bool {
        self.bits == 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PilotPlan {
    /// Pilot block length `N_p` (also the pilot DFT size).
    pub length: usize,
    /// Pilot subcarriers `K_P`, signed, on the `N_p` grid.
    pub tones: Band,
    /// Seed of the stream the base station uses for the pilot phases.
    pub phase_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsiMode {
    Perfect,
    Estimated,
}

impl fmt::Display for CsiMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CsiMode::Perfect => "perfect",
            CsiMode::Estimated => "estimated",
        })
    }
}

impl FromStr for CsiMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "perfect" => Ok(CsiMode::Perfect),
            "estimated" => Ok(CsiMode::Estimated),
            other => Err(format!("unknown csi mode `{other}`")),
        }
    }
}

/// All scenario parameters. Amplitudes `rho_*` enter the transmit signal
/// linearly; the corresponding powers are their squares.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    /// M
    pub antennas: usize,
    /// U
    pub users: usize,
    /// I
    pub interferers: usize,
    /// N
    pub fft_size: usize,
    /// L
    pub taps: usize,
    pub cp_len: usize,
    /// K_D
    pub desired_band: Band,
    /// K_I
    pub interfering_band: Band,
    pub rho_d: f64,
    pub rho_i: f64,
    pub rho_p: f64,
    /// Complex noise variance per time sample.
    pub noise_var: f64,
    /// PSK order K.
    pub mod_order: usize,
    pub adc: AdcSpec,
    pub pilot: PilotPlan,
    pub csi: CsiMode,
}

/// `10^(-0.4)`: the noise variance giving `rho_d^2 / N_o = 4 dB` at unit `rho_d`.
pub fn noise_for_snr_db(rho_d: f64, snr_db: f64) -> f64 {
    rho_d * rho_d / 10f64.powf(snr_db / 10.0)
}

impl SystemConfig {
    /// The large-array scenario: M=64, U=I=4, N=1024, L=10, 300-tone bands.
    pub fn baseline() -> Self {
        SystemConfig {
            antennas: 64,
            users: 4,
            interferers: 4,
            fft_size: 1024,
            taps: 10,
            cp_len: 10,
            desired_band: Band::range_excluding(-150, 150, &[0]),
            interfering_band: Band::range_excluding(250, 549, &[]),
            rho_d: 1.0,
            rho_i: 1.0,
            rho_p: 1.0,
            noise_var: noise_for_snr_db(1.0, 4.0),
            mod_order: 4,
            adc: AdcSpec::one_bit(),
            pilot: PilotPlan {
                length: 1024,
                tones: Band::range_excluding(-152, 152, &[0]),
                phase_seed: 0x5eed,
            },
            csi: CsiMode::Perfect,
        }
    }

    /// Desk-scale profile with the same oversampling ratio as the baseline:
    /// M=16, U=I=2, N=256, L=4, 75-tone bands.
    pub fn desk() -> Self {
        SystemConfig {
            antennas: 16,
            users: 2,
            interferers: 2,
            fft_size: 256,
            taps: 4,
            cp_len: 4,
            desired_band: Band::range_excluding(-38, 37, &[0]),
            interfering_band: Band::range_excluding(50, 124, &[]),
            rho_d: 1.0,
            rho_i: 1.0,
            rho_p: 1.0,
            noise_var: noise_for_snr_db(1.0, 4.0),
            mod_order: 4,
            adc: AdcSpec::one_bit(),
            pilot: PilotPlan {
                length: 256,
                tones: Band::range_excluding(-40, 39, &[0]),
                phase_seed: 0x5eed,
            },
            csi: CsiMode::Perfect,
        }
    }

    /// Sets `rho_i` so that `rho_d^2 / rho_i^2` equals `sir_db`.
    pub fn with_sir_db(mut self, sir_db: f64) -> Self {
        self.rho_i = self.rho_d * 10f64.powf(-sir_db / 20.0);
        self
    }

    pub fn sir_db(&self) -> f64 {
        20.0 * (self.rho_d / self.rho_i).log10()
    }

    /// Changes the DFT size keeping the occupied tones fixed (oversampling).
    ///
    /// The delay spread is fixed in seconds, so `L` and the CP scale with `N`;
    /// a pilot block that matched the data block length keeps matching it.
    pub fn with_fft_size(mut self, n: usize) -> Self {
        let old = self.fft_size;
        let scale = |x: usize| ((x * n) as f64 / old as f64).round().max(1.0) as usize;
        self.taps = scale(self.taps);
        self.cp_len = scale(self.cp_len).max(self.taps - 1);
        if self.pilot.length == old {
            self.pilot.length = n;
        }
        self.fft_size = n;
        self
    }
}

/// A configuration that passed [`validate_config`], with derived quantities cached.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedConfig {
    cfg: SystemConfig,
    desired: Vec<usize>,
    interfering: Vec<usize>,
    pilot_tones: Vec<usize>,
    beta_d: f64,
    beta_i: f64,
}

impl Deref for ValidatedConfig {
    type Target = SystemConfig;
    fn deref(&self) -> &SystemConfig {
        &self.cfg
    }
}

impl ValidatedConfig {
    pub fn config(&self) -> &SystemConfig {
        &self.cfg
    }

    pub fn into_inner(self) -> SystemConfig {
        self.cfg
    }

    /// K_D reduced mod N.
    pub fn desired_tones(&self) -> &[usize] {
        &self.desired
    }

    /// K_I reduced mod N.
    pub fn interfering_tones(&self) -> &[usize] {
        &self.interfering
    }

    /// K_P reduced mod N_p.
    pub fn pilot_tones(&self) -> &[usize] {
        &self.pilot_tones
    }

    pub fn beta_d(&self) -> f64 {
        self.beta_d
    }

    /// Infinite when the interfering band is empty.
    pub fn beta_i(&self) -> f64 {
        self.beta_i
    }

    /// Total number of transmitting users, U + I.
    pub fn total_users(&self) -> usize {
        self.users + self.interferers
    }

    /// Ensemble per-antenna receive power `(|K_D| U rho_d^2 + |K_I| I rho_i^2)/N + N_o`.
    pub fn rx_power(&self) -> f64 {
        let n = self.fft_size as f64;
        (self.desired.len() as f64 * self.users as f64 * self.rho_d.powi(2)
            + self.interfering.len() as f64 * self.interferers as f64 * self.rho_i.powi(2))
            / n
            + self.noise_var
    }

    /// Ensemble per-antenna receive power during the pilot block.
    pub fn pilot_rx_power(&self) -> f64 {
        let np = self.pilot.length as f64;
        (self.pilot_tones.len() as f64 * self.users as f64 * self.rho_p.powi(2)
            + self.pilot_interfering_tones().len() as f64
                * self.interferers as f64
                * self.rho_i.powi(2))
            / np
            + self.noise_var
    }

    /// K_I reduced mod N_p (interferers keep transmitting during the pilot block).
    pub fn pilot_interfering_tones(&self) -> Vec<usize> {
        self.interfering_band.indices(self.pilot.length)
    }
}

fn check_distinct(band: &Band, name: &'static str, n: usize) -> Result<Vec<usize>, ConfigError> {
    let idx = band.indices(n);
    let mut seen = vec![false; n];
    for &k in &idx {
        if seen[k] {
            return Err(ConfigError::DuplicateTone { band: name, tone: k });
        }
        seen[k] = true;
    }
    Ok(idx)
}

fn positive(name: &'static str, value: f64) -> Result<(), ConfigError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::InvalidParameter {
            name,
            what: "positive and finite",
            value,
        })
    }
}

fn non_negative(name: &'static str, value: f64) -> Result<(), ConfigError> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::InvalidParameter {
            name,
            what: "non-negative and finite",
            value,
        })
    }
}

/// Checks every invariant of [`SystemConfig`]; returns it unchanged on success.
pub fn validate_config(cfg: SystemConfig) -> Result<ValidatedConfig, ConfigError> {
    let n = cfg.fft_size;
    if n == 0 {
        return Err(ConfigError::InvalidParameter {
            name: "fft_size",
            what: "at least 1",
            value: 0.0,
        });
    }
    if cfg.taps == 0 {
        return Err(ConfigError::InvalidParameter {
            name: "taps",
            what: "at least 1",
            value: 0.0,
        });
    }
    if cfg.users == 0 {
        return Err(ConfigError::InvalidParameter {
            name: "users",
            what: "at least 1",
            value: 0.0,
        });
    }
    if cfg.desired_band.is_empty() {
        return Err(ConfigError::EmptyBand("desired_band"));
    }
    let desired = check_distinct(&cfg.desired_band, "desired_band", n)?;
    let interfering = check_distinct(&cfg.interfering_band, "interfering_band", n)?;
    let mut occupied = vec![false; n];
    for &k in &desired {
        occupied[k] = true;
    }
    if let Some(&k) = interfering.iter().find(|&&k| occupied[k]) {
        return Err(ConfigError::BandOverlap(k));
    }
    if cfg.cp_len + 1 < cfg.taps {
        return Err(ConfigError::ShortCp {
            cp_len: cfg.cp_len,
            required: cfg.taps - 1,
        });
    }
    if cfg.pilot.length < cfg.users * cfg.taps {
        return Err(ConfigError::ShortPilot {
            len: cfg.pilot.length,
            required: cfg.users * cfg.taps,
        });
    }
    if cfg.antennas <= cfg.users {
        return Err(ConfigError::DegenerateZf {
            antennas: cfg.antennas,
            users: cfg.users,
        });
    }
    if !SUPPORTED_ORDERS.contains(&cfg.mod_order) {
        return Err(ConfigError::UnsupportedOrder(cfg.mod_order));
    }
    if cfg.adc.bits == 0 || cfg.adc.bits > 16 {
        return Err(ConfigError::InvalidBits(cfg.adc.bits));
    }
    match cfg.adc.step {
        StepPolicy::ClipProbability(p) if !(p > 0.0 && p < 1.0) => {
            return Err(ConfigError::InvalidClipProb(p))
        }
        StepPolicy::Explicit(d) => positive("adc.step", d)?,
        _ => {}
    }
    positive("rho_d", cfg.rho_d)?;
    non_negative("rho_i", cfg.rho_i)?;
    positive("rho_p", cfg.rho_p)?;
    non_negative("noise_var", cfg.noise_var)?;

    let np = cfg.pilot.length;
    let pilot_tones = check_distinct(&cfg.pilot.tones, "pilot.tones", np)?;
    let mut pilot_interf = vec![false; np];
    for k in cfg.interfering_band.indices(np) {
        pilot_interf[k] = true;
    }
    if let Some(&k) = pilot_tones.iter().find(|&&k| pilot_interf[k]) {
        return Err(ConfigError::PilotOverlap(k));
    }
    if cfg.csi == CsiMode::Estimated {
        if cfg.pilot.tones.is_empty() {
            return Err(ConfigError::EmptyBand("pilot.tones"));
        }
        if !cfg.adc.is_one_bit() {
            return Err(ConfigError::MultibitEstimation(cfg.adc.bits));
        }
    }

    let beta_d = n as f64 / desired.len() as f64;
    let beta_i = if interfering.is_empty() {
        f64::INFINITY
    } else {
        n as f64 / interfering.len() as f64
    };
    Ok(ValidatedConfig {
        cfg,
        desired,
        interfering,
        pilot_tones,
        beta_d,
        beta_i,
    })
}

impl fmt::Display for SystemConfig {
    /// Canonical TOML rendering with dotted keys; [`parse_config`] reads it back unchanged.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "system.antennas = {}", self.antennas)?;
        writeln!(f, "system.users = {}", self.users)?;
        writeln!(f, "system.interferers = {}", self.interferers)?;
        writeln!(f, "system.fft_size = {}", self.fft_size)?;
        writeln!(f, "system.taps = {}", self.taps)?;
        writeln!(f, "system.cp_len = {}", self.cp_len)?;
        writeln!(f, "band.desired = \"{}\"", self.desired_band)?;
        writeln!(f, "band.interfering = \"{}\"", self.interfering_band)?;
        writeln!(f, "power.rho_d = {}", self.rho_d)?;
        writeln!(f, "power.rho_i = {}", self.rho_i)?;
        writeln!(f, "power.rho_p = {}", self.rho_p)?;
        writeln!(f, "power.noise_var = {}", self.noise_var)?;
        writeln!(f, "modulation.order = {}", self.mod_order)?;
        writeln!(f, "adc.bits = {}", self.adc.bits)?;
        match self.adc.step {
            StepPolicy::Explicit(d) => writeln!(f, "adc.step = {d}")?,
            StepPolicy::ClipProbability(p) => writeln!(f, "adc.clip_prob = {p}")?,
        }
        writeln!(f, "pilot.length = {}", self.pilot.length)?;
        writeln!(f, "pilot.tones = \"{}\"", self.pilot.tones)?;
        writeln!(f, "pilot.phase_seed = {}", self.pilot.phase_seed)?;
        writeln!(f, "csi.mode = \"{}\"", self.csi)
    }
}

/// Parses a TOML config.
///
/// Keys missing from the file keep their value from [`SystemConfig::desk`].
/// `power.snr_db` may replace `power.noise_var` (`N_o = rho_d^2 / 10^(snr/10)`) and
/// `power.sir_db` may replace `power.rho_i`. Bands and the CSI mode are strings.
pub fn parse_config(text: &str) -> Result<SystemConfig, ConfigError> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse {
        line: e.span().map_or(0, |s| line_at(text, s.start)),
        msg: e.message().to_string(),
    })?;
    let mut cfg = SystemConfig::desk();
    let mut snr_db = None;
    let mut sir_db = None;
    for (section, body) in &table {
        let Some(body) = body.as_table() else {
            return Err(ConfigError::Parse {
                line: key_line(text, section, None),
                msg: format!("`{section}` must be a section"),
            });
        };
        for (name, value) in body {
            let key = format!("{section}.{name}");
            let err = |msg: String| ConfigError::Parse {
                line: key_line(text, section, Some(name)),
                msg,
            };
            let int = || {
                value
                    .as_integer()
                    .and_then(|v| usize::try_from(v).ok())
                    .ok_or_else(|| err(format!("`{key}` must be a non-negative integer")))
            };
            let float = || {
                value
                    .as_float()
                    .or_else(|| value.as_integer().map(|v| v as f64))
                    .ok_or_else(|| err(format!("`{key}` must be a number")))
            };
            let string = || value.as_str().ok_or_else(|| err(format!("`{key}` must be a string")));
            match key.as_str() {
                "system.antennas" => cfg.antennas = int()?,
                "system.users" => cfg.users = int()?,
                "system.interferers" => cfg.interferers = int()?,
                "system.fft_size" => cfg.fft_size = int()?,
                "system.taps" => cfg.taps = int()?,
                "system.cp_len" => cfg.cp_len = int()?,
                "band.desired" | "band.kd" => cfg.desired_band = string()?.parse().map_err(err)?,
                "band.interfering" | "band.ki" => {
                    cfg.interfering_band = string()?.parse().map_err(err)?
                }
                "power.rho_d" => cfg.rho_d = float()?,
                "power.rho_i" => cfg.rho_i = float()?,
                "power.rho_p" => cfg.rho_p = float()?,
                "power.noise_var" => cfg.noise_var = float()?,
                "power.snr_db" => snr_db = Some(float()?),
                "power.sir_db" => sir_db = Some(float()?),
                "modulation.order" => cfg.mod_order = int()?,
                "adc.bits" => {
                    cfg.adc.bits = u32::try_from(int()?).map_err(|_| err("`adc.bits` is too large".into()))?
                }
                "adc.step" => cfg.adc.step = StepPolicy::Explicit(float()?),
                "adc.clip_prob" => cfg.adc.step = StepPolicy::ClipProbability(float()?),
                "pilot.length" => cfg.pilot.length = int()?,
                "pilot.tones" => cfg.pilot.tones = string()?.parse().map_err(err)?,
                "pilot.phase_seed" => cfg.pilot.phase_seed = int()? as u64,
                "csi.mode" => cfg.csi = string()?.parse().map_err(err)?,
                _ => return Err(err(format!("unknown key `{key}`"))),
            }
        }
    }
    if let Some(snr) = snr_db {
        cfg.noise_var = noise_for_snr_db(cfg.rho_d, snr);
    }
    if let Some(sir) = sir_db {
        cfg = cfg.with_sir_db(sir);
    }
    Ok(cfg)
}

fn line_at(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Best-effort line of `section.name` (dotted or under a `[section]` header).
fn key_line(text: &str, section: &str, name: Option<&str>) -> usize {
    let mut current = "";
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(h) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = h.trim();
            if name.is_none() && current == section {
                return i + 1;
            }
            continue;
        }
        let Some((k, _)) = line.split_once('=') else { continue };
        let k = k.trim();
        let full = if current.is_empty() { k.to_string() } else { format!("{current}.{k}") };
        let hit = match name {
            Some(n) => full == format!("{section}.{n}"),
            None => full == section || full.starts_with(&format!("{section}.")),
        };
        if hit {
            return i + 1;
        }
    }
    0
}
