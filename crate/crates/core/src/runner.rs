//! Experiment orchestration: Monte-Carlo trials, the analytic chains, sweeps
//! and CSV persistence.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::bussgang::{freq_covariance, BussgangModel, NoiseSupport};
use crate::channel::{apply_channel, draw_channel, PowerDelayProfile};
use crate::config::{validate_config, CsiMode, SystemConfig, ValidatedConfig};
use crate::constellation::{psk_constellation, Psk};
use crate::dft::Dft;
use crate::error::{Error, Result};
use crate::estimator::{comb_error, estimate_channel, sigma_e2_predict, ChannelEstimate};
use crate::metrics::{ber_from_sindr, count_errors, rate, rate_approx, BerEstimate};
use crate::quantizer::Quantizer;
use crate::receiver::{detect_bits, effective_gains, sindr_approx, sindr_tight, ZfCombiner};
use crate::rng::{Purpose, RngStream};
use crate::waveform::{draw_data_symbols, make_pilot_block, modulate_grid, PilotBlock};

/// Code version written into every result row.
pub const VERSION: &str = concat!("quantlink-", env!("CARGO_PKG_VERSION"));

/// Adaptive stopping: run batches until both `min_trials` and `min_errors`
/// are reached, or `max_trials` is hit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialPlan {
    pub min_trials: u64,
    pub max_trials: u64,
    pub min_errors: u64,
    /// Trials per parallel batch. Fixed batch boundaries keep the stopping
    /// point, and hence every number, independent of the thread count.
    pub batch: u64,
}

impl TrialPlan {
    pub fn capped(max_trials: u64) -> Self {
        TrialPlan {
            min_trials: max_trials.min(8),
            max_trials,
            min_errors: 100,
            batch: 16,
        }
    }

    /// Exactly `n` trials.
    pub fn fixed(n: u64) -> Self {
        TrialPlan {
            min_trials: n,
            max_trials: n,
            min_errors: 0,
            batch: 16,
        }
    }
}

/// Statistics the pilot-based receiver uses in the per-realization SINDR.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EstimatedStatistics {
    /// `A = G I`, `C_q[k] = N(2 - 4/π) I`: what a receiver without the true
    /// channel can compute.
    #[default]
    Ensemble,
    /// Exact `A`, `C_q[k]` from the true realization (diagnostics).
    TrueChannel,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PointOptions {
    pub estimated_stats: EstimatedStatistics,
    pub noise_support: NoiseSupport,
    /// Replace the configured ADC by an ideal one.
    pub bypass_quantizer: bool,
    /// Skip the per-realization analytic chain.
    pub skip_tight: bool,
}

/// Running mean and variance of per-trial values.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Moments {
    pub n: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.n as f64
    }

    /// Standard error of the mean.
    pub fn stderr(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        let var = ((self.sum_sq - self.sum * self.sum / n) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    }
}

/// Results of one trial (one coherence interval).
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub errors: BerEstimate,
    /// Mean over (user, tone) of the analytic BER of this realization.
    pub ber_tight: f64,
    pub rate_tight: f64,
    pub gamma_tight: f64,
    /// Comb-tone estimation error `(Σ|ȟ-h|², count)`, estimated CSI only.
    pub comb_error: Option<(f64, usize)>,
}

/// Everything that stays fixed across the trials of a point.
pub struct PointContext {
    pub cfg: ValidatedConfig,
    pub psk: Psk,
    pub quantizer: Quantizer,
    pub pdp: PowerDelayProfile,
    pub dft: Dft,
    pub pilots: Option<PilotBlock>,
    pub seed: u64,
    pub options: PointOptions,
}

impl PointContext {
    pub fn new(cfg: ValidatedConfig, seed: u64, options: PointOptions) -> Result<Self> {
        let psk = psk_constellation(cfg.mod_order)?;
        let quantizer = if options.bypass_quantizer {
            Quantizer::Bypass
        } else {
            Quantizer::from_config(&cfg)?
        };
        let pilots = (cfg.csi == CsiMode::Estimated)
            .then(|| make_pilot_block(&cfg, &Dft::new(cfg.pilot.length)));
        Ok(PointContext {
            psk,
            quantizer,
            pdp: PowerDelayProfile::uniform(cfg.taps),
            dft: Dft::new(cfg.fft_size),
            pilots,
            seed,
            options,
            cfg,
        })
    }

    fn stream(&self, trial: u64, purpose: Purpose) -> rand_chacha::ChaCha12Rng {
        RngStream::new(self.seed, trial, purpose).rng()
    }

    /// Simulates one coherence interval and evaluates the analytic SINDR on it.
    pub fn run_trial(&self, trial: u64) -> Result<TrialOutcome> {
        let cfg = &self.cfg;
        let ch = draw_channel(cfg, &self.pdp, &mut self.stream(trial, Purpose::Channel));
        let est = match &self.pilots {
            None => ChannelEstimate::perfect(&ch, cfg),
            Some(p) => estimate_channel(
                &ch,
                p,
                cfg,
                &self.psk,
                &Quantizer::OneBit,
                &mut self.stream(trial, Purpose::PilotInterference),
                &mut self.stream(trial, Purpose::PilotNoise),
            )?,
        };

        let grid = draw_data_symbols(cfg, &self.psk, &mut self.stream(trial, Purpose::Data));
        let blocks = modulate_grid(cfg, &grid, &self.dft);
        let rx = apply_channel(
            &blocks,
            &ch,
            cfg.noise_var,
            &mut self.stream(trial, Purpose::Noise),
            &self.dft,
        )?;
        let d = self.quantizer.quantize(&rx, &self.dft);

        let model = match (&self.pilots, self.options.estimated_stats) {
            (Some(_), EstimatedStatistics::Ensemble) if !self.options.bypass_quantizer => {
                BussgangModel::ensemble(cfg)?
            }
            _ => {
                let fc = freq_covariance(&ch, cfg, self.options.noise_support);
                BussgangModel::for_quantizer(&fc, &self.quantizer)?
            }
        };

        let zf = ZfCombiner::new(&est, cfg)?;
        let xhat = crate::receiver::zf_combine(&zf, &d);
        let gains = effective_gains(&zf, &est, &model.gain);
        let det = detect_bits(&xhat, &gains, &self.psk);
        let mut errors = BerEstimate::default();
        for u in 0..cfg.users {
            let mut tx = Vec::with_capacity(det.bits[u].len());
            for &s in &grid.symbols[u] {
                self.psk.push_bits(s, &mut tx);
            }
            errors = errors.merge(count_errors(&tx, &det.bits[u])?);
        }

        let (ber_tight, rate_tight, gamma_tight) = if self.options.skip_tight {
            (f64::NAN, f64::NAN, f64::NAN)
        } else {
            let rep = sindr_tight(&est, &zf, &model, cfg);
            let count = rep.terms.len() as f64;
            let (b, r, g) = rep.gammas().fold((0.0, 0.0, 0.0), |(b, r, g), x| {
                (b + ber_from_sindr(x, cfg.mod_order), r + rate(x), g + x)
            });
            (b / count, r / count, g / count)
        };
        Ok(TrialOutcome {
            errors,
            ber_tight,
            rate_tight,
            gamma_tight,
            comb_error: self
                .pilots
                .as_ref()
                .map(|_| comb_error(&est.raw, &ch, cfg.pilot.length)),
        })
    }
}

/// Named metrics of a point, as written to CSV.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    BerSim,
    BerSimLo,
    BerSimHi,
    BerTight,
    BerApprox,
    RateTight,
    RateApprox,
    GammaTight,
    GammaApprox,
    SigmaE2,
    SigmaE2Sim,
}

impl Metric {
    pub const ALL: [Metric; 11] = [
        Metric::BerSim,
        Metric::BerSimLo,
        Metric::BerSimHi,
        Metric::BerTight,
        Metric::BerApprox,
        Metric::RateTight,
        Metric::RateApprox,
        Metric::GammaTight,
        Metric::GammaApprox,
        Metric::SigmaE2,
        Metric::SigmaE2Sim,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Metric::BerSim => "ber_sim",
            Metric::BerSimLo => "ber_sim_lo",
            Metric::BerSimHi => "ber_sim_hi",
            Metric::BerTight => "ber_tight",
            Metric::BerApprox => "ber_approx",
            Metric::RateTight => "rate_tight",
            Metric::RateApprox => "rate_approx",
            Metric::GammaTight => "gamma_tight",
            Metric::GammaApprox => "gamma_approx",
            Metric::SigmaE2 => "sigma_e2",
            Metric::SigmaE2Sim => "sigma_e2_sim",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Metric::ALL
            .iter()
            .find(|m| m.name() == s)
            .copied()
            .ok_or_else(|| format!("unknown metric `{s}`"))
    }
}

/// Aggregated statistics of one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSummary {
    pub trials: u64,
    pub ber_sim: BerEstimate,
    pub ber_tight: Moments,
    pub rate_tight: Moments,
    pub gamma_tight: Moments,
    pub gamma_approx: f64,
    pub sigma_e2: f64,
    pub comb_error: Option<(f64, usize)>,
    pub wall_ms: u128,
}

impl PointSummary {
    pub fn ber_approx(&self, order: usize) -> f64 {
        ber_from_sindr(self.gamma_approx, order)
    }

    /// Empirical normalized MSE of the comb estimates.
    pub fn sigma_e2_sim(&self) -> Option<f64> {
        self.comb_error.map(|(s, c)| s / c as f64)
    }

    /// `(value, stderr)` of a metric, if defined for this point.
    pub fn metric(&self, metric: Metric, order: usize) -> Option<(f64, f64)> {
        let tight = |m: &Moments| (m.n > 0).then(|| (m.mean(), m.stderr()));
        let (lo, hi) = self.ber_sim.interval();
        match metric {
            Metric::BerSim => Some((self.ber_sim.value(), self.ber_sim.stderr())),
            Metric::BerSimLo => Some((lo, 0.0)),
            Metric::BerSimHi => Some((hi, 0.0)),
            Metric::BerTight => tight(&self.ber_tight),
            Metric::BerApprox => Some((self.ber_approx(order), 0.0)),
            Metric::RateTight => tight(&self.rate_tight),
            Metric::RateApprox => Some((rate_approx(self.gamma_approx), 0.0)),
            Metric::GammaTight => tight(&self.gamma_tight),
            Metric::GammaApprox => Some((self.gamma_approx, 0.0)),
            Metric::SigmaE2 => Some((self.sigma_e2, 0.0)),
            Metric::SigmaE2Sim => self.sigma_e2_sim().map(|v| (v, 0.0)),
        }
    }
}

/// Runs trials `0, 1, ...` of a point under `plan`, in parallel batches.
pub fn run_point(cfg: &ValidatedConfig, plan: &TrialPlan, seed: u64, options: PointOptions) -> Result<PointSummary> {
    let start = Instant::now();
    let ctx = PointContext::new(cfg.clone(), seed, options)?;
    let sigma_e2 = match cfg.csi {
        CsiMode::Perfect => 0.0,
        CsiMode::Estimated => sigma_e2_predict(cfg)?,
    };
    let mut summary = PointSummary {
        trials: 0,
        ber_sim: BerEstimate::default(),
        ber_tight: Moments::default(),
        rate_tight: Moments::default(),
        gamma_tight: Moments::default(),
        gamma_approx: sindr_approx(cfg, sigma_e2)?,
        sigma_e2,
        comb_error: None,
        wall_ms: 0,
    };
    let batch = plan.batch.max(1);
    while summary.trials < plan.max_trials {
        let done = summary.trials >= plan.min_trials && summary.ber_sim.errors >= plan.min_errors;
        if done {
            break;
        }
        let end = (summary.trials + batch).min(plan.max_trials);
        let outcomes: Vec<TrialOutcome> = (summary.trials..end)
            .into_par_iter()
            .map(|t| {
                ctx.run_trial(t).map_err(|e| Error::Trial {
                    trial: t,
                    source: Box::new(e),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        for o in outcomes {
            summary.ber_sim = summary.ber_sim.merge(o.errors);
            if !options.skip_tight {
                summary.ber_tight.push(o.ber_tight);
                summary.rate_tight.push(o.rate_tight);
                summary.gamma_tight.push(o.gamma_tight);
            }
            if let Some((s, c)) = o.comb_error {
                let (s0, c0) = summary.comb_error.unwrap_or((0.0, 0));
                summary.comb_error = Some((s0 + s, c0 + c));
            }
        }
        summary.trials = end;
    }
    summary.wall_ms = start.elapsed().as_millis();
    Ok(summary)
}

/// The swept variable and its grid.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepVariable {
    /// SIR in dB, through `rho_i` with `rho_d` fixed.
    Sir(Vec<f64>),
    /// DFT size with fixed occupied tones; taps and CP scale with `N`.
    FftSize(Vec<usize>),
    /// ADC resolution `q`.
    Bits(Vec<u32>),
}

impl SweepVariable {
    pub fn len(&self) -> usize {
        match self {
            SweepVariable::Sir(v) => v.len(),
            SweepVariable::FftSize(v) => v.len(),
            SweepVariable::Bits(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The `i`-th point as `(value, config)`.
    pub fn point(&self, base: &SystemConfig, i: usize) -> (f64, SystemConfig) {
        match self {
            SweepVariable::Sir(v) => (v[i], base.clone().with_sir_db(v[i])),
            SweepVariable::FftSize(v) => (v[i] as f64, base.clone().with_fft_size(v[i])),
            SweepVariable::Bits(v) => {
                let mut c = base.clone();
                c.adc.bits = v[i];
                (v[i] as f64, c)
            }
        }
    }
}

/// Inclusive arithmetic grid `from, from+step, ..., <= to`.
pub fn linear_grid(from: f64, to: f64, step: f64) -> Vec<f64> {
    assert!(step > 0.0);
    let count = ((to - from) / step + 1e-9).floor() as i64 + 1;
    (0..count.max(0)).map(|i| from + i as f64 * step).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub base: SystemConfig,
    pub variable: SweepVariable,
    pub plan: TrialPlan,
    /// Metrics to report; empty means all.
    pub metrics: Vec<Metric>,
    pub seed: u64,
    pub options: PointOptions,
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub point: f64,
    pub metric: String,
    pub value: f64,
    pub stderr: f64,
    pub trials: u64,
    pub config_hash: String,
    pub version: String,
    pub wall_ms: u128,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepResult {
    pub rows: Vec<ResultRow>,
}

impl SweepResult {
    /// Rows of one metric, in point order.
    pub fn series(&self, metric: &str) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter(|r| r.metric == metric)
            .map(|r| (r.point, r.value))
            .collect()
    }
}

/// First 16 hex digits of SHA-256 over the canonical config text.
pub fn config_hash(cfg: &SystemConfig) -> String {
    let digest = Sha256::digest(cfg.to_string().as_bytes());
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Runs every point of the sweep; points in order, trials in parallel.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    if spec.variable.is_empty() {
        return Err(crate::error::ConfigError::InvalidParameter {
            name: "sweep",
            what: "a non-empty grid",
            value: 0.0,
        }
        .into());
    }
    if spec.plan.max_trials == 0 {
        return Err(crate::error::ConfigError::InvalidParameter {
            name: "trials",
            what: "at least 1",
            value: 0.0,
        }
        .into());
    }
    let metrics: Vec<Metric> = if spec.metrics.is_empty() {
        Metric::ALL.to_vec()
    } else {
        spec.metrics.clone()
    };
    let mut result = SweepResult::default();
    for i in 0..spec.variable.len() {
        let (point, cfg) = spec.variable.point(&spec.base, i);
        let cfg = validate_config(cfg)?;
        let summary = run_point(&cfg, &spec.plan, spec.seed, spec.options)?;
        let hash = config_hash(&cfg);
        for m in &metrics {
            if let Some((value, stderr)) = summary.metric(*m, cfg.mod_order) {
                result.rows.push(ResultRow {
                    point,
                    metric: m.name().to_string(),
                    value,
                    stderr,
                    trials: summary.trials,
                    config_hash: hash.clone(),
                    version: VERSION.to_string(),
                    wall_ms: summary.wall_ms,
                });
            }
        }
    }
    Ok(result)
}

pub const CSV_HEADER: [&str; 8] = [
    "point",
    "metric",
    "value",
    "stderr",
    "trials",
    "config_hash",
    "version",
    "wall_ms",
];

pub fn write_csv<W: Write>(result: &SweepResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in &result.rows {
        w.write_record([
            r.point.to_string(),
            r.metric.clone(),
            r.value.to_string(),
            r.stderr.to_string(),
            r.trials.to_string(),
            r.config_hash.clone(),
            r.version.clone(),
            r.wall_ms.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<SweepResult> {
    let mut rd = csv::Reader::from_reader(input);
    let header = rd.headers()?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::Csv(format!("unexpected header `{}`", header.iter().collect::<Vec<_>>().join(","))));
    }
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        fn parse<T: FromStr>(s: &str, what: &str) -> Result<T> {
            s.parse().map_err(|_| Error::Csv(format!("bad {what} `{s}`")))
        }
        rows.push(ResultRow {
            point: parse(field(0), "point")?,
            metric: field(1).to_string(),
            value: parse(field(2), "value")?,
            stderr: parse(field(3), "stderr")?,
            trials: parse(field(4), "trials")?,
            config_hash: field(5).to_string(),
            version: field(6).to_string(),
            wall_ms: parse(field(7), "wall_ms")?,
        });
    }
    Ok(SweepResult { rows })
}

/// All `(q, N)` with ADC power `2^q N` equal to `budget`.
pub fn power_parity_pairs(q_list: &[u32], n_list: &[usize], budget: u64) -> Vec<(u32, usize)> {
    let mut out = Vec::new();
    for &q in q_list {
        for &n in n_list {
            if (1u64 << q) * n as u64 == budget {
                out.push((q, n));
            }
        }
    }
    out
}
