//! Brute-force batteries that check the analytic engine against independent
//! computations: Monte-Carlo sign correlations, full block-Toeplitz sums,
//! Bussgang regression and SVD pseudo-inverses.

use std::fmt;
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use crate::bussgang::{
    arcsine_law, freq_covariance, gain_multibit, gain_onebit, lag_covariances, multibit_gain,
    onebit_lag_covariances, prop1_lag_covariance, prop2_all_tones, FreqCovarianceSet,
    NoiseSupport,
};
use crate::channel::{complex_gaussian, draw_channel, PowerDelayProfile};
use crate::config::{validate_config, AdcSpec, Band, SystemConfig};
use crate::quantizer::{choose_step_size, Quantizer};
use crate::receiver::zf_matrix;
use crate::rng::{Purpose, RngStream};
use crate::CMat;

/// One named comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub suite: &'static str,
    pub checks: Vec<Check>,
    pub wall_ms: u128,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

impl fmt::Display for OracleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let failed = self.failures().count();
        writeln!(
            f,
            "{}: {} ({} checks, {} failed, {} ms)",
            self.suite,
            if failed == 0 { "PASS" } else { "FAIL" },
            self.checks.len(),
            failed,
            self.wall_ms
        )?;
        for c in self.failures() {
            writeln!(f, "  FAIL {}: {}", c.name, c.detail)?;
        }
        Ok(())
    }
}

pub const SUITES: [&str; 5] = ["arcsine", "prop1", "prop2", "bussgang", "zf"];

/// Runs a suite by name.
pub fn run_suite(name: &str, seed: u64) -> Option<OracleReport> {
    Some(match name {
        "arcsine" => arcsine_suite(seed, 50, 1_000_000),
        "prop1" => prop1_suite(seed),
        "prop2" => prop2_suite(seed),
        "bussgang" => bussgang_suite(seed, 1_000_000),
        "zf" => zf_suite(seed),
        _ => return None,
    })
}

/// Complex sample mean with its standard error `√(Σ|x - x̄|² / (n(n-1)))`.
#[derive(Debug, Clone, Copy, Default)]
struct ComplexMean {
    n: u64,
    sum: Complex64,
    sum_abs2: f64,
}

impl ComplexMean {
    fn push(&mut self, x: Complex64) {
        self.n += 1;
        self.sum += x;
        self.sum_abs2 += x.norm_sqr();
    }

    fn mean(&self) -> Complex64 {
        self.sum / self.n as f64
    }

    fn stderr(&self) -> f64 {
        let n = self.n as f64;
        let var = (self.sum_abs2 - self.sum.norm_sqr() / n) / (n - 1.0);
        (var.max(0.0) / n).sqrt()
    }
}

fn random_covariance<R: Rng + ?Sized>(m: usize, rng: &mut R) -> CMat {
    let w = DMatrix::from_fn(m, m, |_, _| complex_gaussian(rng, 1.0));
    &w * w.adjoint() + CMat::identity(m, m) * Complex64::new(0.05, 0.0)
}

/// Correlated circular Gaussian vectors with covariance `c`.
fn sampler(c: &CMat) -> impl Fn(&mut dyn rand::RngCore) -> Vec<Complex64> {
    let l = c.clone().cholesky().expect("positive definite").l();
    let m = c.nrows();
    move |rng| {
        let z: Vec<Complex64> = (0..m).map(|_| complex_gaussian(rng, 1.0)).collect();
        (0..m)
            .map(|i| (0..=i).map(|j| l[(i, j)] * z[j]).sum())
            .collect()
    }
}

/// Sign-quantizer output correlations of random 2×2 covariances against Monte-Carlo.
pub fn arcsine_suite(seed: u64, cases: usize, samples: u64) -> OracleReport {
    let start = Instant::now();
    let mut rng = RngStream::new(seed, 0, Purpose::Oracle).rng();
    let mut checks = Vec::new();
    for case in 0..cases {
        let c = random_covariance(2, &mut rng);
        let analytic = arcsine_law(&c, &c).expect("valid covariance")[(0, 1)];
        let draw = sampler(&c);
        let mut acc = ComplexMean::default();
        for _ in 0..samples {
            let x = draw(&mut rng);
            let d0 = Quantizer::OneBit.apply(x[0]);
            let d1 = Quantizer::OneBit.apply(x[1]);
            acc.push(d0 * d1.conj());
        }
        let dev = (acc.mean() - analytic).norm() / acc.stderr();
        checks.push(Check {
            name: format!("case {case}"),
            pass: dev <= 3.0,
            detail: format!(
                "analytic {analytic:.5}, empirical {:.5}, deviation {dev:.2} sigma",
                acc.mean()
            ),
        });
    }
    OracleReport {
        suite: "arcsine",
        checks,
        wall_ms: start.elapsed().as_millis(),
    }
}

fn max_abs(a: &CMat) -> f64 {
    a.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

fn relative(a: &CMat, b: &CMat) -> f64 {
    max_abs(&(a - b)) / max_abs(b).max(f64::MIN_POSITIVE)
}

/// An N=8, M=2 scenario with both bands occupied.
fn tiny_covariances(seed: u64) -> FreqCovarianceSet {
    let mut cfg = SystemConfig::desk();
    cfg.antennas = 2;
    cfg.users = 1;
    cfg.interferers = 1;
    cfg.fft_size = 8;
    cfg.taps = 2;
    cfg.cp_len = 2;
    cfg.desired_band = Band::new(vec![1, 2, -1]);
    cfg.interfering_band = Band::new(vec![3, 4, 5]);
    cfg.pilot.length = 8;
    cfg.pilot.tones = Band::new(vec![1, 2, -1]);
    let cfg = validate_config(cfg).expect("valid oracle config");
    let mut rng = RngStream::new(seed, 1, Purpose::Oracle).rng();
    let ch = draw_channel(&cfg, &PowerDelayProfile::uniform(2), &mut rng);
    freq_covariance(&ch, &cfg, NoiseSupport::AllTones)
}

/// Full `NM × NM` time-domain covariance from per-tone covariances through
/// explicit DFT matrices: `C = F⁻¹ blockdiag(C_r̃[k]) F⁻ᴴ` (antenna-major blocks).
pub fn full_time_covariance(fc: &FreqCovarianceSet) -> CMat {
    let n = fc.len();
    let m = fc.dim();
    let nm = n * m;
    let finv = CMat::from_fn(nm, nm, |row, col| {
        let (t, i) = (row / m, row % m);
        let (k, j) = (col / m, col % m);
        if i == j {
            Complex64::from_polar(1.0 / n as f64, 2.0 * std::f64::consts::PI * (t * k) as f64 / n as f64)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let mut block = CMat::zeros(nm, nm);
    for k in 0..n {
        block.view_mut((k * m, k * m), (m, m)).copy_from(fc.get(k));
    }
    &finv * block * finv.adjoint()
}

/// Lag covariances from the per-tone transform versus the full covariance.
pub fn prop1_suite(seed: u64) -> OracleReport {
    let start = Instant::now();
    let mut checks = Vec::new();
    for case in 0..5u64 {
        let fc = tiny_covariances(seed.wrapping_add(case));
        let n = fc.len();
        let m = fc.dim();
        let full = full_time_covariance(&fc);
        let fft = lag_covariances(&fc);
        for (lag, f) in fft.iter().enumerate() {
            let mut worst = 0.0f64;
            for t in 0..n {
                let s = (t + n - lag) % n;
                let brute = full.view((t * m, s * m), (m, m)).into_owned();
                worst = worst.max(relative(f, &brute));
                worst = worst.max(relative(&prop1_lag_covariance(&fc, lag), &brute));
            }
            checks.push(Check {
                name: format!("case {case} lag {lag}"),
                pass: worst < 1e-10,
                detail: format!("max relative error {worst:.3e}"),
            });
        }
    }
    OracleReport {
        suite: "prop1",
        checks,
        wall_ms: start.elapsed().as_millis(),
    }
}

/// `Σ_n Σ_n' C[n - n'] e^{-j2π(n-n')k/N}` with `C[-ℓ] = C[ℓ]ᴴ`.
pub fn toeplitz_double_sum(lags: &[CMat], k: usize) -> CMat {
    let n = lags.len();
    let dim = lags[0].nrows();
    let mut acc = CMat::zeros(dim, dim);
    for a in 0..n {
        for b in 0..n {
            let d = a as i64 - b as i64;
            let c = if d >= 0 {
                lags[d as usize].clone()
            } else {
                lags[(-d) as usize].adjoint()
            };
            let phase = -2.0 * std::f64::consts::PI * (d * k as i64) as f64 / n as f64;
            acc += c * Complex64::from_polar(1.0, phase);
        }
    }
    acc
}

/// Per-tone distortion covariances against the block-Toeplitz double sum, for
/// one-bit lags of random channels and for arbitrary lag sequences.
pub fn prop2_suite(seed: u64) -> OracleReport {
    let start = Instant::now();
    let mut checks = Vec::new();
    let mut rng = RngStream::new(seed, 2, Purpose::Oracle).rng();
    for case in 0..10u64 {
        let lags = if case < 5 {
            onebit_lag_covariances(&tiny_covariances(seed.wrapping_add(case)))
                .expect("valid covariances")
                .c_q
        } else {
            let mut l: Vec<CMat> = (0..8)
                .map(|_| DMatrix::from_fn(2, 2, |_, _| complex_gaussian(&mut rng, 1.0)))
                .collect();
            l[0] = random_covariance(2, &mut rng);
            l
        };
        let fast = prop2_all_tones(&lags);
        let mut worst = 0.0f64;
        for (k, f) in fast.iter().enumerate() {
            worst = worst.max(relative(f, &toeplitz_double_sum(&lags, k)));
            worst = worst.max(relative(&crate::bussgang::prop2_freq_quant_cov(&lags, k), &toeplitz_double_sum(&lags, k)));
        }
        checks.push(Check {
            name: format!("case {case}"),
            pass: worst < 1e-10,
            detail: format!("max relative error {worst:.3e}"),
        });
    }
    OracleReport {
        suite: "prop2",
        checks,
        wall_ms: start.elapsed().as_millis(),
    }
}

/// `E[q r^H] = 0` for `q = d - A r` on correlated Gaussian inputs, plus the
/// gains against least-squares regression.
pub fn bussgang_suite(seed: u64, samples: u64) -> OracleReport {
    let start = Instant::now();
    let mut checks = Vec::new();
    let mut rng = RngStream::new(seed, 3, Purpose::Oracle).rng();
    let c = random_covariance(2, &mut rng);
    let mean_power = (c[(0, 0)].re + c[(1, 1)].re) / 2.0;
    let quantizers: Vec<(String, Quantizer, Vec<f64>)> = {
        let mut v = vec![(
            "1-bit".to_string(),
            Quantizer::OneBit,
            gain_onebit(&c).expect("positive").iter().copied().collect(),
        )];
        for bits in [2, 3] {
            let codec = choose_step_size(&AdcSpec::midrise(bits, 0.01), mean_power).expect("valid");
            let g = gain_multibit(&c, &codec).expect("positive");
            v.push((format!("{bits}-bit"), Quantizer::Midrise(codec), g.iter().copied().collect()));
        }
        v
    };
    let draw = sampler(&c);
    let inputs: Vec<Vec<Complex64>> = (0..samples).map(|_| draw(&mut rng)).collect();
    for (label, quant, gain) in &quantizers {
        let mut cross = [[ComplexMean::default(); 2]; 2];
        let mut reg_num = [Complex64::new(0.0, 0.0); 2];
        let mut reg_den = [0.0; 2];
        for x in &inputs {
            let d: Vec<Complex64> = x.iter().map(|&z| quant.apply(z)).collect();
            let q: Vec<Complex64> = (0..2).map(|i| d[i] - x[i] * gain[i]).collect();
            for i in 0..2 {
                for j in 0..2 {
                    cross[i][j].push(q[i] * x[j].conj());
                }
                reg_num[i] += d[i] * x[i].conj();
                reg_den[i] += x[i].norm_sqr();
            }
        }
        let worst = cross
            .iter()
            .flatten()
            .map(|acc| acc.mean().norm() / acc.stderr())
            .fold(0.0, f64::max);
        checks.push(Check {
            name: format!("{label} orthogonality"),
            pass: worst <= 3.0,
            detail: format!("max |E[q r^H]| at {worst:.2} sigma"),
        });
        for i in 0..2 {
            let empirical = reg_num[i].re / reg_den[i];
            let rel = (empirical - gain[i]).abs() / gain[i];
            checks.push(Check {
                name: format!("{label} gain antenna {i}"),
                pass: rel < 0.01,
                detail: format!("analytic {:.5}, regression {empirical:.5}", gain[i]),
            });
        }
    }
    // the midrise gain at q = 1 and the degenerate step collapses to the sign gain
    let q1 = crate::quantizer::MidriseCodec::new(1, 2.0).expect("valid");
    let g1 = multibit_gain(&q1, c[(0, 0)].re);
    let g0 = gain_onebit(&c).expect("positive")[0];
    checks.push(Check {
        name: "midrise q=1 collapse".into(),
        pass: (g1 - g0).abs() < 1e-12 * g0,
        detail: format!("{g1} vs {g0}"),
    });
    OracleReport {
        suite: "bussgang",
        checks,
        wall_ms: start.elapsed().as_millis(),
    }
}

/// QR-based zero forcing against the SVD pseudo-inverse.
pub fn zf_suite(seed: u64) -> OracleReport {
    let start = Instant::now();
    let mut rng = RngStream::new(seed, 4, Purpose::Oracle).rng();
    let mut checks = Vec::new();
    for (case, (m, u)) in [(4, 2), (8, 3), (16, 2), (64, 4), (3, 3)].iter().enumerate() {
        let h = DMatrix::from_fn(*m, *u, |_, _| complex_gaussian(&mut rng, 1.0));
        let b = zf_matrix(&h, case).expect("well conditioned");
        let pinv = h.clone().pseudo_inverse(1e-14).expect("svd");
        let rel = relative(&b, &pinv);
        let resid = max_abs(&(&b * &h - CMat::identity(*u, *u)));
        checks.push(Check {
            name: format!("{m}x{u}"),
            pass: rel < 1e-10 && resid < 1e-9,
            detail: format!("relative difference {rel:.2e}, residual {resid:.2e}"),
        });
    }
    OracleReport {
        suite: "zf",
        checks,
        wall_ms: start.elapsed().as_millis(),
    }
}
