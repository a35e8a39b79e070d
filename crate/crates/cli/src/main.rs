use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use quantlink::config::{parse_config, validate_config, SystemConfig};
use quantlink::error::Error;
use quantlink::oracle::{run_suite, SUITES};
use quantlink::runner::{
    config_hash, linear_grid, run_sweep, write_csv, Metric, PointOptions, SweepSpec,
    SweepVariable, TrialPlan,
};

#[derive(Parser)]
#[command(name = "quantlink", version, about = "Quantized massive MIMO-OFDM uplink simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep one parameter and write results as CSV.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        sweep: Variable,
        #[arg(long, allow_hyphen_values = true)]
        from: f64,
        #[arg(long, allow_hyphen_values = true)]
        to: f64,
        #[arg(long)]
        step: f64,
        /// Trial cap per point; points stop early once enough bit errors are seen.
        #[arg(long, default_value_t = 256)]
        trials: u64,
        /// Run exactly `--trials` trials per point.
        #[arg(long)]
        fixed: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated metric names; all metrics by default.
        #[arg(long, value_delimiter = ',')]
        metrics: Vec<String>,
        /// Output file; stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a config file and print its canonical form.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a numerical oracle suite, or `all`.
    Oracle {
        suite: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Variable {
    Sir,
    #[value(alias = "fft_size")]
    N,
    #[value(alias = "q")]
    Bits,
}

enum Failure {
    Validation(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(c) => Failure::Validation(c.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn load(path: &Path) -> Result<SystemConfig, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Validation(format!("cannot read {}: {e}", path.display())))?;
    let cfg = parse_config(&text).map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))?;
    validate_config(cfg.clone()).map_err(|e| Failure::Validation(e.to_string()))?;
    Ok(cfg)
}

fn integral<T: TryFrom<u64>>(grid: &[f64], name: &str) -> Result<Vec<T>, Failure> {
    grid.iter()
        .map(|&v| {
            (v >= 0.0 && v.fract() == 0.0)
                .then(|| T::try_from(v as u64).ok())
                .flatten()
                .ok_or_else(|| Failure::Validation(format!("{name} grid value {v} is not a valid integer")))
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn sweep(
    config: &Path,
    variable: Variable,
    (from, to, step): (f64, f64, f64),
    trials: u64,
    fixed: bool,
    seed: u64,
    metrics: &[String],
    out: Option<&Path>,
) -> Result<(), Failure> {
    let base = load(config)?;
    if !(step > 0.0 && step.is_finite() && from.is_finite() && to.is_finite()) {
        return Err(Failure::Validation(format!("bad grid {from}..{to} step {step}")));
    }
    if trials == 0 {
        return Err(Failure::Validation("--trials must be at least 1".into()));
    }
    let grid = linear_grid(from, to, step);
    if grid.is_empty() {
        return Err(Failure::Validation(format!("empty grid {from}..{to} step {step}")));
    }
    let variable = match variable {
        Variable::Sir => SweepVariable::Sir(grid),
        Variable::N => SweepVariable::FftSize(integral(&grid, "n")?),
        Variable::Bits => SweepVariable::Bits(integral(&grid, "bits")?),
    };
    // Reject bad points before spending time on the good ones.
    for i in 0..variable.len() {
        validate_config(variable.point(&base, i).1).map_err(|e| Failure::Validation(e.to_string()))?;
    }
    let metrics = metrics
        .iter()
        .map(|m| m.parse::<Metric>().map_err(Failure::Validation))
        .collect::<Result<Vec<_>, _>>()?;
    let spec = SweepSpec {
        base: base.clone(),
        variable,
        plan: if fixed { TrialPlan::fixed(trials) } else { TrialPlan::capped(trials) },
        metrics,
        seed,
        options: PointOptions::default(),
    };
    let result = run_sweep(&spec)?;
    let write = |w: &mut dyn Write| write_csv(&result, w).map_err(Failure::from);
    match out {
        Some(path) => {
            let file = File::create(path)
                .map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", path.display())))?;
            write(&mut BufWriter::new(file))?;
            eprintln!(
                "wrote {} rows to {} (base config {})",
                result.rows.len(),
                path.display(),
                config_hash(&base)
            );
        }
        None => write(&mut io::stdout().lock())?,
    }
    Ok(())
}

fn oracle(suite: &str, seed: u64) -> Result<(), Failure> {
    let names: Vec<&str> = if suite == "all" {
        SUITES.to_vec()
    } else if SUITES.contains(&suite) {
        vec![suite]
    } else {
        return Err(Failure::Validation(format!(
            "unknown suite `{suite}`; expected one of {} or all",
            SUITES.join(", ")
        )));
    };
    let mut failed = Vec::new();
    for name in names {
        let report = run_suite(name, seed).expect("listed suite");
        print!("{report}");
        if !report.passed() {
            failed.push(name);
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Runtime(format!("oracle suites failed: {}", failed.join(", "))))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Sweep {
            config,
            sweep: variable,
            from,
            to,
            step,
            trials,
            fixed,
            seed,
            metrics,
            out,
        } => sweep(config, *variable, (*from, *to, *step), *trials, *fixed, *seed, metrics, out.as_deref()),
        Command::Validate { config } => load(config).map(|cfg| {
            print!("{cfg}");
            println!("# config_hash = {}", config_hash(&cfg));
        }),
        Command::Oracle { suite, seed } => oracle(suite, *seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
