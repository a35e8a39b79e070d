use std::io;

use thiserror::Error;

/// Configuration problems. These are reported with exit code 1 by the CLI.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("desired and interfering bands overlap at tone {0}")]
    BandOverlap(usize),
    #[error("pilot tones overlap the interfering band at tone {0}")]
    PilotOverlap(usize),
    #[error("band `{band}` maps two entries onto tone {tone} (mod N)")]
    DuplicateTone { band: &'static str, tone: usize },
    #[error("band `{0}` is empty")]
    EmptyBand(&'static str),
    #[error("cyclic prefix of {cp_len} samples is shorter than L-1 = {required}")]
    ShortCp { cp_len: usize, required: usize },
    #[error("pilot length {len} is shorter than U*L = {required}")]
    ShortPilot { len: usize, required: usize },
    #[error("zero forcing needs M > U (M = {antennas}, U = {users})")]
    DegenerateZf { antennas: usize, users: usize },
    #[error("unsupported PSK order {0}; expected 2, 4, 8 or 16")]
    UnsupportedOrder(usize),
    #[error("clip probability {0} is outside (0, 1)")]
    InvalidClipProb(f64),
    #[error("invalid ADC resolution: {0} bits")]
    InvalidBits(u32),
    #[error("estimated CSI is only modelled for one-bit ADCs (got {0} bits)")]
    MultibitEstimation(u32),
    #[error("parameter `{name}` must be {what} (got {value})")]
    InvalidParameter {
        name: &'static str,
        what: &'static str,
        value: f64,
    },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("missing key `{0}`")]
    MissingKey(String),
}

/// Runtime failures of the numerical engine and the runner.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("covariance diagonal entry {index} is not positive ({value})")]
    SingularInput { index: usize, value: f64 },
    #[error("arcsine argument {value} at ({row}, {col}) is outside [-1, 1]")]
    DomainError { row: usize, col: usize, value: f64 },
    #[error("channel matrix at tone {tone} is rank deficient (condition number {cond:e})")]
    RankDeficient { tone: usize, cond: f64 },
    #[error("channel of {taps} taps does not fit a cyclic prefix of {cp_len}")]
    CpViolation { taps: usize, cp_len: usize },
    #[error("user {user} has {got} pilot tones, spline needs at least {needed}")]
    InsufficientPilots {
        user: usize,
        got: usize,
        needed: usize,
    },
    #[error("predicted estimation error {0} is outside [0, 1)")]
    OutOfRange(f64),
    #[error("bit streams differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("trial {trial} failed: {source}")]
    Trial {
        trial: u64,
        #[source]
        source: Box<Error>,
    },
    #[error("malformed csv: {0}")]
    Csv(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
