pub mod bussgang;
pub mod channel;
pub mod config;
pub mod constellation;
pub mod dft;
pub mod error;
pub mod estimator;
pub mod metrics;
pub mod oracle;
pub mod quantizer;
pub mod receiver;
pub mod rng;
pub mod runner;
pub mod special;
pub mod waveform;

pub use num_complex::Complex64 as C64;

/// Dense complex matrix.
pub type CMat = nalgebra::DMatrix<C64>;
/// Dense complex column vector.
pub type CVec = nalgebra::DVector<C64>;
