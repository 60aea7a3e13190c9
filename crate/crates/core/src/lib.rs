//! Multifractal detrended fluctuation analysis with a decomposition of the
//! observed spread of the generalized Hurst exponent into a finite-size and
//! linear-correlation part, a fat-tail part and the nonlinear remainder.
//!
//! The pipeline runs bottom-up through the modules:
//!
//! * [`series`]: tick alignment, log-returns, session handling, normalization.
//! * [`qgen`]: q-Gaussian densities and seeded samplers.
//! * [`mfdfa`]: fluctuation surface `F_q(s)` and `h(q)` fits.
//! * [`spectrum`]: `tau(q)`, singularity spectrum, spreads.
//! * [`surrogate`]: Fourier-filtered Gaussian series and shuffles.
//! * [`decompose`]: fat-tail calibration, finite-size terms and the report.

pub mod decompose;
pub mod ensemble;
mod error;
pub mod mfdfa;
pub mod qgen;
mod quad;
pub mod rng;
pub mod series;
pub mod spectrum;
pub mod stats;
pub mod surrogate;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
