//! On-off Cox processes and their renewal representation.
//!
//! A Cox process whose intensity alternates between `λ` (for `Exp(k)`
//! periods) and `0` (for periods drawn from `G`) is a renewal process with
//! inter-arrival transform `λ / (λ + θ + k (1 - φ_G(θ)))`. This crate
//! simulates both sides of that correspondence, evaluates the transforms,
//! and provides the statistics to check one against the other.

pub mod csvfmt;
pub mod distributions;
pub mod error;
pub mod process;
pub mod rng;
pub mod transforms;
pub mod verify;

pub use distributions::{OffSpec, OffTimeDistribution};
pub use error::{Error, Result};
pub use process::{DsppModel, EventStream, InitMode, IntensityPath, Level, Segment};
pub use rng::Stream;
pub use transforms::{LstDiagnostics, TransformGrid, STANDARD_GRID};
