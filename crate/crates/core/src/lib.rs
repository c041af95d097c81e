//! Spectral simulator and verification harness for the full compressible
//! Navier-Stokes equations with a potential force, written in the
//! perturbation variables `(n, v, q)` around the stationary state.
//!
//! - [`params`]: physical parameters, pressure laws, derived coefficients.
//! - [`stationary`]: stationary density profile and weighted-norm certificates.
//! - [`spectral`]: periodic grids, transforms, Sobolev norms, frequency splitting.
//! - [`semigroup`]: exact per-mode linear propagator and radial decay rates.
//! - [`nonlinear`]: nonlinear sources and the exponential time stepper.
//! - [`analysis`]: energy functionals and interpolation/commutator/convolution checkers.

pub mod analysis;
pub mod config;
pub mod error;
pub mod expm;
pub mod fieldio;
pub mod nonlinear;
pub mod params;
pub mod quadrature;
pub mod semigroup;
pub mod spectral;
pub mod stationary;

pub use error::{Error, Result};
pub use params::{derive_coefficients, DerivedCoefficients, IdealGas, PhysicalParams, PressureLaw};
pub use semigroup::{DecaySeries, ModeSymbol, RadialProfile};
pub use spectral::{FrequencyCutoff, Grid, SpectralField, Spectrum};
pub use stationary::{Potential, StationaryState};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
