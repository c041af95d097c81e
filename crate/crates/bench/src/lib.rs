//! Shared fixtures for the criterion benchmarks.

use cns_core::params::{derive_coefficients, IdealGas, PhysicalParams};
use cns_core::DerivedCoefficients;

/// Coefficients of the reference ideal gas (`R = 1`, default parameters).
pub fn reference_coefficients() -> DerivedCoefficients {
    derive_coefficients(&PhysicalParams::default(), &IdealGas::new(1.0)).expect("reference parameters are valid")
}
