//! Transition densities of Lévy processes with iterated-logarithm symbols.
//!
//! The crate evaluates the symbols, inverts their characteristic functions
//! with a period-pairing oscillatory integrator, and checks two-sided density
//! envelopes and the growth assumptions behind them.

// NaN must fail every range check, so `!(x > 0.0)` is deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod checker;
pub mod density;
pub mod error;
pub mod iterlog;
pub mod oscint;
pub mod quad;
pub mod symbol;

pub use bounds::{
    lower_envelope, sandwich_fit, upper_envelope, weighted_integral_check, EnvelopeParams, WeightedIntegralCase,
};
pub use checker::{
    check_lower_assumptions, check_upper_assumptions, derivative_selftest, AssumptionReport, Grid, UpperFit,
};
pub use density::{
    density, density_grid, normalization, window_mass, DensityConfig, DensityQuery, DensityResult, Method,
};
pub use error::{Error, Result};
pub use iterlog::IterLogParams;
pub use oscint::{cos_transform, sin_transform, tail_bound, OscIntegrand, OscResult, PairingConfig};
pub use symbol::{chain_jet, LevySymbol, SymbolJet, SymbolKind};
