//! Nonparametric regression under adversarial input perturbations.
//!
//! The library evaluates adversarial sup-norm losses on finite lattices,
//! computes the ideal adversarial loss and predictor, robustifies base
//! estimators with the plug-in midpoint transform, and runs Monte Carlo
//! rate experiments. Numeric code is generic over [`Scalar`] (`f32`/`f64`);
//! the aliases below fix the common `f64` instantiation.

// `!(x > 0)` style checks are how NaN parameters get rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adversarial;
pub mod cli;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod functions;
pub mod grid;
pub mod perturbation;
mod scalar;
pub mod selftest;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type GridDomainF64 = grid::GridDomain<f64>;
pub type PerturbationSetF64 = perturbation::PerturbationSet<f64>;
pub type PerturbationSampleF64 = perturbation::PerturbationSample<f64>;
pub type RegressionFunctionF64 = functions::RegressionFunction<f64>;
pub type SmoothnessSpecF64 = functions::SmoothnessSpec<f64>;
pub type DatasetF64 = functions::Dataset<f64>;
pub type FittedPredictorF64 = estimators::FittedPredictor<f64>;
pub type LossReportF64 = adversarial::LossReport<f64>;
pub type AttackLatticeF64 = adversarial::AttackLattice<f64>;
