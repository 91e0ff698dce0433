//! Kernel plug-in estimation of `α`-divergences between an unknown density
//! `f`, observed through a sample, and a known density `g`.
//!
//! The crate covers the kernel family ([`kernel`]), the estimator `f̂` and its
//! expectation `E f̂` ([`kde`]), closed-form and quadrature ground truth
//! ([`distributions`]), the thresholded plug-in functionals ([`divergence`]),
//! bandwidth sweeps with error decomposition ([`sweep`]) and the finite-sample
//! confidence intervals ([`confidence`]).

#![allow(clippy::excessive_precision, clippy::neg_cmp_op_on_partial_ord)]

pub mod confidence;
pub mod distributions;
pub mod divergence;
pub mod error;
pub mod kde;
pub mod kernel;
pub mod quadrature;
pub mod rng;
pub mod sweep;

pub use distributions::{true_divergences, AnalyticDensity, DensitySpec, TrueDivergences};
pub use divergence::{AlphaParam, DivergenceEstimate, ThresholdSchedule};
pub use error::{Error, Result};
pub use kde::{DensityEvaluator, EvaluationGrid, Kde, SampleMatrix};
pub use kernel::{KernelFamily, KernelSpec};
pub use sweep::{BandwidthRange, SweepPlan, SweepResult};
