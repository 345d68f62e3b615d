//! Bayesian survival analysis on top of a built-in adaptive MCMC sampler.
//!
//! The crate covers seven model families (Weibull AFT, piecewise-constant PH,
//! mixture cure, competing risks, semi-Markov illness-death, shared frailty and
//! shared-parameter joint longitudinal-survival models), the sampler that fits
//! them, convergence diagnostics, and the derived posterior quantities usually
//! reported for each family (relative medians, hazard ratios, cure fractions,
//! cumulative incidence and transition probabilities).
//!
//! Likelihoods, priors, quadrature and derived quantities are generic over the
//! scalar type ([`Real`]), so the same code runs in `f32`, `f64` and in the
//! forward-mode [`Dual`] type used for exact gradients. The sampler, the
//! diagnostics and all I/O work in `f64`; aliases for the common `f64`
//! instantiations live at the crate root.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod diagnostics;
pub mod dual;
pub mod error;
pub mod io;
pub mod likelihood;
pub mod mcmc;
pub mod model;
pub mod posterior;
pub mod quadrature;
pub mod scalar;
pub mod sim;
pub mod survival;

pub use diagnostics::{gelman_rubin_psrf, merge_chains, summarize, SummaryRow, SummaryTable};
pub use dual::Dual;
pub use error::{Error, Result};
pub use mcmc::{run_chains, ChainConfig, PosteriorSamples};
pub use model::{Family, FamilyModel, Model, ModelSpec};
pub use scalar::Real;
pub use survival::{CensoredObservation, Censoring, DatasetExtras, DesignMatrix, SurvivalDataset, TimePartition};

/// Weibull AFT parameters in double precision.
pub type AftParams64 = likelihood::AftParams<f64>;
/// Piecewise-constant PH parameters in double precision.
pub type PhParams64 = likelihood::PhParams<f64>;
/// Mixture cure parameters in double precision.
pub type CureParams64 = likelihood::CureParams<f64>;
/// Competing-risks parameters in double precision.
pub type CompetingRisksParams64 = likelihood::CompetingRisksParams<f64>;
/// Illness-death parameters in double precision.
pub type IllnessDeathParams64 = likelihood::IllnessDeathParams<f64>;
/// Frailty parameters in double precision.
pub type FrailtyParams64 = likelihood::FrailtyParams<f64>;
/// Joint model parameters in double precision.
pub type JointParams64 = likelihood::JointParams<f64>;
/// Curve grid of posterior means in double precision.
pub type CurveGrid64 = posterior::CurveGrid<f64>;
/// Gauss-Legendre rule in double precision.
pub type GlRule64 = quadrature::GlRule<f64>;
