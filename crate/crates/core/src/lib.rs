//! Estimation and inference for the proportional likelihood ratio model
//! `p(y | x) ∝ exp(βᵀx y) g(y)`.
//!
//! * [`model`]: observation sets, baselines, densities and likelihoods.
//! * [`profile`]: the profile maximiser `p̂(β)` of the baseline jumps.
//! * [`score`]: the empirical estimating function `m_{n,a}`.
//! * [`zest`]: Z-estimation, inverse-probability weights and bootstrap.
//! * [`baselines`]: profile MLE and pairwise pseudo-likelihood comparators.
//! * [`projection`]: exact tangent-space projections on finite models.
//! * [`sim`]: simulation settings, the study runner and output files.
//! * [`config`], [`io`]: key=value configuration and CSV ingestion.

pub mod baselines;
pub mod config;
pub mod error;
pub mod exec;
pub mod io;
pub mod linalg;
pub mod model;
pub mod profile;
pub mod projection;
pub mod score;
pub mod sim;
pub mod stats;
mod tilt;
pub mod zest;

pub use error::{PlrError, Result};
pub use exec::Execution;
pub use model::{BaselineDist, Beta, IndexFunction, ObservationSet};
pub use profile::FixedPointConfig;
pub use zest::{Estimate, SolverConfig};
