//! Loss-based Bayesian updating.
//!
//! A belief about a parameter of interest is updated with a loss function in
//! place of a log-likelihood: the updated density is proportional to
//! `exp{-w * L(theta; x)} * pi(theta)`. This crate holds the losses, priors,
//! the update itself, rules for choosing the weight `w`, the numerical engines
//! used to sample and integrate the result, and two end-to-end pipelines: Cox
//! proportional-hazards marker association and joint quartile estimation.
//!
//! The crate is `no_std` (it needs `alloc`). Everything is deterministic given
//! a seed; file formats and the command line live in the `genbayes` crate.
#![no_std]
#![warn(missing_debug_implementations)]
// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod calibration;
pub mod engines;
mod error;
pub mod gibbs;
pub mod loss;
pub mod math;
pub mod misspec;
pub mod param;
pub mod prior;
pub mod quantiles;
pub mod rng;
pub mod survival;

pub use error::{Error, Result};
pub use gibbs::{DiscreteBelief, GibbsPosterior};
pub use loss::{DatasetLoss, Datum, PointLoss};
pub use param::{Constraint, ParamPoint};
pub use prior::LogPrior;
