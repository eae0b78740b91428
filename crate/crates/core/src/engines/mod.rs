//! Numerical machinery: optimization, finite-difference Hessians, evidence
//! estimators and random-walk Metropolis-Hastings.

pub mod hessian;
pub mod importance;
pub mod laplace;
pub mod mcmc;
pub mod optim;
pub mod quadrature;

use alloc::vec::Vec;

use crate::param::Constraint;
use crate::rng::SeededRng;
use crate::Result;

pub use hessian::hessian_fd;
pub use importance::{importance_sample_evidence, ImportanceEstimate};
pub use laplace::{laplace_log_evidence, LaplaceFit};
pub use mcmc::{credible_interval, random_walk_mh, Chain, McmcConfig};
pub use optim::{nelder_mead, NelderMeadFit, NelderMeadOptions, Termination};
pub use quadrature::{integrate_adaptive, quadrature_1d};

/// An unnormalized log density the engines can optimize, integrate and sample.
pub trait Target {
    fn dim(&self) -> usize;

    /// Unnormalized log density; `-inf` off the support.
    fn log_density(&self, theta: &[f64]) -> Result<f64>;

    fn constraint(&self) -> Constraint {
        Constraint::None
    }

    /// A random candidate start point, typically a prior draw.
    fn start_candidate(&self, _rng: &mut SeededRng) -> Option<Result<Vec<f64>>> {
        None
    }
}

impl<T: Target + ?Sized> Target for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn log_density(&self, theta: &[f64]) -> Result<f64> {
        (**self).log_density(theta)
    }

    fn constraint(&self) -> Constraint {
        (**self).constraint()
    }

    fn start_candidate(&self, rng: &mut SeededRng) -> Option<Result<Vec<f64>>> {
        (**self).start_candidate(rng)
    }
}

/// Wraps a closure as a [`Target`] of fixed dimension.
pub struct FnTarget<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> f64> FnTarget<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> core::fmt::Debug for FnTarget<F> {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("FnTarget").field("dim", &self.dim).finish_non_exhaustive()
    }
}

impl<F: Fn(&[f64]) -> f64> Target for FnTarget<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn log_density(&self, theta: &[f64]) -> Result<f64> {
        Ok((self.f)(theta))
    }
}
