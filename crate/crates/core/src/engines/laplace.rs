use alloc::vec::Vec;

use libm::log;
use nalgebra::{DMatrix, SymmetricEigen};

use super::hessian::hessian_fd;
use super::optim::{nelder_mead, NelderMeadOptions};
use super::Target;
use crate::math::LN_2PI;
use crate::{Error, Result};

/// Gaussian approximation of a target around its mode.
#[derive(Debug, Clone)]
pub struct LaplaceFit {
    /// `(p/2) ln(2 pi) - (1/2) ln det H + log_density(mode)`.
    pub log_evidence: f64,
    pub mode: Vec<f64>,
    /// Hessian of the negative log density at the mode.
    pub hessian: DMatrix<f64>,
    /// `H^-1`.
    pub covariance: DMatrix<f64>,
    pub log_density_at_mode: f64,
}

/// Finds the mode from `mode_hint` and integrates the Gaussian approximation.
pub fn laplace_log_evidence<T: Target>(target: &T, mode_hint: &[f64]) -> Result<LaplaceFit> {
    let neg = |t: &[f64]| match target.log_density(t) {
        Ok(v) => -v,
        Err(_) => f64::INFINITY,
    };
    let start_value = neg(mode_hint);
    if !start_value.is_finite() {
        return Err(Error::NonFiniteStart);
    }
    let tolerance = 1e-13 * start_value.abs().max(1.0);
    let opts = NelderMeadOptions { tolerance, max_evals: 20_000 * mode_hint.len().max(1), ..Default::default() };
    let mut fit = nelder_mead(neg, mode_hint, &opts)?;
    // Restart from the reported optimum; a collapsed simplex can stall early.
    let steps: Vec<f64> = fit.point.iter().map(|x| 1e-3 * x.abs().max(1.0)).collect();
    let polish = nelder_mead(neg, &fit.point, &NelderMeadOptions { initial_steps: Some(steps), ..opts })?;
    if polish.value <= fit.value {
        fit = polish;
    }
    let mode = fit.point;
    let log_density_at_mode = target.log_density(&mode)?;
    let hessian = hessian_fd(neg, &mode, None)?;
    let chol = match hessian.clone().cholesky() {
        Some(c) => c,
        None => {
            let eigenvalues = SymmetricEigen::new(hessian).eigenvalues.iter().copied().collect();
            return Err(Error::NotPositiveDefinite { eigenvalues });
        }
    };
    let log_det: f64 = 2.0 * chol.l().diagonal().iter().map(|d| log(*d)).sum::<f64>();
    let p = mode.len() as f64;
    let log_evidence = 0.5 * p * LN_2PI - 0.5 * log_det + log_density_at_mode;
    let covariance = chol.inverse();
    Ok(LaplaceFit { log_evidence, mode, hessian, covariance, log_density_at_mode })
}
