use alloc::vec::Vec;

use libm::sqrt;
use nalgebra::DMatrix;

use super::cox::CoxLoss;
use crate::engines::importance::importance_sample_evidence;
use crate::engines::laplace::{laplace_log_evidence, LaplaceFit};
use crate::engines::optim::{nelder_mead, NelderMeadOptions};
use crate::engines::quadrature::quadrature_1d;
use crate::engines::Target;
use crate::math::normal_log_pdf;
use crate::{Error, Result};

/// Standard deviations either side of the mode covered by quadrature.
const QUADRATURE_HALF_WIDTH: f64 = 10.0;
const QUADRATURE_TOLERANCE: f64 = 1e-8;
/// Importance proposals use the Laplace covariance inflated by this factor
/// per standard deviation, which keeps weights bounded in the tails.
const PROPOSAL_INFLATION: f64 = 1.2;

/// How the evidence integral is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BfMethod {
    Laplace,
    Quadrature,
    Importance { draws: usize, seed: u64 },
}

impl BfMethod {
    pub fn name(&self) -> &'static str {
        match self {
            BfMethod::Laplace => "laplace",
            BfMethod::Quadrature => "quadrature",
            BfMethod::Importance { .. } => "importance",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BfFlag {
    Ok,
    /// Marker column is constant, so the Bayes factor is exactly one.
    ConstantMarker,
    /// Laplace was requested but the Hessian was not positive definite;
    /// quadrature was used instead.
    LaplaceFallback,
}

impl BfFlag {
    pub fn name(&self) -> &'static str {
        match self {
            BfFlag::Ok => "ok",
            BfFlag::ConstantMarker => "degenerate",
            BfFlag::LaplaceFallback => "laplace-fallback",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarkerBf {
    pub log_bf: f64,
    /// Monte-Carlo standard error of `log_bf` (importance sampling only).
    pub std_error: Option<f64>,
    /// Method actually used.
    pub method: BfMethod,
    pub flag: BfFlag,
}

/// `-(l(beta) - l(0)) + log N(beta; 0, v)`: its integral over `beta` is the
/// Bayes factor of inclusion against exclusion.
#[derive(Debug)]
struct MarkerTarget {
    loss: CoxLoss,
    null_loss: f64,
    slab_variance: f64,
}

impl Target for MarkerTarget {
    fn dim(&self) -> usize {
        1
    }

    fn log_density(&self, beta: &[f64]) -> Result<f64> {
        let loss = self.loss.eval(beta)?;
        Ok(self.null_loss - loss + normal_log_pdf(beta[0], 0.0, self.slab_variance))
    }
}

/// Log general Bayes factor for marker `j` with slab `N(0, v)`.
///
/// A constant column short-circuits to zero. A Laplace request with a
/// non-positive-definite Hessian falls back to quadrature and says so in the
/// flag.
pub fn single_marker_bf(loss: &CoxLoss, marker: usize, slab_variance: f64, method: BfMethod) -> Result<MarkerBf> {
    if !(slab_variance > 0.0 && slab_variance.is_finite()) {
        return Err(Error::invalid("slab variance must be finite and positive"));
    }
    if let BfMethod::Importance { draws, .. } = method {
        if draws < 2 {
            return Err(Error::invalid("importance sampling needs at least two draws"));
        }
    }
    let single = loss.restricted(&[marker])?;
    if single.data().is_constant_column(marker) {
        return Ok(MarkerBf { log_bf: 0.0, std_error: None, method, flag: BfFlag::ConstantMarker });
    }
    let null_loss = single.eval(&[0.0])?;
    let target = MarkerTarget { loss: single, null_loss, slab_variance };

    let laplace = laplace_log_evidence(&target, &[0.0]);
    match (method, laplace) {
        (BfMethod::Laplace, Ok(fit)) => Ok(MarkerBf { log_bf: fit.log_evidence, std_error: None, method, flag: BfFlag::Ok }),
        (BfMethod::Laplace, Err(Error::NotPositiveDefinite { .. })) => {
            let log_bf = quadrature(&target, None)?;
            Ok(MarkerBf { log_bf, std_error: None, method: BfMethod::Quadrature, flag: BfFlag::LaplaceFallback })
        }
        (BfMethod::Quadrature, fit) => {
            let log_bf = quadrature(&target, fit.ok().as_ref())?;
            Ok(MarkerBf { log_bf, std_error: None, method, flag: BfFlag::Ok })
        }
        (BfMethod::Importance { draws, seed }, Ok(fit)) => {
            let cov = &fit.covariance * (PROPOSAL_INFLATION * PROPOSAL_INFLATION);
            let est = importance_sample_evidence(&target, &fit.mode, &cov, draws, seed)?;
            Ok(MarkerBf { log_bf: est.log_evidence, std_error: Some(est.std_error), method, flag: BfFlag::Ok })
        }
        (BfMethod::Importance { draws, seed }, Err(Error::NotPositiveDefinite { .. })) => {
            // Fall back to a proposal centred on the mode with the prior spread.
            let mode = find_mode(&target)?;
            let cov = DMatrix::from_element(1, 1, slab_variance);
            let est = importance_sample_evidence(&target, &mode, &cov, draws, seed)?;
            Ok(MarkerBf { log_bf: est.log_evidence, std_error: Some(est.std_error), method, flag: BfFlag::LaplaceFallback })
        }
        (_, Err(e)) => Err(e),
    }
}

fn find_mode(target: &MarkerTarget) -> Result<Vec<f64>> {
    let neg = |b: &[f64]| target.log_density(b).map_or(f64::INFINITY, |v| -v);
    let opts = NelderMeadOptions { tolerance: 1e-12, ..Default::default() };
    Ok(nelder_mead(neg, &[0.0], &opts)?.point)
}

fn quadrature(target: &MarkerTarget, fit: Option<&LaplaceFit>) -> Result<f64> {
    let (mode, sd) = match fit {
        Some(f) => (f.mode[0], sqrt(f.covariance[(0, 0)])),
        None => (find_mode(target)?[0], sqrt(target.slab_variance)),
    };
    let half = QUADRATURE_HALF_WIDTH * sd;
    let mut failure = None;
    let value = quadrature_1d(
        |b| match target.log_density(&[b]) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        },
        mode - half,
        mode + half,
        64,
        QUADRATURE_TOLERANCE,
    );
    match failure {
        Some(e) => Err(e),
        None => value,
    }
}
