use alloc::vec::Vec;

use libm::{exp, log, sqrt};
use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use super::Target;
use crate::math::{log_sum_exp, LN_2PI};
use crate::rng::seeded;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImportanceEstimate {
    pub log_evidence: f64,
    /// Delta-method standard error of `log_evidence`.
    pub std_error: f64,
    /// Kish effective sample size of the weights.
    pub effective_sample_size: f64,
}

/// Estimates `ln integral exp(log_density)` with a Gaussian proposal
/// `N(mean, cov)` and `draws` i.i.d. draws from the stream seeded by `seed`.
pub fn importance_sample_evidence<T: Target>(
    target: &T,
    mean: &[f64],
    cov: &DMatrix<f64>,
    draws: usize,
    seed: u64,
) -> Result<ImportanceEstimate> {
    let p = mean.len();
    if cov.nrows() != p || cov.ncols() != p {
        return Err(Error::DimensionMismatch { expected: p, found: cov.nrows() });
    }
    if draws < 2 {
        return Err(Error::invalid("importance sampling needs at least two draws"));
    }
    let chol = cov.clone().cholesky().ok_or_else(|| Error::NotPositiveDefinite {
        eigenvalues: nalgebra::SymmetricEigen::new(cov.clone()).eigenvalues.iter().copied().collect(),
    })?;
    let l = chol.l();
    let log_det: f64 = 2.0 * l.diagonal().iter().map(|d| log(*d)).sum::<f64>();
    let log_norm = -0.5 * (p as f64 * LN_2PI + log_det);

    let mut rng = seeded(seed);
    let mut log_weights = Vec::with_capacity(draws);
    let mut theta = vec_zeros(p);
    for i in 0..draws {
        let z = DVector::from_fn(p, |_, _| StandardNormal.sample(&mut rng));
        let x = &l * &z;
        for k in 0..p {
            theta[k] = mean[k] + x[k];
        }
        let log_q = log_norm - 0.5 * z.dot(&z);
        let lw = target.log_density(&theta)? - log_q;
        if lw.is_nan() || lw == f64::INFINITY {
            return Err(Error::NonFiniteWeight { draw: i });
        }
        log_weights.push(lw);
    }
    let n = draws as f64;
    let lse = log_sum_exp(&log_weights);
    if lse == f64::NEG_INFINITY {
        return Err(Error::ProposalMissed);
    }
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scaled: Vec<f64> = log_weights.iter().map(|lw| exp(lw - max)).collect();
    let mean_w = scaled.iter().sum::<f64>() / n;
    let var_w = scaled.iter().map(|w| (w - mean_w) * (w - mean_w)).sum::<f64>() / (n - 1.0);
    let sum_sq: f64 = scaled.iter().map(|w| w * w).sum();
    Ok(ImportanceEstimate {
        log_evidence: lse - log(n),
        std_error: sqrt(var_w / n) / mean_w,
        effective_sample_size: (mean_w * n) * (mean_w * n) / sum_sq,
    })
}

fn vec_zeros(p: usize) -> Vec<f64> {
    alloc::vec![0.0; p]
}
