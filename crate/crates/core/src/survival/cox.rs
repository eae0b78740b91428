use alloc::sync::Arc;
use alloc::vec::Vec;

use libm::{exp, log};

use super::data::{RiskIndex, SurvivalDataset};
use crate::loss::SampleLoss;
use crate::{Error, Result};

/// Negative log partial likelihood
/// `-sum_{i: event} [x_i . beta - log sum_{l in R_i} exp(x_l . beta)]`,
/// optionally restricted to a subset of covariate columns.
///
/// Ties use full risk sets with no correction (Breslow).
#[derive(Debug, Clone)]
pub struct CoxLoss {
    data: Arc<SurvivalDataset>,
    index: Arc<RiskIndex>,
    columns: Vec<usize>,
}

impl CoxLoss {
    /// Loss over every column of `data`.
    pub fn new(data: Arc<SurvivalDataset>) -> Self {
        let index = Arc::new(RiskIndex::build(&data));
        let columns = (0..data.p()).collect();
        Self { data, index, columns }
    }

    /// Same data and risk index, coefficients only for `columns` (in that
    /// order). An empty list gives the null-model loss.
    pub fn restricted(&self, columns: &[usize]) -> Result<Self> {
        if let Some(&bad) = columns.iter().find(|&&j| j >= self.data.p()) {
            return Err(Error::DimensionMismatch { expected: self.data.p(), found: bad + 1 });
        }
        Ok(Self { data: Arc::clone(&self.data), index: Arc::clone(&self.index), columns: columns.to_vec() })
    }

    pub fn data(&self) -> &SurvivalDataset {
        &self.data
    }

    pub fn index(&self) -> &RiskIndex {
        &self.index
    }

    pub fn columns(&self) -> &[usize] {
        &self.columns
    }

    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    /// `x_i . beta` for every subject.
    pub fn linear_predictor(&self, beta: &[f64]) -> Result<Vec<f64>> {
        if beta.len() != self.columns.len() {
            return Err(Error::DimensionMismatch { expected: self.columns.len(), found: beta.len() });
        }
        let eta: Vec<f64> =
            (0..self.data.n()).map(|i| self.columns.iter().zip(beta).map(|(&j, b)| self.data.value(i, j) * b).sum()).collect();
        if eta.iter().any(|e: &f64| !e.is_finite()) {
            return Err(Error::NonFiniteLoss { theta: beta.to_vec() });
        }
        Ok(eta)
    }

    pub fn eval(&self, beta: &[f64]) -> Result<f64> {
        let eta = self.linear_predictor(beta)?;
        let order = self.index.order();
        // Running log-sum-exp over the decreasing-time prefix, as (max, scaled sum).
        let (mut max, mut sum) = (f64::NEG_INFINITY, 0.0);
        let mut added = 0;
        let mut total = 0.0;
        for &(subject, prefix) in self.index.events() {
            while added < prefix {
                let x = eta[order[added]];
                if x > max {
                    sum = sum * exp(max - x) + 1.0;
                    max = x;
                } else {
                    sum += exp(x - max);
                }
                added += 1;
            }
            total += max + log(sum) - eta[subject];
        }
        Ok(total)
    }
}

impl SampleLoss for CoxLoss {
    fn eval(&self, theta: &[f64]) -> Result<f64> {
        CoxLoss::eval(self, theta)
    }

    fn n_obs(&self) -> usize {
        self.data.n()
    }
}
