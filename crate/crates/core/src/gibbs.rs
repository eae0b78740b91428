//! The loss-based belief update and the decision layer on top of it.

use alloc::vec::Vec;

use libm::exp;

use crate::engines::Target;
use crate::loss::DatasetLoss;
use crate::math::log_sum_exp;
use crate::param::{Constraint, ParamPoint};
use crate::prior::LogPrior;
use crate::rng::SeededRng;
use crate::{Error, Result};

/// Unnormalized updated belief `exp{-w L(theta)} pi(theta)`.
#[derive(Debug, Clone)]
pub struct GibbsPosterior {
    loss: DatasetLoss,
    weight: f64,
    prior: LogPrior,
}

pub(crate) fn check_weight(w: f64) -> Result<()> {
    if w > 0.0 && w.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("loss weight w must be finite and positive"))
    }
}

/// `-w * loss`, with an infinite loss meaning zero density. NaN and `-inf`
/// losses are errors.
pub(crate) fn tilt(loss: f64, w: f64, theta: &[f64]) -> Result<f64> {
    if loss.is_nan() || loss == f64::NEG_INFINITY {
        return Err(Error::NonFiniteLoss { theta: theta.to_vec() });
    }
    if loss == f64::INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(-w * loss)
}

impl GibbsPosterior {
    pub fn new(loss: DatasetLoss, weight: f64, prior: LogPrior) -> Result<Self> {
        check_weight(weight)?;
        Ok(Self { loss, weight, prior })
    }

    pub fn loss(&self) -> &DatasetLoss {
        &self.loss
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn prior(&self) -> &LogPrior {
        &self.prior
    }

    /// Same loss and prior under a different weight.
    pub fn with_weight(&self, weight: f64) -> Result<Self> {
        Self::new(self.loss.clone(), weight, self.prior.clone())
    }

    /// `-w L(theta) + log pi(theta)`; `-inf` wherever the prior vanishes,
    /// without evaluating the loss there.
    pub fn log_unnormalized(&self, theta: &[f64]) -> Result<f64> {
        let log_prior = self.prior.log_density(theta)?;
        if log_prior == f64::NEG_INFINITY {
            return Ok(f64::NEG_INFINITY);
        }
        let loss = self.loss.eval(theta)?;
        Ok(tilt(loss, self.weight, theta)? + log_prior)
    }
}

impl Target for GibbsPosterior {
    fn dim(&self) -> usize {
        self.prior.dim()
    }

    fn log_density(&self, theta: &[f64]) -> Result<f64> {
        self.log_unnormalized(theta)
    }

    fn constraint(&self) -> Constraint {
        self.prior.constraint()
    }

    fn start_candidate(&self, rng: &mut SeededRng) -> Option<Result<Vec<f64>>> {
        Some(self.prior.sample(rng))
    }
}

/// A belief on finitely many points, held as normalized log weights.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteBelief {
    support: Vec<ParamPoint>,
    log_weights: Vec<f64>,
}

impl DiscreteBelief {
    /// From probabilities that sum to one within `1e-12`.
    pub fn new(support: Vec<ParamPoint>, weights: &[f64]) -> Result<Self> {
        if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::invalid("belief weights must be finite and non-negative"));
        }
        if (weights.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("belief weights must sum to one"));
        }
        Self::from_log_weights(support, weights.iter().map(|w| libm::log(*w)).collect())
    }

    /// From unnormalized log weights.
    pub fn from_log_weights(support: Vec<ParamPoint>, log_weights: Vec<f64>) -> Result<Self> {
        if support.is_empty() || support.len() != log_weights.len() {
            return Err(Error::invalid("belief needs one weight per support point"));
        }
        let dim = support[0].dim();
        if support.iter().any(|s| s.dim() != dim) {
            return Err(Error::invalid("support points must share a dimension"));
        }
        if log_weights.iter().any(|w| w.is_nan() || *w == f64::INFINITY) {
            return Err(Error::invalid("log weights must be below +inf"));
        }
        let total = log_sum_exp(&log_weights);
        if total == f64::NEG_INFINITY {
            return Err(Error::PosteriorUndefined);
        }
        let log_weights = log_weights.into_iter().map(|w| w - total).collect();
        Ok(Self { support, log_weights })
    }

    /// Restriction of a continuous prior to `grid`, weights proportional to
    /// the prior density at each point.
    pub fn discretize(prior: &LogPrior, grid: Vec<ParamPoint>) -> Result<Self> {
        let log_weights = grid.iter().map(|t| prior.log_density(t)).collect::<Result<Vec<_>>>()?;
        Self::from_log_weights(grid, log_weights)
    }

    /// The belief a grid prior already describes.
    pub fn from_prior(prior: &LogPrior) -> Result<Self> {
        match prior {
            LogPrior::DiscreteGrid { support, weights } => Self::new(support.clone(), weights),
            _ => Err(Error::Unsupported("only grid priors are already discrete")),
        }
    }

    pub fn support(&self) -> &[ParamPoint] {
        &self.support
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|w| exp(*w)).collect()
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    /// Index of the heaviest point; lowest index on ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (k, w) in self.log_weights.iter().enumerate() {
            if *w > self.log_weights[best] {
                best = k;
            }
        }
        best
    }

    /// Mass of points satisfying `inside`.
    pub fn mass_where(&self, inside: impl Fn(&ParamPoint) -> bool) -> f64 {
        let logs: Vec<f64> = self.support.iter().zip(&self.log_weights).filter(|(t, _)| inside(t)).map(|(_, w)| *w).collect();
        exp(log_sum_exp(&logs)).min(1.0)
    }

    /// Updates with cumulative loss `loss` at weight `w`. Points with zero
    /// mass keep zero mass and their loss is not evaluated.
    pub fn update(&self, loss: &DatasetLoss, w: f64) -> Result<Self> {
        check_weight(w)?;
        let mut log_weights = Vec::with_capacity(self.len());
        for (theta, lw) in self.support.iter().zip(&self.log_weights) {
            if *lw == f64::NEG_INFINITY {
                log_weights.push(f64::NEG_INFINITY);
                continue;
            }
            log_weights.push(lw + tilt(loss.eval(theta)?, w, theta)?);
        }
        Self::from_log_weights(self.support.clone(), log_weights)
    }
}

/// Free-function form of [`DiscreteBelief::update`].
pub fn update_discrete(belief: &DiscreteBelief, loss: &DatasetLoss, w: f64) -> Result<DiscreteBelief> {
    belief.update(loss, w)
}

/// Updates batch by batch, then once on the summed loss, returning
/// `(sequential, batch)`.
pub fn sequential_vs_batch(belief: &DiscreteBelief, batches: &[DatasetLoss], w: f64) -> Result<(DiscreteBelief, DiscreteBelief)> {
    if batches.is_empty() {
        return Err(Error::invalid("need at least one batch"));
    }
    let mut sequential = belief.clone();
    for batch in batches {
        sequential = sequential.update(batch, w)?;
    }
    let batch = belief.update(&DatasetLoss::Sum(batches.to_vec()), w)?;
    Ok((sequential, batch))
}

/// Action maximizing the sample-average utility, as `(index, expected
/// utility)`. Ties go to the lowest index.
pub fn expected_utility_action<A, U>(samples: &[ParamPoint], utility: U, actions: &[A]) -> Result<(usize, f64)>
where
    U: Fn(&A, &[f64]) -> f64,
{
    if samples.is_empty() || actions.is_empty() {
        return Err(Error::invalid("need at least one sample and one action"));
    }
    let mut best: Option<(usize, f64)> = None;
    for (a, action) in actions.iter().enumerate() {
        let mut total = 0.0;
        for (s, theta) in samples.iter().enumerate() {
            let u = utility(action, theta);
            if !u.is_finite() {
                return Err(Error::NonFiniteUtility { action: a, sample: s });
            }
            total += u;
        }
        let mean = total / samples.len() as f64;
        if best.is_none_or(|(_, v)| mean > v) {
            best = Some((a, mean));
        }
    }
    Ok(best.expect("actions is non-empty"))
}
