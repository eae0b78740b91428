//! Rules for choosing the loss-to-prior weight `w`.

use alloc::vec::Vec;

use libm::{log, sqrt};
use rand::Rng;

use crate::engines::mcmc::{credible_interval, random_walk_mh, McmcConfig};
use crate::engines::optim::{nelder_mead, NelderMeadOptions};
use crate::engines::Target;
use crate::gibbs::{check_weight, tilt, GibbsPosterior};
use crate::loss::{DatasetLoss, Datum, PointLoss};
use crate::math::mean_sd;
use crate::param::Constraint;
use crate::prior::LogPrior;
use crate::rng::{stream, SeededRng};
use crate::{Error, Result};

/// Minimum bootstrap replications for the coverage rule.
pub const MIN_REPLICATIONS: usize = 50;

/// How `w` is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightRule {
    Fixed(f64),
    /// Match the prior's expected log-density drop from its mode to the
    /// per-datum loss at the best fit.
    UnitInformation {
        mc_draws: usize,
        seed: u64,
    },
    /// Treat `w` as unknown with density factor `w^xi`.
    Hierarchical {
        xi: f64,
    },
    /// Pick `w` from a grid so credible intervals reach nominal coverage.
    Operational(OperationalConfig),
}

impl WeightRule {
    pub fn validate(&self) -> Result<()> {
        match self {
            WeightRule::Fixed(w) => check_weight(*w),
            WeightRule::UnitInformation { mc_draws, .. } => {
                if *mc_draws < 2 {
                    return Err(Error::invalid("unit-information rule needs at least two Monte-Carlo draws"));
                }
                Ok(())
            }
            WeightRule::Hierarchical { xi } => {
                if xi.is_finite() {
                    Ok(())
                } else {
                    Err(Error::invalid("xi must be finite"))
                }
            }
            WeightRule::Operational(cfg) => cfg.validate(),
        }
    }
}

/// Result of the unit-information rule.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitInformation {
    pub weight: f64,
    /// Monte-Carlo mean of `log pi(mode) - log pi(theta)` over prior draws.
    pub numerator: f64,
    pub numerator_se: f64,
    /// `sum_i l(theta_hat, x_i) / (n - p)` with the standardized loss.
    pub denominator: f64,
    pub minimizer: Vec<f64>,
}

/// Minimizes `sum_i loss(theta, x_i)` from `start`.
pub fn loss_minimizer(loss: &PointLoss, data: &[Datum], start: &[f64]) -> Result<Vec<f64>> {
    let cumulative = DatasetLoss::separable(loss.clone(), data.to_vec())?;
    minimize_dataset_loss(&cumulative, start, None)
}

fn minimize_dataset_loss(loss: &DatasetLoss, start: &[f64], constraint: Option<Constraint>) -> Result<Vec<f64>> {
    let constraint = constraint.unwrap_or(Constraint::None);
    let objective = |t: &[f64]| {
        if !constraint.admits(t) {
            return f64::INFINITY;
        }
        loss.eval(t).unwrap_or(f64::INFINITY)
    };
    let start_value = objective(start);
    if !start_value.is_finite() {
        return Err(Error::NonFiniteStart);
    }
    // Relative tolerance keeps the search path unchanged when the loss is rescaled.
    let opts = NelderMeadOptions { tolerance: 1e-12 * start_value.abs(), max_evals: 5_000 * start.len(), ..Default::default() };
    let fit = nelder_mead(objective, start, &opts)?;
    let restart = nelder_mead(objective, &fit.point, &opts)?;
    Ok(if restart.value < fit.value { restart.point } else { fit.point })
}

/// Unit-information weight for `loss` on `data` under `prior`.
///
/// The minimizer is searched from the prior mode. Fails with
/// [`Error::PerfectFit`] when the standardized loss at the minimizer is zero.
pub fn unit_info_weight(prior: &LogPrior, loss: &PointLoss, data: &[Datum], seed: u64, mc_draws: usize) -> Result<UnitInformation> {
    let mode = prior.mode()?;
    unit_info_weight_from(prior, loss, data, seed, mc_draws, &mode)
}

/// [`unit_info_weight`] with the minimizer searched from `start`.
pub fn unit_info_weight_from(
    prior: &LogPrior,
    loss: &PointLoss,
    data: &[Datum],
    seed: u64,
    mc_draws: usize,
    start: &[f64],
) -> Result<UnitInformation> {
    WeightRule::UnitInformation { mc_draws, seed }.validate()?;
    let p = prior.dim();
    let n = data.len();
    if n <= p {
        return Err(Error::NotEnoughData { needed: p + 1, found: n });
    }
    let mode = prior.mode()?;
    let log_mode = prior.log_density(&mode)?;
    let drops: Vec<f64> =
        prior.sample_n(seed, mc_draws)?.iter().map(|t| prior.log_density(t).map(|lp| log_mode - lp)).collect::<Result<_>>()?;
    let (numerator, sd) = mean_sd(&drops);
    let numerator_se = sd / sqrt(mc_draws as f64);

    let standardized = loss.standardize()?;
    // Standardizing subtracts per-datum constants, so the raw loss has the
    // same minimizer and is cheaper to search.
    let raw = DatasetLoss::separable(loss.clone(), data.to_vec())?;
    if start.len() != p {
        return Err(Error::DimensionMismatch { expected: p, found: start.len() });
    }
    let minimizer = minimize_dataset_loss(&raw, start, Some(prior.constraint()))?;
    let total = DatasetLoss::separable(standardized, data.to_vec())?.eval(&minimizer)?;
    let denominator = total / (n - p) as f64;
    if !(denominator > 0.0) {
        return Err(Error::PerfectFit(denominator));
    }
    Ok(UnitInformation { weight: numerator / denominator, numerator, numerator_se, denominator, minimizer })
}

/// Joint belief over `(theta, w)` with density
/// `w^xi * exp{-w L(theta)} * pi(theta, w)`. `w` is the last coordinate.
#[derive(Debug, Clone)]
pub struct HierarchicalPosterior {
    loss: DatasetLoss,
    prior: LogPrior,
    xi: f64,
}

pub fn hierarchical_posterior(loss: DatasetLoss, prior: LogPrior, xi: f64) -> Result<HierarchicalPosterior> {
    WeightRule::Hierarchical { xi }.validate()?;
    if prior.dim() < 2 {
        return Err(Error::invalid("joint prior needs theta coordinates plus w"));
    }
    Ok(HierarchicalPosterior { loss, prior, xi })
}

impl HierarchicalPosterior {
    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn prior(&self) -> &LogPrior {
        &self.prior
    }

    pub fn log_unnormalized(&self, theta_w: &[f64]) -> Result<f64> {
        let log_prior = self.prior.log_density(theta_w)?;
        let (theta, w) = theta_w.split_at(theta_w.len() - 1);
        let w = w[0];
        if !(w > 0.0) || log_prior == f64::NEG_INFINITY {
            return Ok(f64::NEG_INFINITY);
        }
        let loss = self.loss.eval(theta)?;
        Ok(self.xi * log(w) + tilt(loss, w, theta)? + log_prior)
    }
}

impl Target for HierarchicalPosterior {
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

/// Settings for the coverage-matching rule.
#[derive(Debug, Clone, PartialEq)]
pub struct OperationalConfig {
    /// Intervals have credible level `1 - alpha`.
    pub alpha: f64,
    /// Candidate weights, strictly increasing.
    pub w_grid: Vec<f64>,
    pub replications: usize,
    /// Coordinate whose interval is checked.
    pub coordinate: usize,
    /// Sampler settings at `w = 1`; step scales shrink like `1/sqrt(w)`.
    pub mcmc: McmcConfig,
}

impl OperationalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid("alpha must lie in (0, 1)"));
        }
        if self.w_grid.is_empty() || self.w_grid.iter().any(|w| check_weight(*w).is_err()) {
            return Err(Error::invalid("candidate weights must be finite and positive"));
        }
        if self.w_grid.windows(2).any(|p| p[0] >= p[1]) {
            return Err(Error::invalid("candidate weights must be strictly increasing"));
        }
        if self.replications < MIN_REPLICATIONS {
            return Err(Error::NotEnoughData { needed: MIN_REPLICATIONS, found: self.replications });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperationalWeight {
    pub weight: f64,
    /// Empirical coverage per candidate, in grid order.
    pub coverage: Vec<f64>,
    /// The loss minimizer on the original data that intervals should cover.
    pub target: Vec<f64>,
    /// False when coverage rises with `w` by more than two binomial standard errors.
    pub monotone: bool,
}

/// Coverage-matching weight by the nonparametric bootstrap over `data`.
///
/// Each replication resamples rows on its own stream of `seed`, and the same
/// resampled dataset is used for every candidate weight.
pub fn operational_weight(
    loss: &PointLoss,
    prior: &LogPrior,
    data: &[Datum],
    config: &OperationalConfig,
    seed: u64,
) -> Result<OperationalWeight> {
    config.validate()?;
    let dim = prior.dim();
    config.mcmc.validate(dim)?;
    if config.coordinate >= dim {
        return Err(Error::DimensionMismatch { expected: dim, found: config.coordinate + 1 });
    }
    if data.is_empty() {
        return Err(Error::NotEnoughData { needed: 1, found: 0 });
    }
    let start = match prior.mode() {
        Ok(mode) => mode.into_values(),
        Err(_) => prior.sample(&mut stream(seed, 0))?,
    };
    let target = minimize_dataset_loss(&DatasetLoss::separable(loss.clone(), data.to_vec())?, &start, Some(prior.constraint()))?;
    let caps = step_caps(prior);
    let level = 1.0 - config.alpha;

    let mut hits = alloc::vec![0usize; config.w_grid.len()];
    for r in 0..config.replications {
        let mut rng = stream(seed, r as u64 + 1);
        let resampled: Vec<Datum> = (0..data.len()).map(|_| data[rng.random_range(0..data.len())].clone()).collect();
        let chain_seed: u64 = rng.random();
        let boot = DatasetLoss::separable(loss.clone(), resampled)?;
        for (g, &w) in config.w_grid.iter().enumerate() {
            let posterior = GibbsPosterior::new(boot.clone(), w, prior.clone())?;
            let mut mcmc = config.mcmc.clone();
            mcmc.seed = chain_seed;
            mcmc.start = Some(target.clone()).filter(|t| posterior.log_unnormalized(t).is_ok_and(f64::is_finite));
            for (k, s) in mcmc.step_scales.iter_mut().enumerate() {
                *s /= sqrt(w);
                if let Some(cap) = caps.as_ref().map(|c| c[k]) {
                    *s = s.min(cap);
                }
            }
            let covered = random_walk_mh(&posterior, &mcmc)
                .and_then(|chain| credible_interval(&chain, config.coordinate, level))
                .map(|(lo, hi)| lo <= target[config.coordinate] && target[config.coordinate] <= hi)
                .map_err(|e| Error::Replication { index: r, source: alloc::boxed::Box::new(e) })?;
            hits[g] += usize::from(covered);
        }
    }

    let reps = config.replications as f64;
    let coverage: Vec<f64> = hits.iter().map(|&h| h as f64 / reps).collect();
    let mut best = 0;
    for (g, c) in coverage.iter().enumerate() {
        if (c - level).abs() < (coverage[best] - level).abs() {
            best = g;
        }
    }
    let monotone = coverage.windows(2).all(|p| {
        let se = sqrt((p[0] * (1.0 - p[0])).max(0.25 / reps) / reps);
        p[1] <= p[0] + 2.0 * se
    });
    Ok(OperationalWeight { weight: config.w_grid[best], coverage, target, monotone })
}

/// Largest sensible random-walk step per coordinate: a few prior standard
/// deviations, when the prior has them.
fn step_caps(prior: &LogPrior) -> Option<Vec<f64>> {
    match prior {
        LogPrior::IndependentNormal { variances, .. } | LogPrior::OrderedNormal { variances, .. } => {
            Some(variances.iter().map(|v| 2.4 * sqrt(*v)).collect())
        }
        LogPrior::Uniform { lower, upper } => Some(lower.iter().zip(upper).map(|(l, u)| u - l).collect()),
        LogPrior::Product(blocks) => {
            let mut caps = Vec::with_capacity(prior.dim());
            for block in blocks {
                caps.extend(step_caps(block)?);
            }
            Some(caps)
        }
        _ => None,
    }
}
