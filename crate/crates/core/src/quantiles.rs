//! Joint quartile estimation with a check-loss posterior, and the boxplot
//! summary built from it.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use libm::sqrt;

use crate::calibration::{unit_info_weight_from, UnitInformation, WeightRule};
use crate::engines::mcmc::{credible_interval, random_walk_mh, Chain, McmcConfig};
use crate::gibbs::GibbsPosterior;
use crate::loss::{DatasetLoss, Datum, PointLoss, SampleLoss};
use crate::math::{mean_sd, quantile_sorted};
use crate::param::{Constraint, ParamPoint};
use crate::prior::LogPrior;
use crate::rng::derive_seed;
use crate::{Error, Result};

/// Sum of weighted check losses over a sorted sample, evaluated in
/// `O(log n)` per term from prefix sums.
///
/// Each term `(k, tau, scale)` adds `scale * sum_i check_tau(x_i - theta_k)`.
#[derive(Debug, Clone)]
pub struct SortedCheckLoss {
    sorted: Vec<f64>,
    /// `prefix[k]` is the sum of the `k` smallest values.
    prefix: Vec<f64>,
    terms: Vec<(usize, f64, f64)>,
    dim: usize,
}

impl SortedCheckLoss {
    pub fn new(values: &[f64], terms: Vec<(usize, f64, f64)>) -> Result<Self> {
        if values.is_empty() || values.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("need at least one finite value"));
        }
        if terms.iter().any(|(_, tau, scale)| !(*tau > 0.0 && *tau < 1.0) || !(*scale >= 0.0)) {
            return Err(Error::invalid("check-loss terms need tau in (0, 1) and a non-negative scale"));
        }
        let dim = terms.iter().map(|t| t.0 + 1).max().unwrap_or(0);
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mut prefix = Vec::with_capacity(sorted.len() + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        for x in &sorted {
            acc += x;
            prefix.push(acc);
        }
        Ok(Self { sorted, prefix, terms, dim })
    }

    /// The quartile-triple loss summed over `values`.
    pub fn quartile_triple(values: &[f64]) -> Result<Self> {
        Self::new(values, vec![(0, 0.25, 1.0), (1, 0.5, 1.0), (2, 0.75, 1.0)])
    }

    /// `sum_i |x_i - theta|`.
    pub fn absolute(values: &[f64]) -> Result<Self> {
        Self::new(values, vec![(0, 0.5, 2.0)])
    }

    fn check_sum(&self, tau: f64, theta: f64) -> f64 {
        let n = self.sorted.len();
        let below = self.sorted.partition_point(|x| *x < theta);
        let below_sum = self.prefix[below];
        let above_sum = self.prefix[n] - below_sum;
        let under = below as f64 * theta - below_sum;
        let over = above_sum - (n - below) as f64 * theta;
        tau * over + (1.0 - tau) * under
    }
}

impl SampleLoss for SortedCheckLoss {
    fn eval(&self, theta: &[f64]) -> Result<f64> {
        if theta.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: theta.len() });
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFiniteLoss { theta: theta.to_vec() });
        }
        Ok(self.terms.iter().map(|&(k, tau, scale)| scale * self.check_sum(tau, theta[k])).sum())
    }

    fn n_obs(&self) -> usize {
        self.sorted.len()
    }
}

/// Type-7 sample quartiles.
pub fn empirical_quartiles(values: &[f64]) -> Result<[f64; 3]> {
    if values.is_empty() || values.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("need at least one finite value"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok([quantile_sorted(&sorted, 0.25), quantile_sorted(&sorted, 0.5), quantile_sorted(&sorted, 0.75)])
}

/// Random-walk step per coordinate: the interquartile range over `sqrt(n)`,
/// or a standard-deviation or unit-scale fallback for degenerate samples.
pub fn default_step_scale(values: &[f64]) -> Result<f64> {
    let [q1, q2, q3] = empirical_quartiles(values)?;
    let root_n = sqrt(values.len() as f64);
    let iqr = q3 - q1;
    if iqr > 0.0 {
        return Ok(iqr / root_n);
    }
    let (_, sd) = mean_sd(values);
    if sd > 0.0 {
        return Ok(sd / root_n);
    }
    Ok(1e-3 * q2.abs().max(1.0) / root_n)
}

/// A calibrated chain for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileFit {
    pub chain: Chain<ParamPoint>,
    pub weight: f64,
    /// Present when the weight came from the unit-information rule.
    pub unit_information: Option<UnitInformation>,
}

fn resolve_weight(
    rule: &WeightRule,
    prior: &LogPrior,
    loss: &PointLoss,
    values: &[f64],
    start: &[f64],
) -> Result<(f64, Option<UnitInformation>)> {
    rule.validate()?;
    match rule {
        WeightRule::Fixed(w) => Ok((*w, None)),
        WeightRule::UnitInformation { mc_draws, seed } => {
            let data: Vec<Datum> = values.iter().map(|&x| Datum::Scalar(x)).collect();
            let ui = unit_info_weight_from(prior, loss, &data, *seed, *mc_draws, start)?;
            Ok((ui.weight, Some(ui)))
        }
        WeightRule::Hierarchical { .. } | WeightRule::Operational(_) => {
            Err(Error::Unsupported("quantile pipeline supports the fixed and unit-information weight rules"))
        }
    }
}

/// Strictly increasing point closest in spirit to `q`: ties are spread by `gap`.
fn ordered_start(q: [f64; 3], gap: f64) -> Vec<f64> {
    if q[0] < q[1] && q[1] < q[2] {
        return q.to_vec();
    }
    vec![q[1] - gap, q[1], q[1] + gap]
}

/// Posterior of `(theta_1, theta_2, theta_3)` under the quartile-triple loss
/// and an ordered-normal prior.
///
/// Empty step scales in `config` are replaced by [`default_step_scale`], and
/// a missing start by the empirical quartiles.
pub fn quartile_posterior(values: &[f64], prior: &LogPrior, rule: &WeightRule, config: &McmcConfig) -> Result<QuantileFit> {
    if values.len() < 4 {
        return Err(Error::NotEnoughData { needed: 4, found: values.len() });
    }
    if !matches!(prior, LogPrior::OrderedNormal { .. }) || prior.dim() != 3 {
        return Err(Error::invalid("quartile posterior needs a three-coordinate ordered-normal prior"));
    }
    let step = default_step_scale(values)?;
    let start = ordered_start(empirical_quartiles(values)?, step);
    let (weight, unit_information) = resolve_weight(rule, prior, &PointLoss::QuartileTriple, values, &start)?;
    let loss = DatasetLoss::whole_sample(SortedCheckLoss::quartile_triple(values)?);
    let posterior = GibbsPosterior::new(loss, weight, prior.clone())?;
    let config = fill_config(config, &posterior, step, start)?;
    let chain = random_walk_mh(&posterior, &config)?;
    Ok(QuantileFit { chain, weight, unit_information })
}

/// Posterior of the median under absolute loss and a one-dimensional prior.
pub fn median_posterior(values: &[f64], prior: &LogPrior, rule: &WeightRule, config: &McmcConfig) -> Result<QuantileFit> {
    if values.len() < 2 {
        return Err(Error::NotEnoughData { needed: 2, found: values.len() });
    }
    if prior.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, found: prior.dim() });
    }
    let step = default_step_scale(values)?;
    let start = vec![empirical_quartiles(values)?[1]];
    let (weight, unit_information) = resolve_weight(rule, prior, &PointLoss::Absolute, values, &start)?;
    let loss = DatasetLoss::whole_sample(SortedCheckLoss::absolute(values)?);
    let posterior = GibbsPosterior::new(loss, weight, prior.clone())?;
    let config = fill_config(config, &posterior, step, start)?;
    let chain = random_walk_mh(&posterior, &config)?;
    Ok(QuantileFit { chain, weight, unit_information })
}

/// Fills in default steps and start. Steps are capped at a few prior
/// standard deviations; the start is the data-based guess or the prior
/// mode, whichever has the higher posterior density.
fn fill_config(config: &McmcConfig, posterior: &GibbsPosterior, step: f64, start: Vec<f64>) -> Result<McmcConfig> {
    let mut config = config.clone();
    let prior = posterior.prior();
    if config.step_scales.is_empty() {
        config.step_scales = match prior {
            LogPrior::IndependentNormal { variances, .. } | LogPrior::OrderedNormal { variances, .. } => {
                variances.iter().map(|v| step.min(2.4 * sqrt(*v))).collect()
            }
            _ => vec![step; prior.dim()],
        };
    }
    if config.start.is_none() {
        let mut best = (posterior.log_unnormalized(&start)?, start);
        if let Ok(mode) = prior.mode() {
            let value = posterior.log_unnormalized(&mode)?;
            if value > best.0 {
                best = (value, mode.into_values());
            }
        }
        config.start = Some(best.1);
    }
    Ok(config)
}

/// Labelled samples, in first-appearance order.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedSample {
    groups: Vec<(String, Vec<f64>)>,
}

impl GroupedSample {
    pub fn new(groups: Vec<(String, Vec<f64>)>) -> Result<Self> {
        for (i, (label, values)) in groups.iter().enumerate() {
            if groups[..i].iter().any(|(l, _)| l == label) {
                return Err(Error::invalid(alloc::format!("duplicate group label `{label}`")));
            }
            if values.is_empty() || values.iter().any(|x| !x.is_finite()) {
                return Err(Error::invalid(alloc::format!("group `{label}` needs at least one finite value")));
            }
        }
        if groups.is_empty() {
            return Err(Error::invalid("need at least one group"));
        }
        Ok(Self { groups })
    }

    /// Collects `(label, value)` rows, grouping by label.
    pub fn from_rows<I, S>(rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        let mut groups: Vec<(String, Vec<f64>)> = Vec::new();
        for (label, value) in rows {
            let label = label.into();
            match groups.iter_mut().find(|(l, _)| *l == label) {
                Some((_, values)) => values.push(value),
                None => groups.push((label, vec![value])),
            }
        }
        Self::new(groups)
    }

    pub fn groups(&self) -> &[(String, Vec<f64>)] {
        &self.groups
    }
}

/// Sampler settings shared by every group of a boxplot.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxplotConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub level: f64,
    pub seed: u64,
    /// Per-coordinate steps; empty means [`default_step_scale`] per group.
    pub step_scales: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupSummary {
    pub label: String,
    pub n: usize,
    pub quartiles: [f64; 3],
    pub weight: f64,
    pub intervals: [(f64, f64); 3],
    pub acceptance: f64,
    pub draws: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupFailure {
    pub label: String,
    pub error: Error,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxplotSummary {
    pub level: f64,
    /// One entry per group, in input order.
    pub groups: Vec<core::result::Result<GroupSummary, GroupFailure>>,
}

impl BoxplotSummary {
    pub fn failures(&self) -> impl Iterator<Item = &GroupFailure> {
        self.groups.iter().filter_map(|g| g.as_ref().err())
    }
}

/// Empirical boxes with posterior credible intervals per group.
///
/// `priors` holds one prior shared by all groups or one per group. Each group
/// gets its own seeds, derived from `config.seed` (and the rule's seed) by
/// stream, and its own calibrated weight. A failing group is reported and
/// the others still run.
pub fn bayesian_boxplot(data: &GroupedSample, priors: &[LogPrior], rule: &WeightRule, config: &BoxplotConfig) -> Result<BoxplotSummary> {
    let groups = data.groups();
    if priors.len() != 1 && priors.len() != groups.len() {
        return Err(Error::DimensionMismatch { expected: groups.len(), found: priors.len() });
    }
    if !(config.level > 0.0 && config.level <= 1.0) {
        return Err(Error::invalid("credible level must lie in (0, 1]"));
    }
    let mut rows = Vec::with_capacity(groups.len());
    for (g, (label, values)) in groups.iter().enumerate() {
        let prior = &priors[if priors.len() == 1 { 0 } else { g }];
        let stream_id = g as u64 + 1;
        let group_rule = match rule {
            WeightRule::UnitInformation { mc_draws, seed } => {
                WeightRule::UnitInformation { mc_draws: *mc_draws, seed: derive_seed(*seed, stream_id) }
            }
            other => other.clone(),
        };
        let mut mcmc = McmcConfig::new(config.iterations, config.burn_in, config.step_scales.clone(), derive_seed(config.seed, stream_id));
        mcmc.thin = config.thin;
        let row = summarize_group(label, values, prior, &group_rule, &mcmc, config.level)
            .map_err(|error| GroupFailure { label: label.clone(), error });
        rows.push(row);
    }
    Ok(BoxplotSummary { level: config.level, groups: rows })
}

fn summarize_group(
    label: &str,
    values: &[f64],
    prior: &LogPrior,
    rule: &WeightRule,
    mcmc: &McmcConfig,
    level: f64,
) -> Result<GroupSummary> {
    let quartiles = empirical_quartiles(values)?;
    let fit = quartile_posterior(values, prior, rule, mcmc)?;
    let mut intervals = [(0.0, 0.0); 3];
    for (k, interval) in intervals.iter_mut().enumerate() {
        *interval = credible_interval(&fit.chain, k, level)?;
    }
    Ok(GroupSummary {
        label: String::from(label),
        n: values.len(),
        quartiles,
        weight: fit.weight,
        intervals,
        acceptance: fit.chain.acceptance_rate,
        draws: fit.chain.len(),
    })
}

/// Whether every draw satisfies `theta_1 < theta_2 < theta_3`.
pub fn draws_ordered(chain: &Chain<ParamPoint>) -> bool {
    chain.draws.iter().all(|d| Constraint::StrictlyIncreasing.admits(d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::DatasetLoss;
    use proptest::prelude::*;

    #[test]
    fn quartiles_type7() {
        assert_eq!(empirical_quartiles(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap(), [2.0, 3.0, 4.0]);
        assert_eq!(empirical_quartiles(&[4.0, 1.0, 3.0, 2.0]).unwrap(), [1.75, 2.5, 3.25]);
    }

    #[test]
    fn grouping_keeps_order_and_rejects_duplicates() {
        let g = GroupedSample::from_rows([("b", 1.0), ("a", 2.0), ("b", 3.0)]).unwrap();
        assert_eq!(g.groups()[0], (String::from("b"), vec![1.0, 3.0]));
        assert!(GroupedSample::new(vec![(String::from("x"), vec![1.0]), (String::from("x"), vec![2.0])]).is_err());
    }

    #[test]
    fn unsupported_rules() {
        let prior = LogPrior::ordered_normal(vec![-1.0, 0.0, 1.0], vec![1.0; 3]).unwrap();
        let cfg = McmcConfig::new(200, 100, vec![], 0);
        let values: Vec<f64> = (0..10).map(f64::from).collect();
        let err = quartile_posterior(&values, &prior, &WeightRule::Hierarchical { xi: 1.0 }, &cfg).unwrap_err();
        assert!(matches!(err, Error::Unsupported(_)));
        assert!(matches!(quartile_posterior(&values[..3], &prior, &WeightRule::Fixed(1.0), &cfg), Err(Error::NotEnoughData { .. })));
    }

    proptest! {
        #[test]
        fn sorted_sums_match_separable(values in proptest::collection::vec(-5.0..5.0f64, 1..40), t in proptest::collection::vec(-6.0..6.0f64, 3)) {
            let fast = SortedCheckLoss::quartile_triple(&values).unwrap();
            let slow = DatasetLoss::scalar(PointLoss::QuartileTriple, &values).unwrap();
            let (a, b) = (fast.eval(&t).unwrap(), slow.eval(&t).unwrap());
            prop_assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()));
            let abs_fast = SortedCheckLoss::absolute(&values).unwrap();
            let abs_slow = DatasetLoss::scalar(PointLoss::Absolute, &values).unwrap();
            prop_assert!((abs_fast.eval(&t[..1]).unwrap() - abs_slow.eval(&t[..1]).unwrap()).abs() <= 1e-10 * (1.0 + b.abs()));
        }
    }
}
