//! Random-walk Metropolis-Hastings and chain summaries.

use alloc::vec::Vec;

use libm::{log, sqrt};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::Target;
use crate::math::quantile_sorted;
use crate::param::ParamPoint;
use crate::rng::{seeded, stream};
use crate::{Error, Result};

/// Prior draws tried when looking for a start point.
pub const START_ATTEMPTS: usize = 1_000;
/// Draws required before an interval is reported.
pub const MIN_INTERVAL_DRAWS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct McmcConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    /// Standard deviation of the Gaussian step, per coordinate.
    pub step_scales: Vec<f64>,
    pub seed: u64,
    /// Start point; searched among prior draws when absent.
    pub start: Option<Vec<f64>>,
}

impl McmcConfig {
    pub fn new(iterations: usize, burn_in: usize, step_scales: Vec<f64>, seed: u64) -> Self {
        Self { iterations, burn_in, thin: 1, step_scales, seed, start: None }
    }

    pub fn with_start(mut self, start: Vec<f64>) -> Self {
        self.start = Some(start);
        self
    }

    pub fn with_thin(mut self, thin: usize) -> Self {
        self.thin = thin;
        self
    }

    /// Number of draws a run keeps.
    pub fn kept(&self) -> usize {
        (self.iterations - self.burn_in) / self.thin
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.burn_in >= self.iterations {
            return Err(Error::invalid("burn-in must be smaller than the iteration count"));
        }
        if self.thin == 0 {
            return Err(Error::invalid("thinning interval must be at least one"));
        }
        if self.step_scales.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: self.step_scales.len() });
        }
        if self.step_scales.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::invalid("step scales must be finite and positive"));
        }
        if let Some(start) = &self.start {
            if start.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: start.len() });
            }
        }
        Ok(())
    }
}

/// Post-burn-in, thinned record of a Markov chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain<S> {
    pub draws: Vec<S>,
    /// Log density of each kept draw.
    pub log_density: Vec<f64>,
    /// Whether the move into each kept draw was accepted.
    pub accepted: Vec<bool>,
    /// Accepted proposals over all iterations, burn-in included.
    pub acceptance_rate: f64,
    pub seed: u64,
}

impl<S> Chain<S> {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }
}

impl Chain<ParamPoint> {
    /// Values of coordinate `k` across draws.
    pub fn coordinate(&self, k: usize) -> Vec<f64> {
        self.draws.iter().map(|d| d[k]).collect()
    }

    pub fn mean(&self, k: usize) -> f64 {
        self.draws.iter().map(|d| d[k]).sum::<f64>() / self.draws.len() as f64
    }

    /// Kept draw with the largest log density (first on ties).
    pub fn max_density_draw(&self) -> Option<&ParamPoint> {
        let mut best: Option<usize> = None;
        for (i, lp) in self.log_density.iter().enumerate() {
            if best.is_none_or(|b| *lp > self.log_density[b]) {
                best = Some(i);
            }
        }
        best.map(|i| &self.draws[i])
    }
}

/// Random-walk Metropolis-Hastings with independent Gaussian steps per coordinate.
pub fn random_walk_mh<T: Target>(target: &T, config: &McmcConfig) -> Result<Chain<ParamPoint>> {
    let dim = target.dim();
    config.validate(dim)?;
    let constraint = target.constraint();

    let (mut theta, mut current) = match &config.start {
        Some(start) => {
            let lp = target.log_density(start)?;
            if !lp.is_finite() {
                return Err(Error::NoValidStart { attempts: 0 });
            }
            (start.clone(), lp)
        }
        None => find_start(target, config.seed)?,
    };

    let mut rng = seeded(config.seed);
    let mut proposal = theta.clone();
    let mut draws = Vec::with_capacity(config.kept());
    let mut log_density = Vec::with_capacity(config.kept());
    let mut accepted_trace = Vec::with_capacity(config.kept());
    let mut accepted = 0usize;
    let mut accepted_after_burn_in = 0usize;

    for iter in 0..config.iterations {
        for k in 0..dim {
            let z: f64 = StandardNormal.sample(&mut rng);
            proposal[k] = theta[k] + config.step_scales[k] * z;
        }
        let candidate = target.log_density(&proposal)?;
        let u: f64 = rng.random();
        let accept = candidate > f64::NEG_INFINITY && log(u) < candidate - current;
        if accept {
            core::mem::swap(&mut theta, &mut proposal);
            current = candidate;
            accepted += 1;
            if iter >= config.burn_in {
                accepted_after_burn_in += 1;
            }
        }
        if iter >= config.burn_in && (iter - config.burn_in + 1) % config.thin == 0 {
            draws.push(ParamPoint::new(theta.clone(), constraint)?);
            log_density.push(current);
            accepted_trace.push(accept);
        }
    }
    if accepted_after_burn_in == 0 {
        return Err(Error::NoAcceptance { step_scales: config.step_scales.clone() });
    }
    Ok(Chain {
        draws,
        log_density,
        accepted: accepted_trace,
        acceptance_rate: accepted as f64 / config.iterations as f64,
        seed: config.seed,
    })
}

fn find_start<T: Target>(target: &T, seed: u64) -> Result<(Vec<f64>, f64)> {
    // Stream 1 keeps the search from shifting the proposal stream.
    let mut rng = stream(seed, 1);
    for _ in 0..START_ATTEMPTS {
        let Some(candidate) = target.start_candidate(&mut rng) else {
            break;
        };
        let candidate = candidate?;
        let lp = target.log_density(&candidate)?;
        if lp.is_finite() {
            return Ok((candidate, lp));
        }
    }
    Err(Error::NoValidStart { attempts: START_ATTEMPTS })
}

/// Equal-tailed interval at `level` for coordinate `k`, from type-7 quantiles.
pub fn credible_interval(chain: &Chain<ParamPoint>, k: usize, level: f64) -> Result<(f64, f64)> {
    if !(level > 0.0 && level <= 1.0) {
        return Err(Error::invalid("credible level must lie in (0, 1]"));
    }
    if chain.len() < MIN_INTERVAL_DRAWS {
        return Err(Error::TooFewDraws { needed: MIN_INTERVAL_DRAWS, found: chain.len() });
    }
    if chain.draws.first().is_some_and(|d| k >= d.dim()) {
        return Err(Error::DimensionMismatch { expected: chain.draws[0].dim(), found: k + 1 });
    }
    let mut values = chain.coordinate(k);
    values.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    Ok((quantile_sorted(&values, tail), quantile_sorted(&values, 1.0 - tail)))
}

/// Batch-means Monte Carlo standard error of the mean of a correlated series.
pub fn batch_means_se(values: &[f64]) -> f64 {
    let n = values.len();
    let size = (sqrt(n as f64) as usize).max(1);
    let batches = n / size;
    if batches < 2 {
        return f64::NAN;
    }
    let means: Vec<f64> = (0..batches).map(|b| values[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64).collect();
    let grand = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|m| (m - grand) * (m - grand)).sum::<f64>() / (batches - 1) as f64;
    sqrt(var / batches as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engines::FnTarget;
    use crate::math::normal_log_pdf;
    use crate::param::Constraint;
    use alloc::vec;

    fn chain_of(values: Vec<f64>) -> Chain<ParamPoint> {
        let n = values.len();
        Chain {
            draws: values.into_iter().map(|v| ParamPoint::scalar(v).unwrap()).collect(),
            log_density: vec![0.0; n],
            accepted: vec![true; n],
            acceptance_rate: 1.0,
            seed: 0,
        }
    }

    #[test]
    fn interval_examples() {
        let chain = chain_of((1..=1000).map(f64::from).collect());
        let (lo, hi) = credible_interval(&chain, 0, 0.95).unwrap();
        assert!((lo - 25.975).abs() < 1e-9 && (hi - 975.025).abs() < 1e-9);
        assert_eq!(credible_interval(&chain, 0, 1.0).unwrap(), (1.0, 1000.0));
        let flat = chain_of(vec![2.5; 200]);
        assert_eq!(credible_interval(&flat, 0, 0.9).unwrap(), (2.5, 2.5));
        let short = chain_of(vec![1.0; 99]);
        assert!(matches!(credible_interval(&short, 0, 0.9), Err(Error::TooFewDraws { .. })));
    }

    #[test]
    fn standard_normal_moments() {
        let t = FnTarget::new(1, |x: &[f64]| normal_log_pdf(x[0], 0.0, 1.0));
        let cfg = McmcConfig::new(100_000, 1_000, vec![2.4], 17).with_start(vec![0.0]);
        let chain = random_walk_mh(&t, &cfg).unwrap();
        let xs = chain.coordinate(0);
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64;
        assert!(mean.abs() < 4.0 * batch_means_se(&xs), "{mean}");
        assert!((var - 1.0).abs() < 0.1, "{var}");
        assert!(chain.acceptance_rate > 0.2 && chain.acceptance_rate < 0.6);
    }

    #[test]
    fn kept_draw_count() {
        let t = FnTarget::new(1, |x: &[f64]| -0.5 * x[0] * x[0]);
        let cfg = McmcConfig::new(1_000, 200, vec![1.0], 3).with_start(vec![0.0]).with_thin(4);
        let chain = random_walk_mh(&t, &cfg).unwrap();
        assert_eq!(chain.len(), 200);
        assert_eq!(chain.len(), cfg.kept());
    }

    #[test]
    fn same_seed_same_chain() {
        let t = FnTarget::new(2, |x: &[f64]| -0.5 * (x[0] * x[0] + 4.0 * x[1] * x[1]));
        let cfg = McmcConfig::new(5_000, 100, vec![1.0, 0.5], 99).with_start(vec![0.0, 0.0]);
        assert_eq!(random_walk_mh(&t, &cfg).unwrap(), random_walk_mh(&t, &cfg).unwrap());
    }

    struct Ordered;
    impl Target for Ordered {
        fn dim(&self) -> usize {
            3
        }
        fn log_density(&self, x: &[f64]) -> Result<f64> {
            if Constraint::StrictlyIncreasing.admits(x) {
                Ok(-0.5 * x.iter().map(|v| v * v).sum::<f64>())
            } else {
                Ok(f64::NEG_INFINITY)
            }
        }
        fn constraint(&self) -> Constraint {
            Constraint::StrictlyIncreasing
        }
        fn start_candidate(&self, rng: &mut crate::rng::SeededRng) -> Option<Result<Vec<f64>>> {
            Some(Ok((0..3).map(|_| rng.random::<f64>()).collect()))
        }
    }

    #[test]
    fn constrained_chain_stays_ordered() {
        let chain = random_walk_mh(&Ordered, &McmcConfig::new(20_000, 1_000, vec![0.7; 3], 5)).unwrap();
        assert!(chain.draws.iter().all(|d| d[0] < d[1] && d[1] < d[2]));
    }

    #[test]
    fn no_start_found() {
        let t = FnTarget::new(1, |_: &[f64]| f64::NEG_INFINITY);
        let err = random_walk_mh(&t, &McmcConfig::new(10, 1, vec![1.0], 0)).unwrap_err();
        assert_eq!(err, Error::NoValidStart { attempts: START_ATTEMPTS });
    }

    #[test]
    fn stuck_chain_is_reported() {
        let t = FnTarget::new(1, |x: &[f64]| if x[0] == 0.0 { 0.0 } else { f64::NEG_INFINITY });
        let err = random_walk_mh(&t, &McmcConfig::new(100, 10, vec![1.0], 0).with_start(vec![0.0])).unwrap_err();
        assert!(matches!(err, Error::NoAcceptance { .. }));
    }

    #[test]
    fn config_validation() {
        assert!(McmcConfig::new(10, 10, vec![1.0], 0).validate(1).is_err());
        assert!(McmcConfig::new(10, 1, vec![0.0], 0).validate(1).is_err());
        assert!(McmcConfig::new(10, 1, vec![1.0], 0).validate(2).is_err());
    }
}
