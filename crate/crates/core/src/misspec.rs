//! Misspecified models: Kullback-Leibler projections onto a proxy family and
//! concentration of the self-information posterior around them.

use alloc::vec;
use alloc::vec::Vec;

use libm::{exp, log, sqrt};
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::engines::optim::{nelder_mead, NelderMeadOptions};
use crate::engines::quadrature::integrate_adaptive;
use crate::gibbs::DiscreteBelief;
use crate::loss::{DatasetLoss, DensityModel, PointLoss};
use crate::math::{log_sum_exp, mean_sd, normal_log_pdf};
use crate::param::ParamPoint;
use crate::prior::LogPrior;
use crate::rng::{stream, SeededRng};
use crate::{Error, Result};

/// Points in the parameter grid of the concentration experiment.
pub const GRID_POINTS: usize = 4096;
/// Half-width of the grid in prior standard deviations.
pub const GRID_HALF_WIDTH_SDS: f64 = 8.0;
const KL_TOLERANCE: f64 = 1e-12;
const KL_PIECES: usize = 32;

/// The data-generating density.
#[derive(Debug, Clone, PartialEq)]
pub enum TrueDensity {
    Normal {
        mean: f64,
        var: f64,
    },
    /// Two-component normal mixture.
    Mixture {
        weights: [f64; 2],
        means: [f64; 2],
        vars: [f64; 2],
    },
    Exponential {
        rate: f64,
    },
}

impl TrueDensity {
    pub fn normal(mean: f64, var: f64) -> Result<Self> {
        if !mean.is_finite() || !(var > 0.0 && var.is_finite()) {
            return Err(Error::invalid("normal density needs a finite mean and positive variance"));
        }
        Ok(TrueDensity::Normal { mean, var })
    }

    pub fn mixture(weights: [f64; 2], means: [f64; 2], vars: [f64; 2]) -> Result<Self> {
        if weights.iter().any(|w| !(*w >= 0.0)) || (weights[0] + weights[1] - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("mixture weights must be non-negative and sum to one"));
        }
        if means.iter().any(|m| !m.is_finite()) || vars.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::invalid("mixture components need finite means and positive variances"));
        }
        Ok(TrueDensity::Mixture { weights, means, vars })
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::invalid("exponential rate must be finite and positive"));
        }
        Ok(TrueDensity::Exponential { rate })
    }

    pub fn log_density(&self, x: f64) -> f64 {
        match self {
            TrueDensity::Normal { mean, var } => normal_log_pdf(x, *mean, *var),
            TrueDensity::Mixture { weights, means, vars } => log_sum_exp(&[
                log(weights[0]) + normal_log_pdf(x, means[0], vars[0]),
                log(weights[1]) + normal_log_pdf(x, means[1], vars[1]),
            ]),
            TrueDensity::Exponential { rate } => {
                if x < 0.0 {
                    f64::NEG_INFINITY
                } else {
                    log(*rate) - rate * x
                }
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            TrueDensity::Normal { mean, .. } => *mean,
            TrueDensity::Mixture { weights, means, .. } => weights[0] * means[0] + weights[1] * means[1],
            TrueDensity::Exponential { rate } => 1.0 / rate,
        }
    }

    pub fn sample(&self, rng: &mut SeededRng) -> f64 {
        match self {
            TrueDensity::Normal { mean, var } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + sqrt(*var) * z
            }
            TrueDensity::Mixture { weights, means, vars } => {
                let k = usize::from(rng.random::<f64>() >= weights[0]);
                let z: f64 = StandardNormal.sample(rng);
                means[k] + sqrt(vars[k]) * z
            }
            TrueDensity::Exponential { rate } => {
                let e: f64 = Exp1.sample(rng);
                e / rate
            }
        }
    }

    pub fn sample_n(&self, rng: &mut SeededRng, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.sample(rng)).collect()
    }

    /// Interval outside which the density is negligible.
    fn effective_support(&self) -> (f64, f64) {
        const SDS: f64 = 12.0;
        match self {
            TrueDensity::Normal { mean, var } => (mean - SDS * sqrt(*var), mean + SDS * sqrt(*var)),
            TrueDensity::Mixture { means, vars, .. } => {
                let lo = (means[0] - SDS * sqrt(vars[0])).min(means[1] - SDS * sqrt(vars[1]));
                let hi = (means[0] + SDS * sqrt(vars[0])).max(means[1] + SDS * sqrt(vars[1]));
                (lo, hi)
            }
            TrueDensity::Exponential { rate } => (0.0, 45.0 / rate),
        }
    }
}

/// The proxy model `f(x; theta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProxyFamily {
    /// `N(theta, var)`.
    NormalLocation { var: f64 },
    /// `N(theta[0], theta[1]^2)` with `theta[1] > 0`.
    NormalLocationScale,
}

impl ProxyFamily {
    pub fn dim(&self) -> usize {
        match self {
            ProxyFamily::NormalLocation { .. } => 1,
            ProxyFamily::NormalLocationScale => 2,
        }
    }

    fn check(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: theta.len() });
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::invalid("proxy parameter must be finite"));
        }
        if let ProxyFamily::NormalLocation { var } = self {
            if !(*var > 0.0 && var.is_finite()) {
                return Err(Error::invalid("proxy variance must be finite and positive"));
            }
        }
        if *self == ProxyFamily::NormalLocationScale && theta[1] <= 0.0 {
            return Err(Error::invalid("proxy scale must be positive"));
        }
        Ok(())
    }

    /// `(mean, variance)` of the proxy at `theta`.
    fn moments(&self, theta: &[f64]) -> (f64, f64) {
        match self {
            ProxyFamily::NormalLocation { var } => (theta[0], *var),
            ProxyFamily::NormalLocationScale => (theta[0], theta[1] * theta[1]),
        }
    }

    pub fn log_density(&self, theta: &[f64], x: f64) -> Result<f64> {
        self.check(theta)?;
        let (mean, var) = self.moments(theta);
        Ok(normal_log_pdf(x, mean, var))
    }

    /// The self-information loss of this family.
    pub fn loss(&self) -> PointLoss {
        match self {
            ProxyFamily::NormalLocation { var } => PointLoss::NegLogDensity(DensityModel::NormalLocation { sd: sqrt(*var) }),
            ProxyFamily::NormalLocationScale => PointLoss::NegLogDensity(DensityModel::NormalLocationScale),
        }
    }
}

/// `D(f0, f(.; theta)) = integral f0 log(f0 / f)`; closed form when both are
/// normal, adaptive quadrature otherwise.
pub fn kl_divergence(f0: &TrueDensity, family: &ProxyFamily, theta: &[f64]) -> Result<f64> {
    family.check(theta)?;
    let (mean, var) = family.moments(theta);
    if let TrueDensity::Normal { mean: m0, var: v0 } = f0 {
        let d = m0 - mean;
        return Ok(0.5 * (log(var / v0) + (v0 + d * d) / var - 1.0));
    }
    let (lo, hi) = f0.effective_support();
    let width = (hi - lo) / KL_PIECES as f64;
    let integrand = |x: f64| {
        let lf0 = f0.log_density(x);
        if lf0 == f64::NEG_INFINITY {
            return 0.0;
        }
        exp(lf0) * (lf0 - normal_log_pdf(x, mean, var))
    };
    let mut total = 0.0;
    for k in 0..KL_PIECES {
        let a = lo + k as f64 * width;
        total += integrate_adaptive(integrand, a, a + width, KL_TOLERANCE / KL_PIECES as f64)?;
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KlMinimum {
    pub theta: Vec<f64>,
    pub divergence: f64,
}

/// Minimizes [`kl_divergence`] over the box `[lower, upper]`, starting from
/// its centre.
pub fn kl_minimizer(f0: &TrueDensity, family: &ProxyFamily, lower: &[f64], upper: &[f64]) -> Result<KlMinimum> {
    let dim = family.dim();
    if lower.len() != dim || upper.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: lower.len().max(upper.len()) });
    }
    if lower.iter().zip(upper).any(|(l, u)| !(l < u && l.is_finite() && u.is_finite())) {
        return Err(Error::invalid("search box needs finite bounds with lower < upper"));
    }
    let inside = |t: &[f64]| t.iter().zip(lower.iter().zip(upper)).all(|(x, (l, u))| x >= l && x <= u);
    let objective = |t: &[f64]| {
        if !inside(t) {
            return f64::INFINITY;
        }
        kl_divergence(f0, family, t).unwrap_or(f64::INFINITY)
    };
    let start: Vec<f64> = lower.iter().zip(upper).map(|(l, u)| 0.5 * (l + u)).collect();
    let steps = lower.iter().zip(upper).map(|(l, u)| 0.1 * (u - l)).collect();
    let opts = NelderMeadOptions { tolerance: 1e-14, x_tolerance: 1e-9, max_evals: 5_000 * dim, initial_steps: Some(steps) };
    let fit = nelder_mead(objective, &start, &opts)?;
    let polish = nelder_mead(objective, &fit.point, &NelderMeadOptions { initial_steps: None, ..opts })?;
    let best = if polish.value < fit.value { polish } else { fit };
    Ok(KlMinimum { divergence: best.value, theta: best.point })
}

/// Settings of the concentration experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationSetup {
    /// Sample sizes, strictly increasing.
    pub schedule: Vec<usize>,
    /// Neighbourhood radii.
    pub radii: Vec<f64>,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationRow {
    pub n: usize,
    pub eps: f64,
    pub mass_mean: f64,
    pub mass_sd: f64,
    pub seeds: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationReport {
    pub theta0: f64,
    pub divergence: f64,
    pub grid_step: f64,
    pub rows: Vec<ConcentrationRow>,
}

/// Posterior mass within `eps` of the KL minimizer as the sample grows.
///
/// The posterior uses the proxy's self-information loss with weight one on
/// a grid of [`GRID_POINTS`] points spanning the prior mean plus or minus
/// [`GRID_HALF_WIDTH_SDS`] prior standard deviations (or the bounds of a
/// uniform prior), normalized exactly. For each seed one sample of the
/// largest size is drawn and its prefixes give the smaller sizes.
pub fn concentration_experiment(
    f0: &TrueDensity,
    family: &ProxyFamily,
    prior: &LogPrior,
    setup: &ConcentrationSetup,
) -> Result<ConcentrationReport> {
    if family.dim() != 1 || prior.dim() != 1 {
        return Err(Error::Unsupported("concentration experiment handles one-parameter families"));
    }
    if setup.schedule.is_empty() || setup.schedule[0] == 0 || setup.schedule.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("sample-size schedule must be positive and strictly increasing"));
    }
    if setup.seeds.is_empty() || setup.radii.is_empty() || setup.radii.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(Error::invalid("need at least one seed and positive radii"));
    }
    let (lo, hi) = match prior {
        LogPrior::IndependentNormal { means, variances } => {
            let half = GRID_HALF_WIDTH_SDS * sqrt(variances[0]);
            (means[0] - half, means[0] + half)
        }
        LogPrior::Uniform { lower, upper } => (lower[0], upper[0]),
        _ => return Err(Error::Unsupported("concentration grid needs a normal or uniform prior")),
    };
    let step = (hi - lo) / (GRID_POINTS - 1) as f64;
    if let Some(&eps) = setup.radii.iter().find(|e| **e < step) {
        return Err(Error::GridTooCoarse { eps, step });
    }
    let grid: Vec<ParamPoint> = (0..GRID_POINTS).map(|k| ParamPoint::scalar(lo + k as f64 * step)).collect::<Result<_>>()?;
    let prior_belief = DiscreteBelief::discretize(prior, grid)?;

    // Search the KL minimizer over a box wider than the grid so a target
    // outside the prior's support is detected rather than clipped.
    let pad = hi - lo;
    let KlMinimum { theta, divergence } = kl_minimizer(f0, family, &[lo - pad], &[hi + pad])?;
    let theta0 = theta[0];
    for &eps in &setup.radii {
        if prior_belief.mass_where(|t| (t[0] - theta0).abs() <= eps) <= 0.0 {
            return Err(Error::PriorExcludesTarget { target: theta0, eps });
        }
    }

    let n_max = *setup.schedule.last().expect("schedule is non-empty");
    let loss = family.loss();
    let mut masses = vec![vec![Vec::with_capacity(setup.seeds.len()); setup.radii.len()]; setup.schedule.len()];
    for &seed in &setup.seeds {
        let sample = f0.sample_n(&mut stream(seed, 0), n_max);
        for (i, &n) in setup.schedule.iter().enumerate() {
            let data = DatasetLoss::scalar(loss.clone(), &sample[..n])?;
            let posterior = prior_belief.update(&data, 1.0)?;
            for (j, &eps) in setup.radii.iter().enumerate() {
                masses[i][j].push(posterior.mass_where(|t| (t[0] - theta0).abs() <= eps));
            }
        }
    }

    let mut rows = Vec::with_capacity(setup.schedule.len() * setup.radii.len());
    for (i, &n) in setup.schedule.iter().enumerate() {
        for (j, &eps) in setup.radii.iter().enumerate() {
            let (mean, sd) = mean_sd(&masses[i][j]);
            rows.push(ConcentrationRow { n, eps, mass_mean: mean, mass_sd: sd, seeds: setup.seeds.len() });
        }
    }
    Ok(ConcentrationReport { theta0, divergence, grid_step: step, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    const LOCATION: ProxyFamily = ProxyFamily::NormalLocation { var: 1.0 };

    #[test]
    fn gaussian_kl_closed_form() {
        let f0 = TrueDensity::normal(0.0, 1.0).unwrap();
        assert!((kl_divergence(&f0, &LOCATION, &[1.0]).unwrap() - 0.5).abs() < 1e-15);
        assert!(kl_divergence(&f0, &LOCATION, &[0.0]).unwrap().abs() < 1e-10);
    }

    #[test]
    fn quadrature_agrees_with_closed_form() {
        // A mixture with equal components is a plain normal, but takes the quadrature path.
        let f0 = TrueDensity::mixture([0.5, 0.5], [0.3, 0.3], [2.0, 2.0]).unwrap();
        let direct = 0.5 * (log(1.0 / 2.0) + (2.0 + 0.49) / 1.0 - 1.0);
        assert!((kl_divergence(&f0, &LOCATION, &[1.0]).unwrap() - direct).abs() < 1e-9);
    }

    #[test]
    fn exponential_projection() {
        let f0 = TrueDensity::exponential(1.0).unwrap();
        let d1 = kl_divergence(&f0, &LOCATION, &[1.0]).unwrap();
        assert!(d1 < kl_divergence(&f0, &LOCATION, &[0.0]).unwrap());
        let min = kl_minimizer(&f0, &LOCATION, &[-5.0], &[5.0]).unwrap();
        assert!((min.theta[0] - 1.0).abs() < 1e-4, "{min:?}");
        assert!((min.divergence - d1).abs() < 1e-9);
    }

    #[test]
    fn minimizer_examples() {
        let well = kl_minimizer(&TrueDensity::normal(0.7, 1.0).unwrap(), &LOCATION, &[-3.0], &[3.0]).unwrap();
        assert!((well.theta[0] - 0.7).abs() < 1e-6);
        let symmetric = TrueDensity::mixture([0.5, 0.5], [-1.0, 1.0], [1.0, 1.0]).unwrap();
        assert!(kl_minimizer(&symmetric, &LOCATION, &[-3.0], &[2.0]).unwrap().theta[0].abs() < 1e-4);
        let scale =
            kl_minimizer(&TrueDensity::normal(1.0, 4.0).unwrap(), &ProxyFamily::NormalLocationScale, &[-3.0, 0.1], &[3.0, 5.0]).unwrap();
        assert!((scale.theta[0] - 1.0).abs() < 1e-5 && (scale.theta[1] - 2.0).abs() < 1e-5, "{scale:?}");
    }

    #[test]
    fn support_gap_refuses_to_run() {
        let prior = LogPrior::uniform(vec![-3.0], vec![0.0]).unwrap();
        let setup = ConcentrationSetup { schedule: vec![10], radii: vec![0.1], seeds: vec![1] };
        let err = concentration_experiment(&TrueDensity::exponential(1.0).unwrap(), &LOCATION, &prior, &setup).unwrap_err();
        assert!(matches!(err, Error::PriorExcludesTarget { .. }), "{err:?}");
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let prior = LogPrior::normal(vec![0.0], vec![100.0]).unwrap();
        let setup = ConcentrationSetup { schedule: vec![10], radii: vec![1e-3], seeds: vec![1] };
        let err = concentration_experiment(&TrueDensity::normal(0.0, 1.0).unwrap(), &LOCATION, &prior, &setup).unwrap_err();
        assert!(matches!(err, Error::GridTooCoarse { .. }));
    }
}
