//! Log-prior densities with sampling access.

use alloc::vec;
use alloc::vec::Vec;

use libm::{log, sqrt};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::math::normal_log_pdf;
use crate::param::{Constraint, ParamPoint};
use crate::rng::{seeded, SeededRng};
use crate::{Error, Result};

/// Attempts per draw before ordered rejection sampling gives up.
pub const ORDERED_REJECTION_CAP: usize = 10_000;

/// `log pi(theta)` up to a constant fixed per instance.
#[derive(Debug, Clone, PartialEq)]
pub enum LogPrior {
    IndependentNormal {
        means: Vec<f64>,
        variances: Vec<f64>,
    },
    /// Independent normals restricted to `theta_1 < theta_2 < ...`. The
    /// restriction's normalizing constant is not included.
    OrderedNormal {
        means: Vec<f64>,
        variances: Vec<f64>,
    },
    /// Joint `(delta, beta)` state laid out as `theta = (delta_1..delta_p,
    /// beta_1..beta_p)`: `delta_j ~ Bernoulli(a_j)`, `beta_j ~ N(0, v_j)` when
    /// included and exactly zero otherwise.
    SpikeSlab {
        slab_variances: Vec<f64>,
        inclusion_probs: Vec<f64>,
    },
    DiscreteGrid {
        support: Vec<ParamPoint>,
        weights: Vec<f64>,
    },
    /// Independent uniforms on `[lower_k, upper_k]`.
    Uniform {
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    /// Independent blocks over consecutive coordinates.
    Product(Vec<LogPrior>),
}

fn check_normal(means: &[f64], variances: &[f64]) -> Result<()> {
    if means.is_empty() || means.len() != variances.len() {
        return Err(Error::invalid("normal prior needs matching, non-empty means and variances"));
    }
    if means.iter().any(|m| !m.is_finite()) || variances.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::invalid("normal prior means must be finite and variances positive"));
    }
    Ok(())
}

impl LogPrior {
    pub fn normal(means: Vec<f64>, variances: Vec<f64>) -> Result<Self> {
        check_normal(&means, &variances)?;
        Ok(LogPrior::IndependentNormal { means, variances })
    }

    pub fn standard_normal(dim: usize) -> Result<Self> {
        Self::normal(vec![0.0; dim], vec![1.0; dim])
    }

    pub fn ordered_normal(means: Vec<f64>, variances: Vec<f64>) -> Result<Self> {
        check_normal(&means, &variances)?;
        Ok(LogPrior::OrderedNormal { means, variances })
    }

    pub fn spike_slab(slab_variances: Vec<f64>, inclusion_probs: Vec<f64>) -> Result<Self> {
        if slab_variances.is_empty() || slab_variances.len() != inclusion_probs.len() {
            return Err(Error::invalid("spike-slab needs matching, non-empty v and a"));
        }
        if slab_variances.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::invalid("slab variances must be positive"));
        }
        if inclusion_probs.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::invalid("inclusion probabilities must lie in [0, 1]"));
        }
        Ok(LogPrior::SpikeSlab { slab_variances, inclusion_probs })
    }

    pub fn discrete(support: Vec<ParamPoint>, weights: Vec<f64>) -> Result<Self> {
        if support.is_empty() || support.len() != weights.len() {
            return Err(Error::invalid("grid prior needs one weight per support point"));
        }
        let dim = support[0].dim();
        if support.iter().any(|s| s.dim() != dim) {
            return Err(Error::invalid("grid support points must share a dimension"));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::invalid("grid weights must be non-negative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("grid weights must sum to one"));
        }
        Ok(LogPrior::DiscreteGrid { support, weights })
    }

    pub fn uniform(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::invalid("uniform prior needs matching, non-empty bounds"));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l.is_finite() && u.is_finite() && l < u)) {
            return Err(Error::invalid("uniform prior needs finite bounds with lower < upper"));
        }
        Ok(LogPrior::Uniform { lower, upper })
    }

    pub fn product(blocks: Vec<LogPrior>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::invalid("product prior needs at least one block"));
        }
        Ok(LogPrior::Product(blocks))
    }

    pub fn dim(&self) -> usize {
        match self {
            LogPrior::IndependentNormal { means, .. } | LogPrior::OrderedNormal { means, .. } => means.len(),
            LogPrior::SpikeSlab { slab_variances, .. } => 2 * slab_variances.len(),
            LogPrior::DiscreteGrid { support, .. } => support[0].dim(),
            LogPrior::Uniform { lower, .. } => lower.len(),
            LogPrior::Product(blocks) => blocks.iter().map(LogPrior::dim).sum(),
        }
    }

    /// Support restriction that draws from this prior satisfy.
    pub fn constraint(&self) -> Constraint {
        match self {
            LogPrior::OrderedNormal { .. } => Constraint::StrictlyIncreasing,
            _ => Constraint::None,
        }
    }

    /// `log pi(theta)`; exactly `-inf` off the support.
    pub fn log_density(&self, theta: &[f64]) -> Result<f64> {
        if theta.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: theta.len() });
        }
        let value = match self {
            LogPrior::IndependentNormal { means, variances } => normal_sum(theta, means, variances),
            LogPrior::OrderedNormal { means, variances } => {
                if Constraint::StrictlyIncreasing.admits(theta) {
                    normal_sum(theta, means, variances)
                } else {
                    f64::NEG_INFINITY
                }
            }
            LogPrior::SpikeSlab { slab_variances, inclusion_probs } => {
                let p = slab_variances.len();
                let (delta, beta) = theta.split_at(p);
                let mut total = 0.0;
                for j in 0..p {
                    let a = inclusion_probs[j];
                    if delta[j] == 1.0 {
                        total += log(a) + normal_log_pdf(beta[j], 0.0, slab_variances[j]);
                    } else if delta[j] == 0.0 && beta[j] == 0.0 {
                        total += log(1.0 - a);
                    } else {
                        return Ok(f64::NEG_INFINITY);
                    }
                }
                total
            }
            LogPrior::DiscreteGrid { support, weights } => {
                let mass: f64 = support.iter().zip(weights).filter(|(s, _)| s.values() == theta).map(|(_, w)| w).sum();
                log(mass)
            }
            LogPrior::Uniform { lower, upper } => {
                let mut total = 0.0;
                for k in 0..lower.len() {
                    if !(theta[k] >= lower[k] && theta[k] <= upper[k]) {
                        return Ok(f64::NEG_INFINITY);
                    }
                    total -= log(upper[k] - lower[k]);
                }
                total
            }
            LogPrior::Product(blocks) => {
                let mut offset = 0;
                let mut total = 0.0;
                for block in blocks {
                    let d = block.dim();
                    total += block.log_density(&theta[offset..offset + d])?;
                    offset += d;
                }
                total
            }
        };
        Ok(value)
    }

    /// One draw.
    pub fn sample(&self, rng: &mut SeededRng) -> Result<Vec<f64>> {
        match self {
            LogPrior::IndependentNormal { means, variances } => Ok(draw_normals(rng, means, variances)),
            LogPrior::OrderedNormal { means, variances } => {
                for _ in 0..ORDERED_REJECTION_CAP {
                    let draw = draw_normals(rng, means, variances);
                    if Constraint::StrictlyIncreasing.admits(&draw) {
                        return Ok(draw);
                    }
                }
                Err(Error::RejectionCapExceeded { cap: ORDERED_REJECTION_CAP })
            }
            LogPrior::SpikeSlab { slab_variances, inclusion_probs } => {
                let p = slab_variances.len();
                let mut theta = vec![0.0; 2 * p];
                for j in 0..p {
                    if rng.random::<f64>() < inclusion_probs[j] {
                        theta[j] = 1.0;
                        let z: f64 = StandardNormal.sample(rng);
                        theta[p + j] = sqrt(slab_variances[j]) * z;
                    }
                }
                Ok(theta)
            }
            LogPrior::DiscreteGrid { support, weights } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut chosen = support.len() - 1;
                for (k, w) in weights.iter().enumerate() {
                    acc += w;
                    if u < acc && *w > 0.0 {
                        chosen = k;
                        break;
                    }
                }
                // Guard against rounding leaving u above the final cumulative sum.
                while weights[chosen] == 0.0 {
                    chosen -= 1;
                }
                Ok(support[chosen].values().to_vec())
            }
            LogPrior::Uniform { lower, upper } => Ok(lower.iter().zip(upper).map(|(l, u)| l + (u - l) * rng.random::<f64>()).collect()),
            LogPrior::Product(blocks) => {
                let mut theta = Vec::with_capacity(self.dim());
                for block in blocks {
                    theta.extend(block.sample(rng)?);
                }
                Ok(theta)
            }
        }
    }

    /// `n` i.i.d. draws from the stream seeded by `seed`.
    pub fn sample_n(&self, seed: u64, n: usize) -> Result<Vec<ParamPoint>> {
        if n == 0 {
            return Err(Error::invalid("sample count must be at least one"));
        }
        let mut rng = seeded(seed);
        (0..n).map(|_| ParamPoint::new(self.sample(&mut rng)?, self.constraint())).collect()
    }

    /// The point maximizing the density.
    pub fn mode(&self) -> Result<ParamPoint> {
        match self {
            LogPrior::IndependentNormal { means, .. } => ParamPoint::free(means.clone()),
            LogPrior::OrderedNormal { means, .. } => {
                if Constraint::StrictlyIncreasing.admits(means) {
                    ParamPoint::new(means.clone(), Constraint::StrictlyIncreasing)
                } else {
                    Err(Error::ModeUnavailable("ordered normal with non-increasing means"))
                }
            }
            LogPrior::DiscreteGrid { support, weights } => {
                let mut best = 0;
                for (k, w) in weights.iter().enumerate() {
                    if *w > weights[best] {
                        best = k;
                    }
                }
                Ok(support[best].clone())
            }
            LogPrior::SpikeSlab { .. } => Err(Error::ModeUnavailable("spike-and-slab prior")),
            LogPrior::Uniform { .. } => Err(Error::ModeUnavailable("uniform prior")),
            LogPrior::Product(blocks) => {
                let mut values = Vec::with_capacity(self.dim());
                for block in blocks {
                    values.extend(block.mode()?.into_values());
                }
                ParamPoint::free(values)
            }
        }
    }
}

fn normal_sum(theta: &[f64], means: &[f64], variances: &[f64]) -> f64 {
    theta.iter().zip(means).zip(variances).map(|((t, m), v)| normal_log_pdf(*t, *m, *v)).sum()
}

fn draw_normals(rng: &mut SeededRng, means: &[f64], variances: &[f64]) -> Vec<f64> {
    means
        .iter()
        .zip(variances)
        .map(|(m, v)| {
            let z: f64 = StandardNormal.sample(rng);
            m + sqrt(*v) * z
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn pt(v: &[f64]) -> ParamPoint {
        ParamPoint::free(v.to_vec()).unwrap()
    }

    #[test]
    fn log_density_examples() {
        let p = LogPrior::standard_normal(1).unwrap();
        assert_relative_eq!(p.log_density(&[0.0]).unwrap(), -0.918_938_533_204_672_7, epsilon = 1e-15);
        let ordered = LogPrior::ordered_normal(vec![10.0, 20.0, 30.0], vec![100.0; 3]).unwrap();
        assert_eq!(ordered.log_density(&[3.0, 2.0, 1.0]).unwrap(), f64::NEG_INFINITY);
        let grid = LogPrior::discrete(vec![pt(&[0.0]), pt(&[1.0])], vec![0.5, 0.5]).unwrap();
        assert_eq!(grid.log_density(&[0.0]).unwrap(), 0.5f64.ln());
        assert_eq!(grid.log_density(&[0.5]).unwrap(), f64::NEG_INFINITY);
        assert!(matches!(p.log_density(&[0.0, 1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn spike_slab_support() {
        let p = LogPrior::spike_slab(vec![0.5, 0.5], vec![0.2, 0.2]).unwrap();
        assert_eq!(p.log_density(&[0.0, 1.0, 0.3, 0.1]).unwrap(), f64::NEG_INFINITY);
        let v = p.log_density(&[0.0, 1.0, 0.0, 0.1]).unwrap();
        assert_relative_eq!(v, 0.8f64.ln() + 0.2f64.ln() + normal_log_pdf(0.1, 0.0, 0.5), epsilon = 1e-14);
        assert!(matches!(p.mode(), Err(Error::ModeUnavailable(_))));
    }

    #[test]
    fn normal_sample_mean_within_clt_bound() {
        let p = LogPrior::standard_normal(1).unwrap();
        let n = 100_000;
        let draws = p.sample_n(11, n).unwrap();
        let mean = draws.iter().map(|d| d[0]).sum::<f64>() / n as f64;
        assert!(mean.abs() < 4.0 / (n as f64).sqrt(), "{mean}");
    }

    #[test]
    fn grid_frequencies_within_clt_bound() {
        let weights = vec![0.1, 0.6, 0.3];
        let p = LogPrior::discrete(vec![pt(&[0.0]), pt(&[1.0]), pt(&[2.0])], weights.clone()).unwrap();
        let n = 50_000;
        let draws = p.sample_n(5, n).unwrap();
        for (k, w) in weights.iter().enumerate() {
            let freq = draws.iter().filter(|d| d[0] == k as f64).count() as f64 / n as f64;
            assert!((freq - w).abs() < 4.0 * (w * (1.0 - w) / n as f64).sqrt(), "{k}: {freq}");
        }
    }

    #[test]
    fn ordered_draws_are_increasing() {
        let p = LogPrior::ordered_normal(vec![10.0, 20.0, 30.0], vec![100.0; 3]).unwrap();
        for d in p.sample_n(3, 5_000).unwrap() {
            assert!(d[0] < d[1] && d[1] < d[2]);
            assert!(p.log_density(&d).unwrap().is_finite());
        }
    }

    #[test]
    fn rejection_cap_is_reported() {
        // Ordering against strongly reversed means essentially never happens.
        let p = LogPrior::ordered_normal(vec![100.0, 0.0], vec![1e-4, 1e-4]).unwrap();
        assert_eq!(p.sample_n(1, 1).unwrap_err(), Error::RejectionCapExceeded { cap: ORDERED_REJECTION_CAP });
    }

    #[test]
    fn modes() {
        assert_eq!(LogPrior::normal(vec![1.0, -2.0], vec![1.0, 3.0]).unwrap().mode().unwrap().values(), &[1.0, -2.0]);
        let grid = LogPrior::discrete(vec![pt(&[0.0]), pt(&[7.0])], vec![0.2, 0.8]).unwrap();
        assert_eq!(grid.mode().unwrap().values(), &[7.0]);
        let tie = LogPrior::discrete(vec![pt(&[0.0]), pt(&[7.0])], vec![0.5, 0.5]).unwrap();
        assert_eq!(tie.mode().unwrap().values(), &[0.0]);
        let ordered = LogPrior::ordered_normal(vec![10.0, 20.0, 30.0], vec![100.0; 3]).unwrap();
        assert_eq!(ordered.mode().unwrap().values(), &[10.0, 20.0, 30.0]);
    }

    #[test]
    fn grid_weights_validated() {
        assert!(LogPrior::discrete(vec![pt(&[0.0]), pt(&[1.0])], vec![0.5, 0.6]).is_err());
        assert!(LogPrior::discrete(vec![pt(&[0.0]), pt(&[1.0])], vec![1.5, -0.5]).is_err());
    }

    /// Midpoint-rule mass over a covering box, p <= 2.
    fn grid_mass(prior: &LogPrior, lo: f64, hi: f64, cells: usize) -> f64 {
        let h = (hi - lo) / cells as f64;
        let centers: Vec<f64> = (0..cells).map(|i| lo + (i as f64 + 0.5) * h).collect();
        match prior.dim() {
            1 => centers.iter().map(|t| prior.log_density(&[*t]).unwrap().exp() * h).sum(),
            2 => centers
                .iter()
                .flat_map(|a| centers.iter().map(move |b| (*a, *b)))
                .map(|(a, b)| prior.log_density(&[a, b]).unwrap().exp() * h * h)
                .sum(),
            _ => unreachable!(),
        }
    }

    #[test]
    fn continuous_priors_integrate_to_finite_constants() {
        let normal = LogPrior::normal(vec![0.5, -1.0], vec![1.0, 2.0]).unwrap();
        assert!((grid_mass(&normal, -12.0, 12.0, 600) - 1.0).abs() < 0.01);
        let uni = LogPrior::uniform(vec![-1.0], vec![2.0]).unwrap();
        assert!((grid_mass(&uni, -3.0, 3.0, 6000) - 1.0).abs() < 0.01);
        // Restricting two iid normals to the ordered cone keeps half the mass.
        let ordered = LogPrior::ordered_normal(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        assert!((grid_mass(&ordered, -8.0, 8.0, 800) - 0.5).abs() < 0.01);
    }

    proptest! {
        #[test]
        fn spike_slab_with_certain_inclusion_is_a_normal(betas in proptest::collection::vec(-5.0f64..5.0, 3)) {
            let v = vec![0.5, 1.0, 2.0];
            let ss = LogPrior::spike_slab(v.clone(), vec![1.0; 3]).unwrap();
            let normal = LogPrior::normal(vec![0.0; 3], v).unwrap();
            let mut theta = vec![1.0; 3];
            theta.extend(&betas);
            let diff = ss.log_density(&theta).unwrap() - normal.log_density(&betas).unwrap();
            prop_assert!(diff.abs() < 1e-12);
        }

        #[test]
        fn draws_have_finite_log_density(seed in any::<u64>()) {
            let priors = [
                LogPrior::normal(vec![1.0, 2.0], vec![0.5, 3.0]).unwrap(),
                LogPrior::ordered_normal(vec![10.0, 20.0, 30.0], vec![100.0; 3]).unwrap(),
                LogPrior::spike_slab(vec![0.5; 4], vec![0.3; 4]).unwrap(),
                LogPrior::uniform(vec![0.0], vec![2.0]).unwrap(),
                LogPrior::product(vec![
                    LogPrior::standard_normal(1).unwrap(),
                    LogPrior::uniform(vec![0.1], vec![3.0]).unwrap(),
                ]).unwrap(),
            ];
            for p in &priors {
                for d in p.sample_n(seed, 20).unwrap() {
                    prop_assert!(p.log_density(&d).unwrap() > f64::NEG_INFINITY);
                }
            }
        }
    }
}
