use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use libm::log;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::cox::CoxLoss;
use crate::engines::hessian::hessian_fd;
use crate::engines::optim::{nelder_mead, NelderMeadOptions};
use crate::math::LN_2PI;
use crate::prior::LogPrior;
use crate::rng::seeded;
use crate::{Error, Result};

/// Default largest number of active markers.
pub const DEFAULT_MODEL_CAP: usize = 20;
/// Above this many active coordinates the conditional mode search restarts.
const DIRECT_SEARCH_LIMIT: usize = 3;
const MAX_RESTARTS: usize = 10;

/// Inclusion indicators and coefficients, with `beta_j == 0` wherever
/// `delta_j` is false.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    delta: Vec<bool>,
    beta: Vec<f64>,
}

impl ModelState {
    pub fn new(delta: Vec<bool>, beta: Vec<f64>) -> Result<Self> {
        if delta.len() != beta.len() {
            return Err(Error::DimensionMismatch { expected: delta.len(), found: beta.len() });
        }
        if delta.iter().zip(&beta).any(|(d, b)| !d && *b != 0.0) {
            return Err(Error::invalid("excluded markers must have a zero coefficient"));
        }
        if beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::invalid("coefficients must be finite"));
        }
        Ok(Self { delta, beta })
    }

    pub fn empty(p: usize) -> Self {
        Self { delta: vec![false; p], beta: vec![0.0; p] }
    }

    pub fn delta(&self) -> &[bool] {
        &self.delta
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn active(&self) -> Vec<usize> {
        active(&self.delta)
    }

    pub fn size(&self) -> usize {
        self.delta.iter().filter(|d| **d).count()
    }

    /// Indicators packed little-endian into bytes, marker 0 in the lowest bit.
    pub fn delta_bytes(&self) -> Vec<u8> {
        let mut bytes = vec![0u8; self.delta.len().div_ceil(8)];
        for (j, d) in self.delta.iter().enumerate() {
            if *d {
                bytes[j / 8] |= 1 << (j % 8);
            }
        }
        bytes
    }
}

fn active(delta: &[bool]) -> Vec<usize> {
    delta.iter().enumerate().filter(|(_, d)| **d).map(|(j, _)| j).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub model_cap: usize,
    /// Defaults to the empty model (plus any marker whose inclusion
    /// probability is one).
    pub start: Option<Vec<bool>>,
}

impl SelectionConfig {
    pub fn new(iterations: usize, burn_in: usize, seed: u64) -> Self {
        Self { iterations, burn_in, thin: 1, seed, model_cap: DEFAULT_MODEL_CAP, start: None }
    }

    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.iterations {
            return Err(Error::invalid("burn-in must be smaller than the iteration count"));
        }
        if self.thin == 0 {
            return Err(Error::invalid("thinning interval must be at least one"));
        }
        if self.model_cap == 0 {
            return Err(Error::invalid("model cap must be at least one"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionChain {
    pub states: Vec<ModelState>,
    /// Whether the move into each kept state was accepted.
    pub accepted: Vec<bool>,
    /// Accepted moves over all iterations.
    pub acceptance_rate: f64,
    /// Proposals dropped because the conditional mode search or its
    /// Hessian failed.
    pub failed_proposals: usize,
    pub seed: u64,
}

/// Gaussian independence proposal for one model's active coefficients.
#[derive(Debug, Clone)]
struct Proposal {
    mean: DVector<f64>,
    /// Cholesky factor of the precision (the Hessian at the mode).
    precision_factor: DMatrix<f64>,
    /// `-k/2 log(2 pi) + sum log diag(factor)`.
    log_norm: f64,
}

impl Proposal {
    fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let k = self.mean.len();
        let z = DVector::from_iterator(k, (0..k).map(|_| StandardNormal.sample(&mut *rng)));
        let offset = self.precision_factor.transpose().solve_upper_triangular(&z).expect("factor has a positive diagonal");
        (&self.mean + offset).iter().copied().collect()
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        let d = DVector::from_column_slice(x) - &self.mean;
        let y = self.precision_factor.transpose() * d;
        self.log_norm - 0.5 * y.norm_squared()
    }
}

struct Sampler<'a> {
    loss: &'a CoxLoss,
    prior: &'a LogPrior,
    slab_variances: &'a [f64],
    p: usize,
    /// Conditional proposals by active set; `None` records a failed search.
    cache: BTreeMap<Vec<usize>, Option<Proposal>>,
}

impl Sampler<'_> {
    /// `-l(beta) + log pi(beta | delta) + log pi(delta)`.
    fn log_target(&self, delta: &[bool], beta: &[f64]) -> Result<f64> {
        let mut theta = Vec::with_capacity(2 * self.p);
        theta.extend(delta.iter().map(|d| if *d { 1.0 } else { 0.0 }));
        theta.extend_from_slice(beta);
        let log_prior = self.prior.log_density(&theta)?;
        if log_prior == f64::NEG_INFINITY {
            return Ok(log_prior);
        }
        let cols = active(delta);
        let coefs: Vec<f64> = cols.iter().map(|&j| beta[j]).collect();
        let loss = self.loss.restricted(&cols)?.eval(&coefs)?;
        Ok(log_prior - loss)
    }

    fn proposal(&mut self, cols: &[usize], hint: &[f64]) -> Result<Option<Proposal>> {
        if let Some(cached) = self.cache.get(cols) {
            return Ok(cached.clone());
        }
        let built = self.build_proposal(cols, hint)?;
        self.cache.insert(cols.to_vec(), built.clone());
        Ok(built)
    }

    fn build_proposal(&self, cols: &[usize], hint: &[f64]) -> Result<Option<Proposal>> {
        let k = cols.len();
        if k == 0 {
            return Ok(Some(Proposal { mean: DVector::zeros(0), precision_factor: DMatrix::zeros(0, 0), log_norm: 0.0 }));
        }
        let restricted = self.loss.restricted(cols)?;
        let variances: Vec<f64> = cols.iter().map(|&j| self.slab_variances[j]).collect();
        let neg = |b: &[f64]| match restricted.eval(b) {
            Ok(l) => l + b.iter().zip(&variances).map(|(x, v)| 0.5 * x * x / v).sum::<f64>(),
            Err(_) => f64::INFINITY,
        };
        let opts = NelderMeadOptions { tolerance: 1e-10, max_evals: 4_000 * k, ..Default::default() };
        let Ok(mut fit) = nelder_mead(neg, hint, &opts) else {
            return Ok(None);
        };
        if k > DIRECT_SEARCH_LIMIT {
            for _ in 0..MAX_RESTARTS {
                let steps = fit.point.iter().map(|x| 0.1 * x.abs().max(0.1)).collect();
                let Ok(next) = nelder_mead(neg, &fit.point, &NelderMeadOptions { initial_steps: Some(steps), ..opts.clone() }) else {
                    return Ok(None);
                };
                let improved = fit.value - next.value > opts.tolerance;
                if next.value < fit.value {
                    fit = next;
                }
                if !improved {
                    break;
                }
            }
        }
        let Ok(hessian) = hessian_fd(neg, &fit.point, None) else {
            return Ok(None);
        };
        let Some(chol) = hessian.cholesky() else {
            return Ok(None);
        };
        let factor = chol.l();
        let log_norm = -0.5 * k as f64 * LN_2PI + factor.diagonal().iter().map(|d| log(*d)).sum::<f64>();
        Ok(Some(Proposal { mean: DVector::from_vec(fit.point), precision_factor: factor, log_norm }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Move {
    Add,
    Remove,
    Swap,
}

fn admissible(size: usize, p: usize, cap: usize) -> Vec<Move> {
    let mut moves = Vec::with_capacity(3);
    if size < p && size < cap {
        moves.push(Move::Add);
    }
    if size > 0 {
        moves.push(Move::Remove);
    }
    if size > 0 && size < p {
        moves.push(Move::Swap);
    }
    moves
}

/// Log probability of choosing the specific indicator change of a move of
/// type `mv` from a model of `size` active markers.
fn log_move_prob(mv: Move, size: usize, p: usize, cap: usize) -> f64 {
    let types = admissible(size, p, cap).len() as f64;
    let choices = match mv {
        Move::Add => (p - size) as f64,
        Move::Remove => size as f64,
        Move::Swap => (size * (p - size)) as f64,
    };
    -log(types) - log(choices)
}

/// Spike-and-slab variable selection under the Cox partial loss.
///
/// Every iteration picks an admissible move type (add, remove, swap)
/// uniformly, then the affected marker(s) uniformly, and draws all active
/// coefficients from a Gaussian centred on the proposed model's conditional
/// mode with the inverse Hessian as covariance. `prior` must be the
/// spike-and-slab prior over the loss's columns.
pub fn variable_selection_mcmc(loss: &CoxLoss, prior: &LogPrior, config: &SelectionConfig) -> Result<SelectionChain> {
    config.validate()?;
    let LogPrior::SpikeSlab { slab_variances, inclusion_probs } = prior else {
        return Err(Error::invalid("variable selection needs a spike-and-slab prior"));
    };
    let p = slab_variances.len();
    if loss.dim() != p {
        return Err(Error::DimensionMismatch { expected: loss.dim(), found: p });
    }
    let mut sampler = Sampler { loss, prior, slab_variances, p, cache: BTreeMap::new() };

    let start_delta = match &config.start {
        Some(d) if d.len() != p => return Err(Error::DimensionMismatch { expected: p, found: d.len() }),
        Some(d) => d.clone(),
        None => inclusion_probs.iter().map(|a| *a == 1.0).collect(),
    };
    let size = start_delta.iter().filter(|d| **d).count();
    if size > config.model_cap {
        return Err(Error::ModelTooLarge { size, cap: config.model_cap });
    }
    let cols = active(&start_delta);
    let mut beta = vec![0.0; p];
    match sampler.proposal(&cols, &vec![0.0; cols.len()])? {
        Some(prop) => cols.iter().zip(prop.mean.iter()).for_each(|(&j, m)| beta[j] = *m),
        None => return Err(Error::NoValidStart { attempts: 1 }),
    }
    let mut state = ModelState::new(start_delta, beta)?;
    let mut current = sampler.log_target(&state.delta, &state.beta)?;
    if current == f64::NEG_INFINITY {
        return Err(Error::NoValidStart { attempts: 1 });
    }

    let mut rng = seeded(config.seed);
    let kept = (config.iterations - config.burn_in) / config.thin;
    let mut states = Vec::with_capacity(kept);
    let mut accepted_trace = Vec::with_capacity(kept);
    let mut accepted = 0usize;
    let mut failed = 0usize;

    for iter in 0..config.iterations {
        let size = state.size();
        let moves = admissible(size, p, config.model_cap);
        let mv = moves[rng.random_range(0..moves.len())];
        let inside = state.active();
        let outside: Vec<usize> = (0..p).filter(|j| !state.delta[*j]).collect();
        let mut delta = state.delta.clone();
        match mv {
            Move::Add => delta[outside[rng.random_range(0..outside.len())]] = true,
            Move::Remove => delta[inside[rng.random_range(0..inside.len())]] = false,
            Move::Swap => {
                delta[inside[rng.random_range(0..inside.len())]] = false;
                delta[outside[rng.random_range(0..outside.len())]] = true;
            }
        }
        let reverse = match mv {
            Move::Add => Move::Remove,
            Move::Remove => Move::Add,
            Move::Swap => Move::Swap,
        };
        let new_cols = active(&delta);
        let new_size = new_cols.len();
        let hint: Vec<f64> = new_cols.iter().map(|&j| state.beta[j]).collect();
        let forward = sampler.proposal(&new_cols, &hint)?;
        let backward = sampler.proposal(&inside, &inside.iter().map(|&j| state.beta[j]).collect::<Vec<_>>())?;

        let mut accept = false;
        if let (Some(forward), Some(backward)) = (forward, backward) {
            let draw = forward.sample(&mut rng);
            let mut beta = vec![0.0; p];
            new_cols.iter().zip(&draw).for_each(|(&j, b)| beta[j] = *b);
            let u: f64 = rng.random();
            let proposed = sampler.log_target(&delta, &beta)?;
            if proposed > f64::NEG_INFINITY {
                let old_coefs: Vec<f64> = inside.iter().map(|&j| state.beta[j]).collect();
                let log_ratio = proposed - current + backward.log_density(&old_coefs) - forward.log_density(&draw)
                    + log_move_prob(reverse, new_size, p, config.model_cap)
                    - log_move_prob(mv, size, p, config.model_cap);
                if log(u) < log_ratio {
                    state = ModelState { delta, beta };
                    current = proposed;
                    accept = true;
                    accepted += 1;
                }
            }
        } else {
            failed += 1;
        }
        if iter >= config.burn_in && (iter - config.burn_in + 1) % config.thin == 0 {
            states.push(state.clone());
            accepted_trace.push(accept);
        }
    }

    Ok(SelectionChain {
        states,
        accepted: accepted_trace,
        acceptance_rate: accepted as f64 / config.iterations as f64,
        failed_proposals: failed,
        seed: config.seed,
    })
}

/// Fraction of kept states including each marker.
pub fn inclusion_probabilities(chain: &SelectionChain) -> Result<Vec<f64>> {
    let Some(first) = chain.states.first() else {
        return Err(Error::TooFewDraws { needed: 1, found: 0 });
    };
    let mut counts = vec![0usize; first.delta.len()];
    for s in &chain.states {
        for (c, d) in counts.iter_mut().zip(&s.delta) {
            *c += usize::from(*d);
        }
    }
    let n = chain.states.len() as f64;
    Ok(counts.into_iter().map(|c| c as f64 / n).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(states: Vec<ModelState>) -> SelectionChain {
        let n = states.len();
        SelectionChain { states, accepted: vec![true; n], acceptance_rate: 1.0, failed_proposals: 0, seed: 0 }
    }

    #[test]
    fn inclusion_examples() {
        let fixed = ModelState::new(vec![true, false], vec![0.5, 0.0]).unwrap();
        assert_eq!(inclusion_probabilities(&chain(vec![fixed; 10])).unwrap(), vec![1.0, 0.0]);
        let a = ModelState::new(vec![true, false], vec![0.5, 0.0]).unwrap();
        let b = ModelState::new(vec![false, true], vec![0.0, -0.5]).unwrap();
        let alternating = (0..10).map(|i| if i % 2 == 0 { a.clone() } else { b.clone() }).collect();
        assert_eq!(inclusion_probabilities(&chain(alternating)).unwrap(), vec![0.5, 0.5]);
        assert!(inclusion_probabilities(&chain(vec![])).is_err());
    }

    #[test]
    fn state_invariant() {
        assert!(ModelState::new(vec![false], vec![0.1]).is_err());
        let s = ModelState::new(
            vec![true, false, false, false, false, false, false, false, true],
            vec![1.0; 1].into_iter().chain([0.0; 7]).chain([2.0]).collect(),
        )
        .unwrap();
        assert_eq!(s.delta_bytes(), vec![0x01, 0x01]);
    }

    #[test]
    fn move_probabilities_are_normalized() {
        for (p, cap) in [(5usize, 20usize), (5, 2), (1, 20)] {
            for size in 0..=p.min(cap) {
                let total: f64 = admissible(size, p, cap)
                    .iter()
                    .map(|&mv| {
                        let choices = match mv {
                            Move::Add => p - size,
                            Move::Remove => size,
                            Move::Swap => size * (p - size),
                        };
                        choices as f64 * libm::exp(log_move_prob(mv, size, p, cap))
                    })
                    .sum();
                assert!((total - 1.0).abs() < 1e-12, "p={p} size={size}");
            }
        }
    }
}
