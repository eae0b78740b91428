use alloc::vec::Vec;

use libm::exp;
use rand::Rng;
use rand_distr::{Distribution, Exp1};

use super::data::SurvivalDataset;
use crate::rng::seeded;
use crate::{Error, Result};

const BISECTION_STEPS: usize = 200;

/// Settings for synthetic genotype and survival data.
///
/// Genotypes are `Binomial(2, maf_j)` counts, event times are exponential
/// with rate `baseline_hazard * exp(x . beta)`, and independent exponential
/// censoring is tuned so the expected censored fraction, given the drawn
/// genotypes, equals `censoring`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoxSimulation {
    pub n: usize,
    pub beta: Vec<f64>,
    pub baseline_hazard: f64,
    /// Target censored fraction in `[0, 1)`; zero disables censoring.
    pub censoring: f64,
    pub minor_allele_freqs: Vec<f64>,
    pub seed: u64,
}

impl CoxSimulation {
    pub fn p(&self) -> usize {
        self.beta.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.beta.is_empty() {
            return Err(Error::invalid("need at least one subject and one marker"));
        }
        if self.minor_allele_freqs.len() != self.beta.len() {
            return Err(Error::DimensionMismatch { expected: self.beta.len(), found: self.minor_allele_freqs.len() });
        }
        if self.minor_allele_freqs.iter().any(|f| !(*f > 0.0 && *f <= 0.5)) {
            return Err(Error::invalid("minor allele frequencies must lie in (0, 0.5]"));
        }
        if self.beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::invalid("effects must be finite"));
        }
        if !(self.baseline_hazard > 0.0 && self.baseline_hazard.is_finite()) {
            return Err(Error::invalid("baseline hazard must be finite and positive"));
        }
        if !(0.0..1.0).contains(&self.censoring) {
            return Err(Error::UnattainableCensoring(self.censoring));
        }
        Ok(())
    }
}

/// Draws a dataset; identical settings give identical data.
pub fn simulate_cox_data(sim: &CoxSimulation) -> Result<SurvivalDataset> {
    sim.validate()?;
    let (n, p) = (sim.n, sim.p());
    let mut rng = seeded(sim.seed);
    let mut x = Vec::with_capacity(n * p);
    for _ in 0..n {
        for maf in &sim.minor_allele_freqs {
            let copies = usize::from(rng.random::<f64>() < *maf) + usize::from(rng.random::<f64>() < *maf);
            x.push(copies as f64);
        }
    }
    let rates: Vec<f64> =
        (0..n).map(|i| sim.baseline_hazard * exp(x[i * p..(i + 1) * p].iter().zip(&sim.beta).map(|(a, b)| a * b).sum::<f64>())).collect();
    if rates.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
        return Err(Error::invalid("hazard overflows for these effects"));
    }
    let censor_rate = censoring_rate(&rates, sim.censoring)?;

    let mut times = Vec::with_capacity(n);
    let mut events = Vec::with_capacity(n);
    for rate in &rates {
        let e: f64 = Exp1.sample(&mut rng);
        let event_time = e / rate;
        let c: f64 = Exp1.sample(&mut rng);
        let censor_time = if censor_rate > 0.0 { c / censor_rate } else { f64::INFINITY };
        if event_time <= censor_time {
            times.push(event_time);
            events.push(true);
        } else {
            times.push(censor_time);
            events.push(false);
        }
    }
    // Exp1 can return exactly zero; keep times strictly positive.
    for t in &mut times {
        if *t <= 0.0 {
            *t = f64::MIN_POSITIVE;
        }
    }
    SurvivalDataset::from_row_major(times, events, x, p)
}

/// Censoring rate `mu` with `mean_i mu / (mu + rate_i) = target`.
fn censoring_rate(rates: &[f64], target: f64) -> Result<f64> {
    if target == 0.0 {
        return Ok(0.0);
    }
    let fraction = |mu: f64| rates.iter().map(|r| mu / (mu + r)).sum::<f64>() / rates.len() as f64;
    let (mut lo, mut hi) = (0.0, rates.iter().copied().fold(0.0, f64::max));
    while fraction(hi) < target {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::UnattainableCensoring(target));
        }
    }
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if fraction(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn sim(censoring: f64, seed: u64) -> CoxSimulation {
        CoxSimulation { n: 2_000, beta: vec![0.5, 0.0], baseline_hazard: 0.1, censoring, minor_allele_freqs: vec![0.3, 0.1], seed }
    }

    #[test]
    fn no_censoring_target() {
        let d = simulate_cox_data(&sim(0.0, 1)).unwrap();
        assert!(d.events().iter().all(|e| *e));
    }

    #[test]
    fn censoring_fraction_is_close_to_target() {
        for target in [0.2, 0.5, 0.8] {
            let d = simulate_cox_data(&sim(target, 2)).unwrap();
            let frac = 1.0 - d.n_events() as f64 / d.n() as f64;
            assert!((frac - target).abs() < 0.05, "{target} -> {frac}");
        }
    }

    #[test]
    fn deterministic_and_genotype_valued() {
        let a = simulate_cox_data(&sim(0.3, 7)).unwrap();
        assert_eq!(a, simulate_cox_data(&sim(0.3, 7)).unwrap());
        assert_ne!(a, simulate_cox_data(&sim(0.3, 8)).unwrap());
        assert!((0..a.n()).all(|i| a.row(i).iter().all(|g| [0.0, 1.0, 2.0].contains(g))));
        let freq = a.column(0).iter().sum::<f64>() / (2.0 * a.n() as f64);
        assert!((freq - 0.3).abs() < 0.03);
    }

    #[test]
    fn rejects_bad_settings() {
        assert!(matches!(simulate_cox_data(&sim(1.0, 0)), Err(Error::UnattainableCensoring(_))));
        let mut s = sim(0.0, 0);
        s.minor_allele_freqs = vec![0.6, 0.1];
        assert!(s.validate().is_err());
    }
}
