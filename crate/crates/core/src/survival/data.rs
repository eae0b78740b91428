use alloc::vec::Vec;

use crate::{Error, Result};

/// Right-censored survival records with an `n x p` covariate matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalDataset {
    times: Vec<f64>,
    events: Vec<bool>,
    /// Row-major, `n * p` entries.
    covariates: Vec<f64>,
    p: usize,
}

impl SurvivalDataset {
    /// `rows[i]` holds the covariates of subject `i`.
    pub fn new(times: Vec<f64>, events: Vec<bool>, rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::invalid("every covariate row needs the same length"));
        }
        Self::from_row_major(times, events, rows.concat(), p)
    }

    pub fn from_row_major(times: Vec<f64>, events: Vec<bool>, covariates: Vec<f64>, p: usize) -> Result<Self> {
        let n = times.len();
        if n == 0 || events.len() != n {
            return Err(Error::invalid("need one event flag per survival time"));
        }
        if p == 0 {
            return Err(Error::invalid("need at least one covariate column"));
        }
        if covariates.len() != n * p {
            return Err(Error::DimensionMismatch { expected: n * p, found: covariates.len() });
        }
        if times.iter().any(|t| !t.is_finite()) || covariates.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteDatum);
        }
        if times.iter().any(|t| *t <= 0.0) {
            return Err(Error::invalid("survival times must be positive"));
        }
        if !events.iter().any(|e| *e) {
            return Err(Error::NoEvents);
        }
        Ok(Self { times, events, covariates, p })
    }

    pub fn n(&self) -> usize {
        self.times.len()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn events(&self) -> &[bool] {
        &self.events
    }

    pub fn n_events(&self) -> usize {
        self.events.iter().filter(|e| **e).count()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.covariates[i * self.p..(i + 1) * self.p]
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.covariates[i * self.p + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n()).map(|i| self.value(i, j)).collect()
    }

    pub fn is_constant_column(&self, j: usize) -> bool {
        let first = self.value(0, j);
        (1..self.n()).all(|i| self.value(i, j) == first)
    }

    /// Copy keeping only the listed columns, in the given order.
    pub fn select_columns(&self, columns: &[usize]) -> Result<Self> {
        if let Some(&bad) = columns.iter().find(|&&j| j >= self.p) {
            return Err(Error::DimensionMismatch { expected: self.p, found: bad + 1 });
        }
        let covariates = (0..self.n()).flat_map(|i| columns.iter().map(move |&j| self.value(i, j))).collect();
        Self::from_row_major(self.times.clone(), self.events.clone(), covariates, columns.len())
    }
}

/// Risk sets `R_i = {j : t_j >= t_i}` for every event `i`.
///
/// Subjects are sorted by decreasing time once; each risk set is a prefix of
/// that order, extended over ties so tied subjects share a risk set.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskIndex {
    order: Vec<usize>,
    /// `(subject, prefix length)` per event, in decreasing time order.
    events: Vec<(usize, usize)>,
}

impl RiskIndex {
    pub fn build(data: &SurvivalDataset) -> Self {
        let times = data.times();
        let mut order: Vec<usize> = (0..data.n()).collect();
        // Stable sort keeps subject order within ties, so results are reproducible.
        order.sort_by(|&a, &b| times[b].total_cmp(&times[a]));
        let mut events = Vec::with_capacity(data.n_events());
        let mut start = 0;
        while start < order.len() {
            let t = times[order[start]];
            let mut end = start;
            while end < order.len() && times[order[end]] == t {
                end += 1;
            }
            for &subject in &order[start..end] {
                if data.events()[subject] {
                    events.push((subject, end));
                }
            }
            start = end;
        }
        Self { order, events }
    }

    /// Subjects by decreasing time.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// `(subject, prefix length)` per event; the risk set is
    /// `order()[..prefix length]`.
    pub fn events(&self) -> &[(usize, usize)] {
        &self.events
    }

    /// Members of the risk set of the `k`-th event, by decreasing time.
    pub fn risk_set(&self, k: usize) -> &[usize] {
        &self.order[..self.events[k].1]
    }

    /// The risk set of `subject`, if it had an event.
    pub fn risk_set_of(&self, subject: usize) -> Option<&[usize]> {
        let k = self.events.iter().position(|(s, _)| *s == subject)?;
        Some(self.risk_set(k))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn dataset(times: Vec<f64>, events: Vec<bool>) -> SurvivalDataset {
        let n = times.len();
        SurvivalDataset::from_row_major(times, events, vec![0.0; n], 1).unwrap()
    }

    fn sorted(xs: &[usize]) -> Vec<usize> {
        let mut v = xs.to_vec();
        v.sort();
        v
    }

    #[test]
    fn distinct_times() {
        let idx = RiskIndex::build(&dataset(vec![1.0, 2.0, 3.0], vec![true; 3]));
        assert_eq!(sorted(idx.risk_set_of(0).unwrap()), vec![0, 1, 2]);
        assert_eq!(sorted(idx.risk_set_of(1).unwrap()), vec![1, 2]);
        assert_eq!(sorted(idx.risk_set_of(2).unwrap()), vec![2]);
    }

    #[test]
    fn censored_subject_stays_in_risk_sets() {
        let idx = RiskIndex::build(&dataset(vec![1.0, 2.0, 3.0], vec![true, false, true]));
        assert_eq!(idx.events().len(), 2);
        assert!(idx.risk_set_of(1).is_none());
        assert_eq!(sorted(idx.risk_set_of(0).unwrap()), vec![0, 1, 2]);
    }

    #[test]
    fn ties_share_risk_sets() {
        let idx = RiskIndex::build(&dataset(vec![1.0, 1.0], vec![true, true]));
        assert_eq!(sorted(idx.risk_set_of(0).unwrap()), vec![0, 1]);
        assert_eq!(sorted(idx.risk_set_of(1).unwrap()), vec![0, 1]);
    }

    #[test]
    fn invariants_checked() {
        assert!(matches!(SurvivalDataset::from_row_major(vec![1.0], vec![false], vec![0.0], 1), Err(Error::NoEvents)));
        assert!(SurvivalDataset::from_row_major(vec![0.0], vec![true], vec![0.0], 1).is_err());
        assert!(SurvivalDataset::from_row_major(vec![1.0], vec![true], vec![f64::NAN], 1).is_err());
        assert!(SurvivalDataset::from_row_major(vec![1.0], vec![true], vec![], 0).is_err());
    }

    #[test]
    fn column_selection() {
        let d = SurvivalDataset::new(vec![1.0, 2.0], vec![true, true], &[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        let s = d.select_columns(&[2, 0]).unwrap();
        assert_eq!(s.row(1), &[6.0, 4.0]);
        assert!(!d.is_constant_column(0));
    }
}
