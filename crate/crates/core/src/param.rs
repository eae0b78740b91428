use alloc::vec::Vec;
use core::fmt;
use core::ops::Deref;

use crate::{Error, Result};

/// Support restriction carried by a [`ParamPoint`].
#[derive(Clone, Copy)]
pub enum Constraint {
    None,
    /// `values[k] < values[k + 1]` for every `k`.
    StrictlyIncreasing,
    /// Membership test supplied by the caller.
    Custom(fn(&[f64]) -> bool),
}

impl Constraint {
    pub fn admits(&self, values: &[f64]) -> bool {
        match self {
            Constraint::None => true,
            Constraint::StrictlyIncreasing => values.windows(2).all(|w| w[0] < w[1]),
            Constraint::Custom(f) => f(values),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Constraint::None => "none",
            Constraint::StrictlyIncreasing => "strictly-increasing",
            Constraint::Custom(_) => "custom",
        }
    }
}

impl fmt::Debug for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl PartialEq for Constraint {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Constraint::None, Constraint::None) => true,
            (Constraint::StrictlyIncreasing, Constraint::StrictlyIncreasing) => true,
            (Constraint::Custom(a), Constraint::Custom(b)) => core::ptr::fn_addr_eq(*a, *b),
            _ => false,
        }
    }
}

/// A point in parameter space that is known to satisfy its constraint.
///
/// Dereferences to the coordinate slice, so it can be passed wherever a
/// `&[f64]` is expected.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamPoint {
    values: Vec<f64>,
    constraint: Constraint,
}

impl ParamPoint {
    pub fn new(values: Vec<f64>, constraint: Constraint) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("parameter point must have at least one coordinate"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("parameter coordinates must be finite"));
        }
        if !constraint.admits(&values) {
            return Err(Error::ConstraintViolated { values, constraint: constraint.name() });
        }
        Ok(Self { values, constraint })
    }

    /// Unconstrained point.
    pub fn free(values: Vec<f64>) -> Result<Self> {
        Self::new(values, Constraint::None)
    }

    pub fn scalar(value: f64) -> Result<Self> {
        Self::new(alloc::vec![value], Constraint::None)
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn constraint(&self) -> Constraint {
        self.constraint
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

impl Deref for ParamPoint {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.values
    }
}

impl AsRef<[f64]> for ParamPoint {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn ordering_is_enforced_at_construction() {
        assert!(ParamPoint::new(vec![1.0, 2.0, 3.0], Constraint::StrictlyIncreasing).is_ok());
        assert!(matches!(ParamPoint::new(vec![1.0, 1.0, 3.0], Constraint::StrictlyIncreasing), Err(Error::ConstraintViolated { .. })));
        assert!(ParamPoint::new(vec![], Constraint::None).is_err());
        assert!(ParamPoint::new(vec![f64::NAN], Constraint::None).is_err());
    }

    #[test]
    fn custom_indicator() {
        fn positive(v: &[f64]) -> bool {
            v.iter().all(|x| *x > 0.0)
        }
        assert!(ParamPoint::new(vec![0.5], Constraint::Custom(positive)).is_ok());
        assert!(ParamPoint::new(vec![-0.5], Constraint::Custom(positive)).is_err());
    }
}
