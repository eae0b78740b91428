//! Losses that stand in for the negative log-likelihood.
//!
//! A [`PointLoss`] scores one parameter value against one [`Datum`]; a
//! [`DatasetLoss`] is the cumulative loss over a whole sample, either as a sum
//! of point losses or as an opaque whole-sample evaluator such as the Cox
//! partial loss. The calibration weight `w` is never applied here; it belongs
//! to the posterior.

use alloc::boxed::Box;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use libm::{exp, log};

use crate::engines::optim::{nelder_mead, NelderMeadOptions};
use crate::math::{normal_log_pdf, positive_part, LN_2PI};
use crate::{Error, Result};

/// One observation.
#[derive(Debug, Clone, PartialEq)]
pub enum Datum {
    Scalar(f64),
    /// Response `x` with covariates `z`.
    Regression {
        response: f64,
        covariates: Vec<f64>,
    },
    /// Right-censored survival record.
    Survival {
        time: f64,
        event: bool,
        covariates: Vec<f64>,
    },
    /// Repeated responses of one cluster, one covariate row per response.
    Cluster {
        responses: Vec<f64>,
        covariates: Vec<Vec<f64>>,
    },
}

impl Datum {
    pub fn kind(&self) -> &'static str {
        match self {
            Datum::Scalar(_) => "scalar",
            Datum::Regression { .. } => "regression",
            Datum::Survival { .. } => "survival",
            Datum::Cluster { .. } => "cluster",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        let ok = match self {
            Datum::Scalar(x) => x.is_finite(),
            Datum::Regression { response, covariates } => response.is_finite() && finite(covariates),
            Datum::Survival { time, covariates, .. } => {
                if time.is_finite() && *time <= 0.0 {
                    return Err(Error::invalid("survival time must be positive"));
                }
                time.is_finite() && finite(covariates)
            }
            Datum::Cluster { responses, covariates } => {
                if responses.len() != covariates.len() || responses.is_empty() {
                    return Err(Error::invalid("cluster needs one covariate row per response"));
                }
                finite(responses) && covariates.iter().all(|row| finite(row))
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::NonFiniteDatum)
        }
    }
}

/// Conditional density `f(x | theta)` used by the self-information loss.
#[derive(Clone, Copy)]
pub enum DensityModel {
    /// `x ~ N(theta, sd^2)`, scalar data.
    NormalLocation { sd: f64 },
    /// `x ~ N(theta[0], theta[1]^2)`, scalar data; `theta[1] > 0`.
    NormalLocationScale,
    /// `x ~ N(z . theta, sd^2)`, regression data.
    NormalRegression { sd: f64 },
    /// `x ~ Exp(theta)`, scalar data; `theta > 0`.
    Exponential,
    /// Caller-supplied log density of dimension `dim`.
    Custom { dim: usize, log_density: fn(&[f64], &Datum) -> f64 },
}

impl fmt::Debug for DensityModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DensityModel::NormalLocation { sd } => write!(f, "NormalLocation {{ sd: {sd} }}"),
            DensityModel::NormalLocationScale => f.write_str("NormalLocationScale"),
            DensityModel::NormalRegression { sd } => write!(f, "NormalRegression {{ sd: {sd} }}"),
            DensityModel::Exponential => f.write_str("Exponential"),
            DensityModel::Custom { dim, .. } => write!(f, "Custom {{ dim: {dim} }}"),
        }
    }
}

impl PartialEq for DensityModel {
    fn eq(&self, other: &Self) -> bool {
        use DensityModel::*;
        match (self, other) {
            (NormalLocation { sd: a }, NormalLocation { sd: b }) => a == b,
            (NormalLocationScale, NormalLocationScale) | (Exponential, Exponential) => true,
            (NormalRegression { sd: a }, NormalRegression { sd: b }) => a == b,
            (Custom { dim: a, log_density: f }, Custom { dim: b, log_density: g }) => a == b && core::ptr::fn_addr_eq(*f, *g),
            _ => false,
        }
    }
}

impl DensityModel {
    /// Parameter dimension, when it does not depend on the datum.
    pub fn dim(&self) -> Option<usize> {
        match self {
            DensityModel::NormalLocation { .. } | DensityModel::Exponential => Some(1),
            DensityModel::NormalLocationScale => Some(2),
            DensityModel::NormalRegression { .. } => None,
            DensityModel::Custom { dim, .. } => Some(*dim),
        }
    }

    /// `log f(x | theta)`; `-inf` where the density is zero.
    pub fn log_density(&self, theta: &[f64], datum: &Datum) -> Result<f64> {
        let mismatch = || Error::ShapeMismatch { loss: "neg-log-density", datum: datum.kind() };
        match (self, datum) {
            (DensityModel::NormalLocation { sd }, Datum::Scalar(x)) => {
                expect_dim(theta, 1)?;
                Ok(normal_log_pdf(*x, theta[0], sd * sd))
            }
            (DensityModel::NormalLocationScale, Datum::Scalar(x)) => {
                expect_dim(theta, 2)?;
                let sigma = theta[1];
                if sigma <= 0.0 {
                    return Ok(f64::NEG_INFINITY);
                }
                Ok(normal_log_pdf(*x, theta[0], sigma * sigma))
            }
            (DensityModel::NormalRegression { sd }, Datum::Regression { response, covariates }) => {
                expect_dim(theta, covariates.len())?;
                Ok(normal_log_pdf(*response, dot(covariates, theta), sd * sd))
            }
            (DensityModel::Exponential, Datum::Scalar(x)) => {
                expect_dim(theta, 1)?;
                let rate = theta[0];
                if rate <= 0.0 || *x < 0.0 {
                    return Ok(f64::NEG_INFINITY);
                }
                Ok(log(rate) - rate * x)
            }
            (DensityModel::Custom { dim, log_density }, d) => {
                expect_dim(theta, *dim)?;
                Ok(log_density(theta, d))
            }
            _ => Err(mismatch()),
        }
    }
}

/// Mean link for the GEE loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Link {
    Identity,
    Log,
}

/// Variance function `v(mu)` for the GEE loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarianceFunction {
    Constant,
    Mu,
    MuSquared,
}

/// Working correlation of responses within a cluster.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WorkingCorrelation {
    Independence,
    Exchangeable,
}

/// Generalized-estimating-equation quadratic form
/// `rho = 1/2 (x - mu)' V^-1 (x - mu)` with `V = phi A^1/2 R(alpha) A^1/2`.
///
/// `theta` is laid out as `(beta..., phi)` for independence and
/// `(beta..., phi, alpha)` for exchangeable correlation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GeeLoss {
    pub link: Link,
    pub variance: VarianceFunction,
    pub correlation: WorkingCorrelation,
}

impl GeeLoss {
    fn extra_params(&self) -> usize {
        match self.correlation {
            WorkingCorrelation::Independence => 1,
            WorkingCorrelation::Exchangeable => 2,
        }
    }

    fn eval(&self, theta: &[f64], responses: &[f64], covariates: &[Vec<f64>]) -> Result<f64> {
        let q = covariates[0].len();
        expect_dim(theta, q + self.extra_params())?;
        let (beta, rest) = theta.split_at(q);
        let phi = rest[0];
        if phi <= 0.0 {
            return Ok(f64::INFINITY);
        }
        let m = responses.len();
        let mut scaled = Vec::with_capacity(m);
        for (x, z) in responses.iter().zip(covariates) {
            if z.len() != q {
                return Err(Error::DimensionMismatch { expected: q, found: z.len() });
            }
            let eta = dot(z, beta);
            let mu = match self.link {
                Link::Identity => eta,
                Link::Log => exp(eta),
            };
            let v = match self.variance {
                VarianceFunction::Constant => 1.0,
                VarianceFunction::Mu => mu,
                VarianceFunction::MuSquared => mu * mu,
            };
            if !(v > 0.0) || !v.is_finite() {
                return Ok(f64::INFINITY);
            }
            scaled.push((x - mu) / libm::sqrt(v));
        }
        let ss: f64 = scaled.iter().map(|s| s * s).sum();
        let quad = match self.correlation {
            WorkingCorrelation::Independence => ss,
            WorkingCorrelation::Exchangeable => {
                let alpha = rest[1];
                let mf = m as f64;
                if !(alpha < 1.0) || !(1.0 + (mf - 1.0) * alpha > 0.0) {
                    return Ok(f64::INFINITY);
                }
                // Sherman-Morrison inverse of (1 - alpha) I + alpha 11'.
                let total: f64 = scaled.iter().sum();
                (ss - alpha * total * total / (1.0 + (mf - 1.0) * alpha)) / (1.0 - alpha)
            }
        };
        Ok(0.5 * quad / phi)
    }
}

/// Loss for a single `(theta, datum)` pair.
///
/// Residual-based losses (`Squared`, `Absolute`, `Pinball`, `Huber`) use
/// `u = x - theta` for scalar data and `u = x - z . theta` for regression data.
#[derive(Debug, Clone, PartialEq)]
#[allow(unpredictable_function_pointer_comparisons)]
pub enum PointLoss {
    Squared,
    Absolute,
    /// Check loss `tau * u+ + (1 - tau) * (-u)+`, minimized at the tau-quantile.
    Pinball {
        tau: f64,
    },
    /// Joint lower quartile, median and upper quartile on scalar data,
    /// `theta = (q1, q2, q3)`.
    QuartileTriple,
    Huber {
        k: f64,
    },
    Gee(GeeLoss),
    /// Self-information loss `-log f(x | theta)`.
    NegLogDensity(DensityModel),
    /// `factor * inner`.
    Scaled {
        factor: f64,
        inner: Box<PointLoss>,
    },
    /// `inner(theta, x) - inner(theta_x, x)` where `theta_x` minimizes the
    /// inner loss for that datum; found numerically unless a minimizer is given.
    Standardized {
        inner: Box<PointLoss>,
        minimizer: Option<fn(&Datum) -> Vec<f64>>,
    },
}

impl PointLoss {
    pub fn pinball(tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::invalid("pinball tau must lie in (0, 1)"));
        }
        Ok(PointLoss::Pinball { tau })
    }

    pub fn huber(k: f64) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::invalid("huber k must be positive"));
        }
        Ok(PointLoss::Huber { k })
    }

    pub fn scaled(self, factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::invalid("loss scale factor must be positive"));
        }
        Ok(PointLoss::Scaled { factor, inner: Box::new(self) })
    }

    pub fn name(&self) -> &'static str {
        match self {
            PointLoss::Squared => "squared",
            PointLoss::Absolute => "absolute",
            PointLoss::Pinball { .. } => "pinball",
            PointLoss::QuartileTriple => "quartile-triple",
            PointLoss::Huber { .. } => "huber",
            PointLoss::Gee(_) => "gee-quadratic",
            PointLoss::NegLogDensity(_) => "neg-log-density",
            PointLoss::Scaled { .. } => "scaled",
            PointLoss::Standardized { .. } => "standardized",
        }
    }

    /// `l(theta, d)`. May be `+inf` where a model density vanishes, never NaN.
    pub fn eval(&self, theta: &[f64], datum: &Datum) -> Result<f64> {
        datum.validate()?;
        let value = match self {
            PointLoss::Squared => {
                let u = residual(self, theta, datum)?;
                u * u
            }
            PointLoss::Absolute => residual(self, theta, datum)?.abs(),
            PointLoss::Pinball { tau } => check_loss(*tau, residual(self, theta, datum)?),
            PointLoss::Huber { k } => {
                let u = residual(self, theta, datum)?.abs();
                if u <= *k {
                    0.5 * u * u
                } else {
                    k * (u - 0.5 * k)
                }
            }
            PointLoss::QuartileTriple => {
                let Datum::Scalar(x) = datum else {
                    return Err(Error::ShapeMismatch { loss: self.name(), datum: datum.kind() });
                };
                expect_dim(theta, 3)?;
                check_loss(0.25, x - theta[0]) + 0.5 * (theta[1] - x).abs() + check_loss(0.75, x - theta[2])
            }
            PointLoss::Gee(gee) => {
                let Datum::Cluster { responses, covariates } = datum else {
                    return Err(Error::ShapeMismatch { loss: self.name(), datum: datum.kind() });
                };
                gee.eval(theta, responses, covariates)?
            }
            PointLoss::NegLogDensity(model) => -model.log_density(theta, datum)?,
            PointLoss::Scaled { factor, inner } => factor * inner.eval(theta, datum)?,
            PointLoss::Standardized { inner, minimizer } => {
                let value = inner.eval(theta, datum)?;
                let floor = match minimizer {
                    Some(f) => inner.eval(&f(datum), datum)?,
                    None => numeric_datum_minimum(inner, datum)?,
                };
                if !floor.is_finite() {
                    return Err(Error::NonFiniteLoss { theta: theta.to_vec() });
                }
                value - floor
            }
        };
        if value.is_nan() || value == f64::NEG_INFINITY {
            return Err(Error::NonFiniteLoss { theta: theta.to_vec() });
        }
        Ok(value)
    }

    /// Shifts the loss so that its per-datum minimum over `theta` is zero.
    ///
    /// Residual-type losses already have that property and come back
    /// unchanged. One-parameter self-information losses are minimized
    /// numerically per datum; anything else needs [`PointLoss::standardize_with`].
    pub fn standardize(&self) -> Result<PointLoss> {
        match self {
            PointLoss::Squared
            | PointLoss::Absolute
            | PointLoss::Pinball { .. }
            | PointLoss::QuartileTriple
            | PointLoss::Huber { .. }
            | PointLoss::Standardized { .. } => Ok(self.clone()),
            PointLoss::Scaled { factor, inner } => Ok(PointLoss::Scaled { factor: *factor, inner: Box::new(inner.standardize()?) }),
            PointLoss::NegLogDensity(model) if model.dim() == Some(1) => {
                Ok(PointLoss::Standardized { inner: Box::new(self.clone()), minimizer: None })
            }
            PointLoss::NegLogDensity(_) | PointLoss::Gee(_) => Err(Error::NoMinimizer(self.name())),
        }
    }

    /// Standardizes with a caller-supplied per-datum minimizer `theta_x`.
    pub fn standardize_with(&self, minimizer: fn(&Datum) -> Vec<f64>) -> PointLoss {
        PointLoss::Standardized { inner: Box::new(self.clone()), minimizer: Some(minimizer) }
    }
}

fn check_loss(tau: f64, u: f64) -> f64 {
    tau * positive_part(u) + (1.0 - tau) * positive_part(-u)
}

fn residual(loss: &PointLoss, theta: &[f64], datum: &Datum) -> Result<f64> {
    match datum {
        Datum::Scalar(x) => {
            expect_dim(theta, 1)?;
            Ok(x - theta[0])
        }
        Datum::Regression { response, covariates } => {
            expect_dim(theta, covariates.len())?;
            Ok(response - dot(covariates, theta))
        }
        _ => Err(Error::ShapeMismatch { loss: loss.name(), datum: datum.kind() }),
    }
}

fn numeric_datum_minimum(inner: &PointLoss, datum: &Datum) -> Result<f64> {
    let start = match datum {
        Datum::Scalar(x) if *x != 0.0 => *x,
        _ => 1.0,
    };
    let objective = |t: &[f64]| inner.eval(t, datum).unwrap_or(f64::INFINITY);
    let opts = NelderMeadOptions { tolerance: 1e-14, max_evals: 4000, ..Default::default() };
    let fit = nelder_mead(objective, &[start], &opts)?;
    Ok(fit.value)
}

pub(crate) fn expect_dim(theta: &[f64], expected: usize) -> Result<()> {
    if theta.len() != expected {
        return Err(Error::DimensionMismatch { expected, found: theta.len() });
    }
    Ok(())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A loss evaluated on the whole sample at once.
pub trait SampleLoss: fmt::Debug + Send + Sync {
    fn eval(&self, theta: &[f64]) -> Result<f64>;

    /// Number of observations behind the loss.
    fn n_obs(&self) -> usize;
}

/// Adapts a closure into a [`SampleLoss`].
pub struct FnLoss<F> {
    n_obs: usize,
    f: F,
}

impl<F> FnLoss<F>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    pub fn new(n_obs: usize, f: F) -> Self {
        Self { n_obs, f }
    }
}

impl<F> fmt::Debug for FnLoss<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnLoss").field("n_obs", &self.n_obs).finish_non_exhaustive()
    }
}

impl<F> SampleLoss for FnLoss<F>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    fn eval(&self, theta: &[f64]) -> Result<f64> {
        let v = (self.f)(theta);
        if v.is_nan() || v == f64::NEG_INFINITY {
            return Err(Error::NonFiniteLoss { theta: theta.to_vec() });
        }
        Ok(v)
    }

    fn n_obs(&self) -> usize {
        self.n_obs
    }
}

/// Cumulative loss `L(theta; x)`.
#[derive(Debug, Clone)]
pub enum DatasetLoss {
    /// `sum_i l(theta, x_i)`, summed in data order.
    Separable {
        loss: PointLoss,
        data: Vec<Datum>,
    },
    WholeSample(Arc<dyn SampleLoss>),
    /// Sum of several cumulative losses, in order.
    Sum(Vec<DatasetLoss>),
}

impl DatasetLoss {
    pub fn separable(loss: PointLoss, data: Vec<Datum>) -> Result<Self> {
        for (i, d) in data.iter().enumerate() {
            d.validate().map_err(|e| Error::at_datum(i, e))?;
        }
        Ok(DatasetLoss::Separable { loss, data })
    }

    /// Separable loss over scalar observations.
    pub fn scalar(loss: PointLoss, values: &[f64]) -> Result<Self> {
        Self::separable(loss, values.iter().map(|&x| Datum::Scalar(x)).collect())
    }

    pub fn whole_sample(loss: impl SampleLoss + 'static) -> Self {
        DatasetLoss::WholeSample(Arc::new(loss))
    }

    /// Loss that is zero everywhere (no data).
    pub fn empty(loss: PointLoss) -> Self {
        DatasetLoss::Separable { loss, data: vec![] }
    }

    pub fn eval(&self, theta: &[f64]) -> Result<f64> {
        match self {
            DatasetLoss::Separable { loss, data } => {
                let mut total = 0.0;
                for (i, d) in data.iter().enumerate() {
                    total += loss.eval(theta, d).map_err(|e| Error::at_datum(i, e))?;
                }
                Ok(total)
            }
            DatasetLoss::WholeSample(inner) => inner.eval(theta),
            DatasetLoss::Sum(parts) => {
                let mut total = 0.0;
                for part in parts {
                    total += part.eval(theta)?;
                }
                Ok(total)
            }
        }
    }

    pub fn n_obs(&self) -> usize {
        match self {
            DatasetLoss::Separable { data, .. } => data.len(),
            DatasetLoss::WholeSample(inner) => inner.n_obs(),
            DatasetLoss::Sum(parts) => parts.iter().map(DatasetLoss::n_obs).sum(),
        }
    }
}

/// `(1/2) ln(2 pi)`, the self-information of a unit normal at its mean.
pub const HALF_LN_2PI: f64 = 0.5 * LN_2PI;
