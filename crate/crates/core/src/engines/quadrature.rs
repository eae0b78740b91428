use alloc::vec::Vec;

use libm::log;

use crate::math::log_sum_exp;
use crate::{Error, Result};

/// Largest number of Simpson panels tried before giving up.
const MAX_PANELS: usize = 1 << 22;

/// `ln integral_lower^upper exp(log_f(t)) dt` by composite Simpson.
///
/// Starts with `panels` panels (two sub-intervals each) and doubles until the
/// log integral changes by less than `tolerance`. The sum is accumulated in
/// log space so the integrand may over- or underflow `f64` in linear scale.
pub fn quadrature_1d<F>(mut log_f: F, lower: f64, upper: f64, panels: usize, tolerance: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    if !(lower < upper) || !lower.is_finite() || !upper.is_finite() {
        return Err(Error::invalid("quadrature bounds must be finite with lower < upper"));
    }
    let mut panels = panels.max(1);
    let mut previous = simpson_log(&mut log_f, lower, upper, panels)?;
    loop {
        panels *= 2;
        let current = simpson_log(&mut log_f, lower, upper, panels)?;
        if current == f64::NEG_INFINITY && previous == f64::NEG_INFINITY {
            return Err(Error::PosteriorUndefined);
        }
        let change = (current - previous).abs();
        if change < tolerance {
            return Ok(current);
        }
        if panels >= MAX_PANELS {
            return Err(Error::NonConvergence { panels, change });
        }
        previous = current;
    }
}

fn simpson_log<F: FnMut(f64) -> f64>(log_f: &mut F, lower: f64, upper: f64, panels: usize) -> Result<f64> {
    let intervals = 2 * panels;
    let h = (upper - lower) / intervals as f64;
    let mut terms = Vec::with_capacity(intervals + 1);
    for k in 0..=intervals {
        let t = if k == intervals { upper } else { lower + k as f64 * h };
        let v = log_f(t);
        if v.is_nan() || v == f64::INFINITY {
            return Err(Error::PosteriorUndefined);
        }
        let coef = if k == 0 || k == intervals {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        terms.push(v + log(coef));
    }
    Ok(log_sum_exp(&terms) + log(h / 3.0))
}

/// Adaptive Simpson integral of a smooth `f` on `[lower, upper]` to absolute
/// tolerance `tolerance`.
pub fn integrate_adaptive<F>(mut f: F, lower: f64, upper: f64, tolerance: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    const MAX_DEPTH: u32 = 48;
    #[allow(clippy::too_many_arguments)]
    fn step<F: FnMut(f64) -> f64>(
        f: &mut F,
        (a, fa): (f64, f64),
        (m, fm): (f64, f64),
        (b, fb): (f64, f64),
        whole: f64,
        tol: f64,
        depth: u32,
        worst: &mut f64,
    ) -> f64 {
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            if depth == 0 {
                *worst = worst.max(delta.abs());
            }
            return left + right + delta / 15.0;
        }
        step(f, (a, fa), (lm, flm), (m, fm), left, 0.5 * tol, depth - 1, worst)
            + step(f, (m, fm), (rm, frm), (b, fb), right, 0.5 * tol, depth - 1, worst)
    }

    if !(lower < upper) {
        return Err(Error::invalid("integration bounds must satisfy lower < upper"));
    }
    let mid = 0.5 * (lower + upper);
    let (fa, fm, fb) = (f(lower), f(mid), f(upper));
    let whole = (upper - lower) / 6.0 * (fa + 4.0 * fm + fb);
    let mut worst = 0.0;
    let value = step(&mut f, (lower, fa), (mid, fm), (upper, fb), whole, tolerance, MAX_DEPTH, &mut worst);
    if !value.is_finite() || worst > 15.0 * tolerance {
        return Err(Error::NonConvergence { panels: 1 << 20, change: worst });
    }
    Ok(value)
}
