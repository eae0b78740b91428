//! Nelder-Mead simplex minimization.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

const REFLECTION: f64 = 1.0;
const EXPANSION: f64 = 2.0;
const CONTRACTION: f64 = 0.5;
const SHRINK: f64 = 0.5;
/// Consecutive iterations with only non-finite trial points before giving up.
const STUCK_LIMIT: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadOptions {
    /// Stop once `f(worst) - f(best)` over the simplex drops below this.
    pub tolerance: f64,
    /// Also require every vertex to lie within this distance of the best one,
    /// per coordinate and relative to `max(1, |x|)`.
    pub x_tolerance: f64,
    pub max_evals: usize,
    /// Per-coordinate offsets of the initial simplex. When absent, each
    /// coordinate is perturbed by 5% of its magnitude, or 0.00025 at zero.
    pub initial_steps: Option<Vec<f64>>,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self { tolerance: 1e-10, x_tolerance: 1e-9, max_evals: 10_000, initial_steps: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxEvaluations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadFit {
    pub point: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub termination: Termination,
}

/// Minimizes `objective` from `start`.
///
/// Non-finite objective values (including NaN) are treated as `+inf`, so a
/// forbidden region can be expressed by returning infinity there.
pub fn nelder_mead<F>(mut objective: F, start: &[f64], opts: &NelderMeadOptions) -> Result<NelderMeadFit>
where
    F: FnMut(&[f64]) -> f64,
{
    let n = start.len();
    if n == 0 {
        return Err(Error::invalid("Nelder-Mead needs at least one coordinate"));
    }
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = objective(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let f0 = eval(start, &mut evals);
    if !f0.is_finite() {
        return Err(Error::NonFiniteStart);
    }
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((start.to_vec(), f0));
    for i in 0..n {
        let step = match &opts.initial_steps {
            Some(s) => s[i],
            None if start[i] != 0.0 => 0.05 * start[i],
            None => 0.000_25,
        };
        let mut x = start.to_vec();
        x[i] += step;
        let mut fx = eval(&x, &mut evals);
        if !fx.is_finite() {
            x[i] = start[i] - step;
            fx = eval(&x, &mut evals);
        }
        simplex.push((x, fx));
    }

    let mut stuck = 0usize;
    let mut centroid = vec![0.0; n];
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        if worst - best < opts.tolerance && collapsed(&simplex, opts.x_tolerance) {
            return Ok(finish(simplex, evals, Termination::Converged));
        }
        if evals >= opts.max_evals {
            return Ok(finish(simplex, evals, Termination::MaxEvaluations));
        }

        centroid.iter_mut().for_each(|c| *c = 0.0);
        for (x, _) in &simplex[..n] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / n as f64;
            }
        }
        let along = |t: f64, from: &[f64]| -> Vec<f64> { centroid.iter().zip(from).map(|(c, w)| c + t * (c - w)).collect() };

        let reflected = along(REFLECTION, &simplex[n].0);
        let fr = eval(&reflected, &mut evals);
        let second_worst = simplex[n - 1].1;
        let mut shrink = false;
        let mut any_finite = fr.is_finite();

        if fr < best {
            let expanded = along(EXPANSION, &simplex[n].0);
            let fe = eval(&expanded, &mut evals);
            simplex[n] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < second_worst {
            simplex[n] = (reflected, fr);
        } else if fr < worst {
            let contracted = along(CONTRACTION * REFLECTION, &simplex[n].0);
            let fc = eval(&contracted, &mut evals);
            any_finite |= fc.is_finite();
            if fc <= fr {
                simplex[n] = (contracted, fc);
            } else {
                shrink = true;
            }
        } else {
            let contracted = along(-CONTRACTION, &simplex[n].0);
            let fc = eval(&contracted, &mut evals);
            any_finite |= fc.is_finite();
            if fc < worst {
                simplex[n] = (contracted, fc);
            } else {
                shrink = true;
            }
        }

        if shrink {
            let anchor = simplex[0].0.clone();
            for (x, fx) in simplex.iter_mut().skip(1) {
                for (xi, ai) in x.iter_mut().zip(&anchor) {
                    *xi = ai + SHRINK * (*xi - ai);
                }
                *fx = eval(x, &mut evals);
                any_finite |= fx.is_finite();
            }
        }

        if any_finite {
            stuck = 0;
        } else {
            stuck += 1;
            if stuck >= STUCK_LIMIT {
                return Err(Error::OptimizerStuck);
            }
        }
    }
}

fn collapsed(simplex: &[(Vec<f64>, f64)], tol: f64) -> bool {
    let best = &simplex[0].0;
    simplex[1..].iter().all(|(x, _)| x.iter().zip(best).all(|(xi, bi)| (xi - bi).abs() <= tol * bi.abs().max(1.0)))
}

fn finish(mut simplex: Vec<(Vec<f64>, f64)>, evaluations: usize, termination: Termination) -> NelderMeadFit {
    let (point, value) = simplex.swap_remove(0);
    NelderMeadFit { point, value, evaluations, termination }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_minimum() {
        let fit = nelder_mead(|t| (t[0] - 3.0).powi(2), &[0.0], &NelderMeadOptions { tolerance: 1e-16, ..Default::default() }).unwrap();
        assert!((fit.point[0] - 3.0).abs() < 1e-6, "{fit:?}");
        assert_eq!(fit.termination, Termination::Converged);
    }

    #[test]
    fn rosenbrock() {
        let f = |t: &[f64]| (1.0 - t[0]).powi(2) + 100.0 * (t[1] - t[0] * t[0]).powi(2);
        let opts = NelderMeadOptions { tolerance: 1e-14, max_evals: 20_000, ..Default::default() };
        let fit = nelder_mead(f, &[-1.2, 1.0], &opts).unwrap();
        assert!((fit.point[0] - 1.0).abs() < 1e-4 && (fit.point[1] - 1.0).abs() < 1e-4, "{fit:?}");
    }

    #[test]
    fn constant_objective_returns_start() {
        let fit = nelder_mead(|_| 4.5, &[1.0, 2.0], &NelderMeadOptions::default()).unwrap();
        assert_eq!(fit.point, vec![1.0, 2.0]);
        assert_eq!(fit.value, 4.5);
    }

    #[test]
    fn non_finite_start_is_an_error() {
        let err = nelder_mead(|t| if t[0] > 0.0 { t[0] } else { f64::INFINITY }, &[-1.0], &NelderMeadOptions::default());
        assert_eq!(err.unwrap_err(), Error::NonFiniteStart);
    }

    #[test]
    fn respects_forbidden_region() {
        // Minimum of (t - 1)^2 restricted to t >= 2 sits on the boundary.
        let f = |t: &[f64]| if t[0] < 2.0 { f64::INFINITY } else { (t[0] - 1.0).powi(2) };
        let fit = nelder_mead(f, &[5.0], &NelderMeadOptions { tolerance: 1e-14, ..Default::default() }).unwrap();
        assert!(fit.point[0] >= 2.0 && fit.point[0] < 2.0 + 1e-6, "{fit:?}");
    }

    #[test]
    fn reports_max_evaluations() {
        let f = |t: &[f64]| (1.0 - t[0]).powi(2) + 100.0 * (t[1] - t[0] * t[0]).powi(2);
        let fit = nelder_mead(f, &[-1.2, 1.0], &NelderMeadOptions { tolerance: 0.0, max_evals: 50, ..Default::default() }).unwrap();
        assert_eq!(fit.termination, Termination::MaxEvaluations);
    }
}
