//! Brute-force reference computations shared by integration tests.
#![allow(dead_code)]

use genbayes_core::engines::laplace_log_evidence;
use genbayes_core::engines::FnTarget;
use genbayes_core::math::normal_log_pdf;
use genbayes_core::survival::CoxLoss;

/// Composite Simpson weights for `2m` intervals.
fn simpson_weights(intervals: usize) -> Vec<f64> {
    (0..=intervals)
        .map(|k| {
            if k == 0 || k == intervals {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            }
        })
        .collect()
}

/// `ln integral exp(g)` over a box by tensor-product Simpson with `m` intervals per axis.
pub fn log_integral_box(g: &dyn Fn(&[f64]) -> f64, lo: &[f64], hi: &[f64], m: usize) -> f64 {
    let dim = lo.len();
    let w = simpson_weights(m);
    let h: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| (b - a) / m as f64).collect();
    let mut logs = Vec::new();
    let mut idx = vec![0usize; dim];
    loop {
        let x: Vec<f64> = (0..dim).map(|d| lo[d] + idx[d] as f64 * h[d]).collect();
        let weight: f64 = idx.iter().map(|&k| w[k]).product();
        logs.push(g(&x) + weight.ln());
        let mut d = 0;
        loop {
            if d == dim {
                let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let sum: f64 = logs.iter().map(|l| (l - max).exp()).sum();
                return max + sum.ln() + h.iter().map(|hh| (hh / 3.0).ln()).sum::<f64>();
            }
            idx[d] += 1;
            if idx[d] <= m {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

/// Refines [`log_integral_box`] until two levels agree within `tol`.
pub fn log_integral_converged(g: &dyn Fn(&[f64]) -> f64, lo: &[f64], hi: &[f64], mut m: usize, tol: f64) -> f64 {
    let mut previous = log_integral_box(g, lo, hi, m);
    loop {
        m *= 2;
        let current = log_integral_box(g, lo, hi, m);
        if (current - previous).abs() < tol || m > 4096 {
            return current;
        }
        previous = current;
    }
}

/// Exact posterior model probabilities for two markers, ordered
/// `[none, {0}, {1}, {0, 1}]`, by integrating each model's evidence.
pub fn two_marker_model_probs(loss: &CoxLoss, v: [f64; 2], a: [f64; 2]) -> [f64; 4] {
    let null = loss.restricted(&[]).unwrap().eval(&[]).unwrap();
    let mut log_post = [0.0; 4];
    log_post[0] = (1.0 - a[0]).ln() + (1.0 - a[1]).ln();
    for (slot, cols) in [(1usize, vec![0usize]), (2, vec![1]), (3, vec![0, 1])] {
        let restricted = loss.restricted(&cols).unwrap();
        let g =
            |b: &[f64]| null - restricted.eval(b).unwrap() + b.iter().zip(&cols).map(|(x, &j)| normal_log_pdf(*x, 0.0, v[j])).sum::<f64>();
        // Box around the Laplace mode, 10 marginal standard deviations wide.
        let t = FnTarget::new(cols.len(), g);
        let fit = laplace_log_evidence(&t, &vec![0.0; cols.len()]).unwrap();
        let lo: Vec<f64> = (0..cols.len()).map(|k| fit.mode[k] - 10.0 * fit.covariance[(k, k)].sqrt()).collect();
        let hi: Vec<f64> = (0..cols.len()).map(|k| fit.mode[k] + 10.0 * fit.covariance[(k, k)].sqrt()).collect();
        let log_z = log_integral_converged(&g, &lo, &hi, 32, 1e-9);
        let prior: f64 = (0..2).map(|j| if cols.contains(&j) { a[j].ln() } else { (1.0 - a[j]).ln() }).sum();
        log_post[slot] = log_z + prior;
    }
    let max = log_post.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = log_post.iter().map(|l| (l - max).exp()).sum();
    log_post.map(|l| (l - max).exp() / total)
}

/// Inclusion probabilities implied by [`two_marker_model_probs`].
pub fn two_marker_inclusion(probs: [f64; 4]) -> [f64; 2] {
    [probs[1] + probs[3], probs[2] + probs[3]]
}
