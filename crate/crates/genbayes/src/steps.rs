//! Default random-walk step sizes for the generic fit.

use genbayes_core::engines::Target;

const MAX_HALVINGS: usize = 80;

/// Per-coordinate steps from the local width of the log density at `start`.
///
/// For each coordinate the offset `h` at which the log density has dropped by
/// about one half is found by doubling or halving; for a Gaussian this is one
/// standard deviation. Steps are `2.4 h / sqrt(d)`.
pub fn local_widths<T: Target>(target: &T, start: &[f64]) -> Vec<f64> {
    let d = start.len();
    let base = target.log_density(start).unwrap_or(f64::NEG_INFINITY);
    let drop_at = |k: usize, h: f64| {
        let mut worst: f64 = 0.0;
        for sign in [1.0, -1.0] {
            let mut x = start.to_vec();
            x[k] += sign * h;
            let lp = target.log_density(&x).unwrap_or(f64::NEG_INFINITY);
            worst = worst.max(base - lp);
        }
        worst
    };
    (0..d)
        .map(|k| {
            let mut h = 1e-2 * start[k].abs().max(1.0);
            if !base.is_finite() {
                return 2.4 * h / (d as f64).sqrt();
            }
            // Grow until the drop reaches 1/2, then shrink while it exceeds 2.
            for _ in 0..MAX_HALVINGS {
                if drop_at(k, h) >= 0.5 {
                    break;
                }
                h *= 2.0;
            }
            for _ in 0..MAX_HALVINGS {
                if drop_at(k, h) <= 2.0 {
                    break;
                }
                h *= 0.5;
            }
            2.4 * h / (d as f64).sqrt()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use genbayes_core::engines::FnTarget;

    #[test]
    fn gaussian_widths_are_near_one_sd() {
        let t = FnTarget::new(2, |x: &[f64]| -0.5 * (x[0] * x[0] / 4.0 + x[1] * x[1] / 0.01));
        let w = local_widths(&t, &[0.0, 0.0]);
        let scale = 2.4 / 2f64.sqrt();
        assert!(w[0] / scale >= 1.0 && w[0] / scale <= 4.0, "{w:?}");
        assert!(w[1] / scale >= 0.05 && w[1] / scale <= 0.2, "{w:?}");
    }
}
