use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::{Error, Result};

/// Default finite-difference step for coordinate `x`: `eps^(1/4) * max(1, |x|)`.
pub fn default_step(x: f64) -> f64 {
    // f64::EPSILON^(1/4)
    const FOURTH_ROOT_EPS: f64 = 1.220_703_125e-4;
    FOURTH_ROOT_EPS * x.abs().max(1.0)
}

/// Symmetric central-difference Hessian of `f` at `theta`.
///
/// `steps` overrides the per-coordinate step sizes.
pub fn hessian_fd<F>(mut f: F, theta: &[f64], steps: Option<&[f64]>) -> Result<DMatrix<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    let p = theta.len();
    let h: Vec<f64> = match steps {
        Some(s) if s.len() == p => s.to_vec(),
        Some(s) => return Err(Error::DimensionMismatch { expected: p, found: s.len() }),
        None => theta.iter().map(|&x| default_step(x)).collect(),
    };
    if h.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::invalid("finite-difference steps must be positive"));
    }
    let mut x = theta.to_vec();
    let mut eval = |x: &[f64], coordinate: usize| {
        let v = f(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFiniteStencil { coordinate })
        }
    };
    let f0 = eval(&x, 0)?;
    let mut hess = DMatrix::zeros(p, p);
    for i in 0..p {
        x[i] = theta[i] + h[i];
        let fp = eval(&x, i)?;
        x[i] = theta[i] - h[i];
        let fm = eval(&x, i)?;
        x[i] = theta[i];
        hess[(i, i)] = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
        for j in 0..i {
            let mut corner = |si: f64, sj: f64| {
                x[i] = theta[i] + si * h[i];
                x[j] = theta[j] + sj * h[j];
                let v = eval(&x, i);
                x[i] = theta[i];
                x[j] = theta[j];
                v
            };
            let fpp = corner(1.0, 1.0)?;
            let fpm = corner(1.0, -1.0)?;
            let fmp = corner(-1.0, 1.0)?;
            let fmm = corner(-1.0, -1.0)?;
            let v = (fpp - fpm - fmp + fmm) / (4.0 * h[i] * h[j]);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    // The stencil is symmetric by construction; symmetrize anyway so callers
    // never see asymmetry from rounding.
    let sym = (&hess + hess.transpose()) * 0.5;
    Ok(sym)
}
