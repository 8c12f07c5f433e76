use crate::error::{arg, Result};
use crate::scalar::Real;

/// Power-law fit `V_H ∝ N^{−α}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingFit<T> {
    pub alpha: T,
    pub alpha_stderr: T,
    /// Intercept of log V_H against log N.
    pub log_prefactor: T,
    pub n_min: usize,
    pub n_max: usize,
    /// `(N, log V_H − fitted)` in input order.
    pub residuals: Vec<(usize, T)>,
}

impl<T: Real> ScalingFit<T> {
    pub fn predict(&self, n: usize) -> T {
        (self.log_prefactor - self.alpha * T::from_usize(n).unwrap().ln()).exp()
    }
}

/// Ordinary least squares of `log V_H` on `log N`.
pub fn fit_scaling<T: Real>(points: &[(usize, T)]) -> Result<ScalingFit<T>> {
    if points.len() < 3 {
        return arg(format!("need at least 3 points, got {}", points.len()));
    }
    if let Some((n, v)) = points.iter().find(|(n, v)| *n == 0 || !(*v > T::zero()) || !v.is_finite()) {
        return arg(format!("point (N={n}, V_H={v}) is not usable on a log scale"));
    }
    let xs: Vec<T> = points.iter().map(|(n, _)| T::from_usize(*n).unwrap().ln()).collect();
    let ys: Vec<T> = points.iter().map(|(_, v)| v.ln()).collect();
    let k = T::from_usize(points.len()).unwrap();
    let mx = xs.iter().copied().sum::<T>() / k;
    let my = ys.iter().copied().sum::<T>() / k;
    let sxx: T = xs.iter().map(|x| (*x - mx).powi(2)).sum();
    if sxx <= T::zero() {
        return arg("all points share the same N");
    }
    let sxy: T = xs.iter().zip(&ys).map(|(x, y)| (*x - mx) * (*y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<(usize, T)> = points
        .iter()
        .zip(xs.iter().zip(&ys))
        .map(|((n, _), (x, y))| (*n, *y - (intercept + slope * *x)))
        .collect();
    let ssr: T = residuals.iter().map(|(_, r)| r.powi(2)).sum();
    let dof = T::from_usize(points.len() - 2).unwrap();
    let stderr = if dof > T::zero() { (ssr / dof / sxx).sqrt() } else { T::zero() };
    Ok(ScalingFit {
        alpha: -slope,
        alpha_stderr: stderr,
        log_prefactor: intercept,
        n_min: points.iter().map(|p| p.0).min().unwrap(),
        n_max: points.iter().map(|p| p.0).max().unwrap(),
        residuals,
    })
}
