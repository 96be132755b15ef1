//! Least-squares fit of `f(x) = alpha + beta exp(-gamma x)` by
//! Levenberg-Marquardt.

use nalgebra::{Matrix3, Vector3};
use serde::Serialize;

use crate::error::{HarnessError, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitResult {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub sigma_alpha: f64,
    pub sigma_beta: f64,
    pub sigma_gamma: f64,
    /// `sqrt(sum r_i^2)`.
    pub residual_norm: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl FitResult {
    pub fn eval(&self, x: f64) -> f64 {
        self.alpha + self.beta * (-self.gamma * x).exp()
    }
}

pub const DEFAULT_BUDGET: usize = 500;

fn residuals(p: &Vector3<f64>, x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(&xi, &yi)| p[0] + p[1] * (-p[2] * xi).exp() - yi).collect()
}

fn cost(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// `J^T J` and `J^T r` for the model at `p`.
fn normal_equations(p: &Vector3<f64>, x: &[f64], r: &[f64]) -> (Matrix3<f64>, Vector3<f64>) {
    let mut a = Matrix3::zeros();
    let mut g = Vector3::zeros();
    for (&xi, &ri) in x.iter().zip(r) {
        let e = (-p[2] * xi).exp();
        let j = Vector3::new(1.0, e, -p[1] * xi * e);
        a += j * j.transpose();
        g += j * ri;
    }
    (a, g)
}

/// `alpha` from the last point, `beta` and `gamma` from a straight-line
/// fit of `ln |y - alpha|` against `x`.
fn initial_guess(x: &[f64], y: &[f64]) -> Vector3<f64> {
    let last = x
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let alpha = y[last];
    let span = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - x.iter().cloned().fold(f64::INFINITY, f64::min);
    let range = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - y.iter().cloned().fold(f64::INFINITY, f64::min);
    let first = x
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let sign = if y[first] >= alpha { 1.0 } else { -1.0 };
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(_, &yi)| sign * (yi - alpha) > 1e-9 * range)
        .map(|(&xi, &yi)| (xi, (sign * (yi - alpha)).ln()))
        .collect();
    let fallback_gamma = if span > 0.0 { 1.0 / span } else { 1.0 };
    let (mut beta, mut gamma) = (sign * range, fallback_gamma);
    if pts.len() >= 2 {
        let m = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        if sxx > 0.0 {
            let slope = sxy / sxx;
            if slope < 0.0 && slope.is_finite() {
                gamma = -slope;
                beta = sign * (my - slope * mx).exp();
            }
        }
    }
    Vector3::new(alpha, beta, gamma)
}

/// Fits the model to `(x, y)`. A run that exhausts `budget` iterations
/// returns its best parameters with `converged = false`.
pub fn fit_exponential(x: &[f64], y: &[f64], budget: usize) -> Result<FitResult> {
    if x.len() != y.len() {
        return Err(HarnessError::Usage(format!("{} x values but {} y values", x.len(), y.len())));
    }
    if x.len() < 4 {
        return Err(HarnessError::Usage(format!("need at least 4 points, got {}", x.len())));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(HarnessError::Usage("data contains non-finite values".into()));
    }
    let ymax = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let ymin = y.iter().cloned().fold(f64::INFINITY, f64::min);
    if ymax - ymin <= 1e-14 * ymax.abs().max(1.0) {
        return Err(HarnessError::Degenerate("y is constant, so beta and gamma are not identifiable".into()));
    }
    let mut p = initial_guess(x, y);
    let mut r = residuals(&p, x, y);
    let mut c = cost(&r);
    let mut mu = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < budget {
        iterations += 1;
        let (a, g) = normal_equations(&p, x, &r);
        if g.amax() <= 1e-15 * (1.0 + c) {
            converged = true;
            break;
        }
        let mut improved = false;
        while mu < 1e20 {
            let damped = a + Matrix3::from_diagonal(&a.diagonal().map(|d| mu * d.max(1e-300)));
            let Some(step) = damped.lu().solve(&(-g)) else {
                mu *= 10.0;
                continue;
            };
            let q = p + step;
            let rq = residuals(&q, x, y);
            let cq = cost(&rq);
            if cq.is_finite() && cq <= c {
                let small = step.norm() <= 1e-13 * (p.norm() + 1e-13);
                let flat = c - cq <= 1e-30 + 1e-15 * c;
                p = q;
                r = rq;
                c = cq;
                mu = (mu / 3.0).max(1e-15);
                improved = true;
                converged = small || flat;
                break;
            }
            mu *= 4.0;
        }
        if !improved {
            // no downhill step at any damping: a stationary point
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }
    let (a, _) = normal_equations(&p, x, &r);
    let cov = a
        .try_inverse()
        .filter(|inv| inv.iter().all(|v| v.is_finite()))
        .ok_or_else(|| HarnessError::Degenerate("singular normal equations at the solution".into()))?;
    if a.symmetric_eigenvalues().min() <= 1e-13 * a.symmetric_eigenvalues().max() {
        return Err(HarnessError::Degenerate("parameters are not identifiable from these data".into()));
    }
    let s2 = c / (x.len() - 3) as f64;
    let sigma = |i: usize| (s2 * cov[(i, i)]).max(0.0).sqrt();
    Ok(FitResult {
        alpha: p[0],
        beta: p[1],
        gamma: p[2],
        sigma_alpha: sigma(0),
        sigma_beta: sigma(1),
        sigma_gamma: sigma(2),
        residual_norm: c.sqrt(),
        converged,
        iterations,
    })
}
