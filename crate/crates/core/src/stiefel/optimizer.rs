//! Armijo-backtracking Riemannian gradient descent and the bond-pruning
//! sweep built on it.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::entropy::{BlockMatrix, BlockObjective, EntropyKind};
use super::{fd_gradient, project_tangent, retract, Objective, StiefelPoint};
use crate::chain::LpdoChain;
use crate::error::{LpdoError, Result};
use crate::measures::{trace, FidelityReference};
use crate::prune::{FidelityTracking, SweepStats};
use crate::tensor::TruncationPolicy;
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

/// Source of the ambient derivative.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMode {
    /// Central finite differences with step `fd_step`.
    FiniteDifference,
    /// The objective's closed form.
    #[default]
    Exact,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub objective: EntropyKind,
    pub n_iter: usize,
    pub gradient: GradientMode,
    pub fd_step: f64,
    pub grad_tol: f64,
    /// Stop once an accepted step lowers the objective by less than
    /// `f_tol * max(1, |f|)`.
    pub f_tol: f64,
    pub initial_step: f64,
    pub shrink: f64,
    /// Sufficient-decrease constant of the Armijo condition.
    pub armijo: f64,
    pub max_backtracks: usize,
    /// Start from a seeded random unitary instead of the identity.
    pub random_init: Option<u64>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            objective: EntropyKind::SecondRenyi,
            n_iter: 300,
            gradient: GradientMode::Exact,
            fd_step: 1e-6,
            grad_tol: 1e-8,
            f_tol: 1e-10,
            initial_step: 1.0,
            shrink: 0.5,
            armijo: 1e-4,
            max_backtracks: 40,
            random_init: None,
        }
    }
}

impl OptimizerConfig {
    pub fn with_objective(objective: EntropyKind) -> Self {
        Self {
            objective,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(LpdoError::Precondition(format!("optimizer config: {msg}")));
        if self.n_iter == 0 {
            return bad("n_iter must be at least 1");
        }
        if !(self.fd_step > 0.0) {
            return bad("fd_step must be positive");
        }
        if !(self.grad_tol >= 0.0) {
            return bad("grad_tol must be nonnegative");
        }
        if !(self.f_tol >= 0.0) {
            return bad("f_tol must be nonnegative");
        }
        if !(self.initial_step > 0.0) {
            return bad("initial_step must be positive");
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return bad("shrink must lie in (0, 1)");
        }
        if !(self.armijo > 0.0 && self.armijo < 1.0) {
            return bad("armijo must lie in (0, 1)");
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct OptimizationResult {
    pub point: StiefelPoint,
    /// Objective at the start point followed by every accepted iterate.
    pub trace: Vec<f64>,
    pub iterations: usize,
    /// Stopped on `grad_tol` or `f_tol`.
    pub converged: bool,
    pub grad_norm: f64,
}

impl OptimizationResult {
    pub fn value(&self) -> f64 {
        *self.trace.last().expect("trace holds the start value")
    }
}

/// Minimizer of the parabola through `f(0) = f0`, `f'(0) = slope` and
/// `f(t) = ft`, if it curves upward.
fn quadratic_minimizer(f0: f64, slope: f64, t: f64, ft: f64) -> Option<f64> {
    let curvature = ft - f0 - slope * t;
    if !(curvature > 0.0) || !ft.is_finite() {
        return None;
    }
    Some(-slope * t * t / (2.0 * curvature))
}

/// Minimizes `f` over `n x n` unitaries.
pub fn optimize_isometry<O: Objective + ?Sized>(f: &O, n: usize, config: &OptimizerConfig) -> Result<OptimizationResult> {
    config.validate()?;
    let mut v = match config.random_init {
        Some(seed) => StiefelPoint::random(n, n, &mut ChaCha8Rng::seed_from_u64(seed))?,
        None => StiefelPoint::identity(n),
    };
    let mut fv = f.value(v.matrix())?;
    let mut trace = vec![fv];
    let mut step = config.initial_step;
    let mut iterations = 0;
    let mut converged = false;
    let mut grad_norm = f64::INFINITY;
    while iterations < config.n_iter {
        let d = match config.gradient {
            GradientMode::FiniteDifference => fd_gradient(f, v.matrix(), config.fd_step)?,
            GradientMode::Exact => f.exact_gradient(v.matrix()).ok_or_else(|| {
                LpdoError::Precondition("objective has no closed-form gradient".into())
            })??,
        };
        let xi = project_tangent(&v, &d)?;
        let g2 = xi.norm_squared();
        grad_norm = g2.sqrt();
        if grad_norm < config.grad_tol {
            converged = true;
            break;
        }
        iterations += 1;
        let eta = -xi.clone();
        let slope = xi.dotc(&eta).re;
        let mut t = step;
        let mut accepted = false;
        for _ in 0..=config.max_backtracks {
            let candidate = retract(&v, &eta, t)?;
            let fc = f.value(candidate.matrix())?;
            if fc.is_finite() && fc <= fv + config.armijo * t * slope {
                let (mut best, mut fbest, mut tbest) = (candidate, fc, t);
                if let Some(tq) = quadratic_minimizer(fv, slope, t, fc).filter(|&tq| tq < 0.9 * t) {
                    let inner = retract(&v, &eta, tq)?;
                    let fi = f.value(inner.matrix())?;
                    if fi.is_finite() && fi < fbest {
                        (best, fbest, tbest) = (inner, fi, tq);
                    }
                }
                if fv - fbest <= config.f_tol * fv.abs().max(1.0) {
                    converged = true;
                }
                v = best;
                fv = fbest;
                trace.push(fv);
                step = 2.0 * tbest;
                accepted = true;
                break;
            }
            t = match quadratic_minimizer(fv, slope, t, fc) {
                Some(tq) => tq.clamp(0.1 * t, config.shrink * t),
                None => config.shrink * t,
            };
        }
        if !accepted || converged {
            break;
        }
    }
    Ok(OptimizationResult {
        point: v,
        trace,
        iterations,
        converged,
        grad_norm,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BondReport {
    pub bond: usize,
    /// Objective of the incumbent block (`V = 1`).
    pub objective_before: f64,
    pub objective_after: f64,
    pub iterations: usize,
    pub converged: bool,
    pub dim_before: usize,
    pub dim_after: usize,
    pub discarded_weight: f64,
    /// Accepted objective values of the optimizer run.
    pub objective_trace: Vec<f64>,
}

/// One inner step of the pruning routine: contract the bond, optimize a
/// unitary on the fused Kraus leg, apply it, and re-split the block with
/// an L2 cutoff. The center must be on site `i` or `i + 1`; it ends on
/// `i + 1`. When the optimizer does not improve on `V = 1` this is a plain
/// truncation of the bond.
pub fn optimize_bond(chain: &mut LpdoChain, i: usize, cutoff: f64, config: &OptimizerConfig) -> Result<BondReport> {
    let policy = TruncationPolicy::l2(cutoff)?;
    let block = chain.two_site_block(i)?;
    let bm = BlockMatrix::from_block(&block, i)?;
    let f = BlockObjective::new(&bm, config.objective);
    let k = bm.kappa_c();
    let identity = DMatrix::<C64>::identity(k, k);
    let incumbent = f.value(&identity)?;
    let result = optimize_isometry(&f, k, config)?;
    let (v, after) = if result.value() < incumbent {
        (result.point.matrix().clone(), result.value())
    } else {
        (identity, incumbent)
    };
    let split = chain.split_block(i, &bm.apply(&v)?, &policy)?;
    Ok(BondReport {
        bond: i,
        objective_before: incumbent,
        objective_after: after,
        iterations: result.iterations,
        converged: result.converged,
        dim_before: split.dim_before,
        dim_after: split.dim_after,
        discarded_weight: split.discarded_weight,
        objective_trace: result.trace,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiemannSweepStats {
    pub sweep: SweepStats,
    pub objective_kind: EntropyKind,
    /// Sum over bonds of the incumbent objective values.
    pub objective_before: f64,
    /// Sum over bonds of the optimized objective values.
    pub objective_after: f64,
    pub optimizer_iters: usize,
}

#[derive(Clone, Debug)]
pub struct RiemannRun {
    pub initial_chi_mean: f64,
    pub stats: Vec<RiemannSweepStats>,
    /// Per sweep, the report of every bond.
    pub bonds: Vec<Vec<BondReport>>,
    pub chain: LpdoChain,
}

impl RiemannRun {
    /// First sweep (1-based) after which every bond has dimension 1.
    pub fn sweeps_to_product(&self) -> Option<usize> {
        self.stats
            .iter()
            .find(|s| s.sweep.chi_mean == 1.0)
            .map(|s| s.sweep.sweep_index)
    }
}

/// Left-to-right sweeps of [`optimize_bond`] over every bond, after
/// re-canonicalizing onto site 0. Stops early once `stop_at_product` is
/// set and all bonds have dimension 1.
pub fn riemann_sweep(
    chain: LpdoChain,
    cutoff: f64,
    config: &OptimizerConfig,
    n_sweeps: usize,
    fidelity: FidelityTracking,
    stop_at_product: bool,
) -> Result<RiemannRun> {
    config.validate()?;
    let reference = match fidelity {
        FidelityTracking::Never => None,
        _ => Some(FidelityReference::new(chain.clone())?),
    };
    let initial_chi_mean = chain.chi_mean();
    let mut chain = chain;
    let mut stats = Vec::with_capacity(n_sweeps);
    let mut bonds = Vec::with_capacity(n_sweeps);
    for sweep in 1..=n_sweeps {
        let start = Instant::now();
        chain.recanonicalize(0)?;
        let mut reports = Vec::with_capacity(chain.n_sites());
        for b in 0..chain.n_sites().saturating_sub(1) {
            reports.push(optimize_bond(&mut chain, b, cutoff, config)?);
        }
        let wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
        let done = stop_at_product && chain.chi_mean() == 1.0;
        let track = match fidelity {
            FidelityTracking::EverySweep => true,
            FidelityTracking::FinalOnly => sweep == n_sweeps || done,
            FidelityTracking::Never => false,
        };
        let fidelity_vs_initial = match (&reference, track) {
            (Some(r), true) => Some(r.compare(&chain)?.fidelity),
            _ => None,
        };
        stats.push(RiemannSweepStats {
            sweep: SweepStats {
                sweep_index: sweep,
                chi_mean: chain.chi_mean(),
                chi_max: chain.chi_max(),
                fidelity_vs_initial,
                trace_deviation: (trace(&chain)? - 1.0).abs(),
                wall_time_ms,
            },
            objective_kind: config.objective,
            objective_before: reports.iter().map(|r| r.objective_before).sum(),
            objective_after: reports.iter().map(|r| r.objective_after).sum(),
            optimizer_iters: reports.iter().map(|r| r.iterations).sum(),
        });
        bonds.push(reports);
        if done {
            break;
        }
    }
    Ok(RiemannRun {
        initial_chi_mean,
        stats,
        bonds,
        chain,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gates;

    #[test]
    fn config_validation() {
        assert!(OptimizerConfig::default().validate().is_ok());
        let mut c = OptimizerConfig::default();
        c.n_iter = 0;
        assert!(c.validate().is_err());
        let mut c = OptimizerConfig::default();
        c.shrink = 1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn descends_a_quadratic_to_its_minimum() {
        // distance to a fixed unitary target is minimized at the target
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let target = gates::random_unitary(3, &mut rng);
        let t = target.clone();
        let f = move |v: &DMatrix<C64>| (v - &t).norm_squared();
        let config = OptimizerConfig {
            n_iter: 500,
            gradient: GradientMode::FiniteDifference,
            f_tol: 0.0,
            ..OptimizerConfig::default()
        };
        let res = optimize_isometry(&f, 3, &config).unwrap();
        assert!(res.trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(res.value() < 1e-8, "{}", res.value());
        assert!(res.converged);
    }

    #[test]
    fn optimal_block_stays_at_zero() {
        let mut chain = LpdoChain::optimal_lpmm(4).unwrap();
        let report = optimize_bond(&mut chain, 0, 0.1, &OptimizerConfig::default()).unwrap();
        assert!(report.objective_after.abs() < 1e-12);
        assert_eq!(report.dim_after, 1);
        assert_eq!(report.iterations, 0);
    }

    #[test]
    fn exact_mode_needs_a_closed_form() {
        let f = |v: &DMatrix<C64>| v.norm_squared();
        assert!(optimize_isometry(&f, 2, &OptimizerConfig::default()).is_err());
    }
}
