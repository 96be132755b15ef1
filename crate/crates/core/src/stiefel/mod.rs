//! Riemannian descent over isometries acting on Kraus legs.
//!
//! Points are matrices `V` with `V^dagger V = 1`. Ambient gradients come
//! from a closed form or from central finite differences; they are
//! projected onto the tangent space and followed by a QR retraction.

mod entropy;
mod optimizer;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{LpdoError, Result};
use crate::tensor::{qr_decompose, qr_isometrize};

pub use entropy::{
    objective_s_sr, objective_s_vn, renyi2_entropy, von_neumann_entropy, BlockMatrix, BlockObjective,
    EntropyKind, ObjectiveValue,
};
pub use optimizer::{
    optimize_bond, optimize_isometry, riemann_sweep, BondReport, GradientMode, OptimizationResult,
    OptimizerConfig, RiemannRun, RiemannSweepStats,
};

/// Tolerance on `V^dagger V = 1` for points handed to the optimizer.
pub const ISOMETRY_TOLERANCE: f64 = 1e-10;

/// Largest entry of `|V^dagger V - 1|`.
pub fn isometry_defect(v: &DMatrix<C64>) -> f64 {
    let g = v.adjoint() * v;
    (g - DMatrix::identity(v.ncols(), v.ncols())).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq)]
pub struct StiefelPoint {
    v: DMatrix<C64>,
}

impl StiefelPoint {
    pub fn new(v: DMatrix<C64>) -> Result<Self> {
        let defect = isometry_defect(&v);
        if v.nrows() < v.ncols() || defect > ISOMETRY_TOLERANCE {
            return Err(LpdoError::NotIsometric(defect));
        }
        Ok(Self { v })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            v: DMatrix::identity(n, n),
        }
    }

    /// Isometry from the QR of a complex Gaussian `n x p` matrix.
    pub fn random<R: Rng + ?Sized>(n: usize, p: usize, rng: &mut R) -> Result<Self> {
        let g = DMatrix::from_fn(n, p, |_, _| {
            C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        });
        Ok(Self { v: qr_isometrize(&g)? })
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.v
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.v
    }
}

/// `(m + m^dagger) / 2`.
pub fn herm(m: &DMatrix<C64>) -> DMatrix<C64> {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// `D - V herm(V^dagger D)`, the orthogonal projection of an ambient
/// direction onto the tangent space at `V`.
pub fn project_tangent(point: &StiefelPoint, d: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    let v = point.matrix();
    if v.shape() != d.shape() {
        return Err(LpdoError::ShapeMismatch(format!(
            "direction is {:?}, point is {:?}",
            d.shape(),
            v.shape()
        )));
    }
    Ok(d - v * herm(&(v.adjoint() * d)))
}

/// QR retraction `qf(V + t xi)`; `t = 0` returns `V` unchanged.
pub fn retract(point: &StiefelPoint, xi: &DMatrix<C64>, t: f64) -> Result<StiefelPoint> {
    if point.v.shape() != xi.shape() {
        return Err(LpdoError::ShapeMismatch("tangent vector shape differs from the point".into()));
    }
    if t == 0.0 {
        return Ok(point.clone());
    }
    let moved = &point.v + xi * C64::new(t, 0.0);
    Ok(StiefelPoint {
        v: qr_decompose(&moved).0,
    })
}

/// A real function of a complex matrix.
pub trait Objective {
    fn value(&self, v: &DMatrix<C64>) -> Result<f64>;

    /// For every entry (column-major order) the values at
    /// `v + eps E`, `v - eps E`, `v + i eps E`, `v - i eps E`, where `E` is
    /// the matrix unit of that entry.
    fn probes(&self, v: &DMatrix<C64>, eps: f64) -> Result<Vec<[f64; 4]>> {
        let mut out = Vec::with_capacity(v.len());
        let mut w = v.clone();
        for col in 0..v.ncols() {
            for row in 0..v.nrows() {
                let base = v[(row, col)];
                let mut vals = [0.0; 4];
                for (slot, delta) in [
                    C64::new(eps, 0.0),
                    C64::new(-eps, 0.0),
                    C64::new(0.0, eps),
                    C64::new(0.0, -eps),
                ]
                .into_iter()
                .enumerate()
                {
                    w[(row, col)] = base + delta;
                    vals[slot] = self.value(&w)?;
                }
                w[(row, col)] = base;
                out.push(vals);
            }
        }
        Ok(out)
    }

    /// Closed-form ambient gradient, when the objective has one.
    fn exact_gradient(&self, _v: &DMatrix<C64>) -> Option<Result<DMatrix<C64>>> {
        None
    }
}

impl<F> Objective for F
where
    F: Fn(&DMatrix<C64>) -> f64,
{
    fn value(&self, v: &DMatrix<C64>) -> Result<f64> {
        Ok(self(v))
    }
}

/// Central-difference gradient `D[a,b] = df/dRe v_ab + i df/dIm v_ab`.
pub fn fd_gradient<O: Objective + ?Sized>(f: &O, v: &DMatrix<C64>, eps: f64) -> Result<DMatrix<C64>> {
    if !(eps > 0.0) {
        return Err(LpdoError::Precondition("finite-difference step must be positive".into()));
    }
    let probes = f.probes(v, eps)?;
    let mut d = DMatrix::<C64>::zeros(v.nrows(), v.ncols());
    for col in 0..v.ncols() {
        for row in 0..v.nrows() {
            let p = probes[col * v.nrows() + row];
            if !(p[0].is_finite() && p[1].is_finite()) {
                return Err(LpdoError::NonFiniteObjective { row, col, part: "real" });
            }
            if !(p[2].is_finite() && p[3].is_finite()) {
                return Err(LpdoError::NonFiniteObjective { row, col, part: "imaginary" });
            }
            d[(row, col)] = C64::new((p[0] - p[1]) / (2.0 * eps), (p[2] - p[3]) / (2.0 * eps));
        }
    }
    Ok(d)
}
