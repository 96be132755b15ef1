use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::{DenseTensor, Index, IndexId, IndexRole};
use crate::error::{LpdoError, Result};

/// How a spectrum is normalized before the cutoff is applied and after
/// values are discarded.
///
/// `L2` treats the values as coherent amplitudes (singular values of a
/// purification); `L1` treats them as mixture probabilities.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormMode {
    L1,
    L2,
}

/// Cutoff, rank cap and norm convention for a truncated factorization.
///
/// A value `v_j` survives when `v_j / |v| >= cutoff`, where `|v|` is the L1
/// or L2 norm of the full spectrum. At least one value always survives.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationPolicy {
    pub cutoff: f64,
    pub max_rank: Option<usize>,
    pub norm_mode: NormMode,
}

impl TruncationPolicy {
    pub fn new(cutoff: f64, max_rank: Option<usize>, norm_mode: NormMode) -> Result<Self> {
        let policy = Self {
            cutoff,
            max_rank,
            norm_mode,
        };
        policy.validate()?;
        Ok(policy)
    }

    pub fn l2(cutoff: f64) -> Result<Self> {
        Self::new(cutoff, None, NormMode::L2)
    }

    pub fn l1(cutoff: f64) -> Result<Self> {
        Self::new(cutoff, None, NormMode::L1)
    }

    pub fn with_max_rank(self, max_rank: usize) -> Result<Self> {
        Self::new(self.cutoff, Some(max_rank), self.norm_mode)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.cutoff) {
            return Err(LpdoError::InvalidPolicy(format!(
                "cutoff {} outside [0, 1)",
                self.cutoff
            )));
        }
        if self.max_rank == Some(0) {
            return Err(LpdoError::InvalidPolicy("max_rank must be at least 1".into()));
        }
        Ok(())
    }
}

/// Which leading entries of a descending spectrum to keep, and the
/// renormalization that restores unit norm afterwards.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Selection {
    pub kept: usize,
    pub discarded: f64,
    pub rescale: f64,
}

/// `floor` is an absolute threshold below which values are always dropped.
pub(crate) fn select(values: &[f64], policy: &TruncationPolicy, floor: f64) -> Result<Selection> {
    let norm = match policy.norm_mode {
        NormMode::L1 => values.iter().sum::<f64>(),
        NormMode::L2 => values.iter().map(|v| v * v).sum::<f64>().sqrt(),
    };
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(LpdoError::ZeroTensor);
    }
    let mut kept = values
        .iter()
        .take_while(|&&v| v / norm >= policy.cutoff && v > floor)
        .count();
    if let Some(cap) = policy.max_rank {
        kept = kept.min(cap);
    }
    kept = kept.max(1);
    let (discarded, rescale) = match policy.norm_mode {
        NormMode::L1 => {
            let lost: f64 = values[kept..].iter().sum();
            // N_kappa - delta, evaluated from the survivors to avoid cancellation
            let remaining: f64 = values[..kept].iter().sum();
            (lost, 1.0 / remaining)
        }
        NormMode::L2 => {
            let lost = values[kept..].iter().map(|v| v * v).sum::<f64>().sqrt();
            let remaining = values[..kept].iter().map(|v| v * v).sum::<f64>().sqrt();
            (lost, 1.0 / remaining)
        }
    };
    Ok(Selection {
        kept,
        discarded,
        rescale,
    })
}

/// Result of a truncated SVD of a tensor across a row/column bipartition.
#[derive(Clone, Debug)]
pub struct SvdOutcome {
    /// Row indices followed by `bond`; columns are orthonormal.
    pub left: DenseTensor,
    /// Kept values after renormalization, descending.
    pub spectrum: Vec<f64>,
    /// `bond` followed by the column indices; rows are orthonormal.
    pub right: DenseTensor,
    pub kept_rank: usize,
    /// `delta_chi` (L2) or `delta` (L1) of the discarded tail.
    pub discarded_weight: f64,
    pub bond: Index,
    /// Full singular spectrum before truncation, descending.
    pub raw_spectrum: Vec<f64>,
}

impl SvdOutcome {
    /// `left` with the kept spectrum absorbed into its bond leg.
    pub fn left_weighted(&self) -> DenseTensor {
        weight_leg(&self.left, self.left.rank() - 1, &self.spectrum)
    }

    /// `right` with the kept spectrum absorbed into its bond leg.
    pub fn right_weighted(&self) -> DenseTensor {
        weight_leg(&self.right, 0, &self.spectrum)
    }
}

fn weight_leg(t: &DenseTensor, axis: usize, weights: &[f64]) -> DenseTensor {
    let dims = t.dims();
    let inner: usize = dims[axis + 1..].iter().product();
    let dim = dims[axis];
    let data = t
        .data()
        .iter()
        .enumerate()
        .map(|(k, z)| z * weights[(k / inner) % dim])
        .collect();
    DenseTensor {
        indices: t.indices().to_vec(),
        data,
    }
}

/// Truncated SVD across the bipartition `row_ids | rest`, with a fresh bond id.
pub fn svd_truncate(t: &DenseTensor, row_ids: &[IndexId], policy: &TruncationPolicy) -> Result<SvdOutcome> {
    svd_truncate_labeled(t, row_ids, policy, IndexId::fresh())
}

/// Truncated SVD whose new bond leg carries the id `bond`.
pub fn svd_truncate_labeled(
    t: &DenseTensor,
    row_ids: &[IndexId],
    policy: &TruncationPolicy,
    bond: IndexId,
) -> Result<SvdOutcome> {
    policy.validate()?;
    let mat = t.matricize(row_ids)?;
    let (m, n) = mat.matrix.shape();
    let (u, raw_sorted, v) = svd(&mat.matrix);
    // numerical rank: values at rounding level of the largest are noise
    let floor = raw_sorted.first().copied().unwrap_or(0.0) * (m.max(n) as f64) * f64::EPSILON;
    let sel = select(&raw_sorted, policy, floor)?;
    let bond = Index::new(bond, sel.kept, IndexRole::Bond)?;
    let u_kept = u.columns(0, sel.kept).into_owned();
    let v_kept = v.columns(0, sel.kept).adjoint();
    let left = DenseTensor::from_matrix(&u_kept, mat.rows, vec![bond])?;
    let right = DenseTensor::from_matrix(&v_kept, vec![bond], mat.cols)?;
    let spectrum = raw_sorted[..sel.kept].iter().map(|v| v * sel.rescale).collect();
    Ok(SvdOutcome {
        left,
        spectrum,
        right,
        kept_rank: sel.kept,
        discarded_weight: sel.discarded,
        bond,
        raw_spectrum: raw_sorted,
    })
}

const MAX_JACOBI_SWEEPS: usize = 80;

/// Thin SVD `a = u diag(s) v^dagger` by one-sided (Hestenes) Jacobi
/// rotations, values descending. Singular vectors are orthonormal for the
/// nonzero values; on the rotated side a zero value gets a zero column.
pub fn svd(a: &DMatrix<C64>) -> (DMatrix<C64>, Vec<f64>, DMatrix<C64>) {
    let (m, n) = a.shape();
    if m < n {
        let (u, s, v) = svd(&a.adjoint());
        return (v, s, u);
    }
    let mut w = a.clone();
    let mut v = DMatrix::<C64>::identity(n, n);
    let tol = (m as f64) * f64::EPSILON;
    for _ in 0..MAX_JACOBI_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, C64::new(0.0, 0.0));
                for (x, y) in w.column(p).iter().zip(w.column(q).iter()) {
                    alpha += x.norm_sqr();
                    beta += y.norm_sqr();
                    gamma += x.conj() * y;
                }
                let g = gamma.norm();
                if g <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let phase = (gamma / g).conj();
                rotate_columns(&mut w, p, q, c, c * t, phase);
                rotate_columns(&mut v, p, q, c, c * t, phase);
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..n).map(|j| w.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));
    let values: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let u = DMatrix::from_fn(m, n, |r, c| {
        let j = order[c];
        if norms[j] > 0.0 {
            w[(r, j)] / norms[j]
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let v = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    (u, values, v)
}

/// `(x_p, x_q) <- (c x_p - s e x_q, s x_p + c e x_q)`.
fn rotate_columns(x: &mut DMatrix<C64>, p: usize, q: usize, c: f64, s: f64, e: C64) {
    for r in 0..x.nrows() {
        let a = x[(r, p)];
        let b = x[(r, q)] * e;
        x[(r, p)] = a * c - b * s;
        x[(r, q)] = a * s + b * c;
    }
}

/// Thin QR with the triangular factor's diagonal made real and nonnegative.
pub fn qr_decompose(m: &DMatrix<C64>) -> (DMatrix<C64>, DMatrix<C64>) {
    let qr = m.clone().qr();
    let mut q = qr.q();
    let mut r = qr.r();
    for j in 0..r.nrows().min(r.ncols()) {
        let d = r[(j, j)];
        let mag = d.norm();
        if mag > 0.0 {
            let phase = d / mag;
            q.column_mut(j).scale_mut_c(phase);
            r.row_mut(j).scale_mut_c(phase.conj());
        }
    }
    (q, r)
}

trait ScaleComplex {
    fn scale_mut_c(&mut self, c: C64);
}

impl<S> ScaleComplex for nalgebra::Matrix<C64, nalgebra::Dyn, nalgebra::U1, S>
where
    S: nalgebra::StorageMut<C64, nalgebra::Dyn, nalgebra::U1>,
{
    fn scale_mut_c(&mut self, c: C64) {
        for z in self.iter_mut() {
            *z *= c;
        }
    }
}

impl<S> ScaleComplex for nalgebra::Matrix<C64, nalgebra::U1, nalgebra::Dyn, S>
where
    S: nalgebra::StorageMut<C64, nalgebra::U1, nalgebra::Dyn>,
{
    fn scale_mut_c(&mut self, c: C64) {
        for z in self.iter_mut() {
            *z *= c;
        }
    }
}

/// Orthonormalizes the columns of a tall matrix, preserving their span.
pub fn qr_isometrize(m: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    let (rows, cols) = m.shape();
    if rows < cols {
        return Err(LpdoError::WideMatrix { rows, cols });
    }
    Ok(qr_decompose(m).0)
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues descending.
///
/// Returns the eigenvalues and a matrix whose columns are the matching
/// eigenvectors.
pub fn hermitian_eigh(m: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let herm = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = herm.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(m.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Dense complex product through the packed gemm kernel.
pub fn matmul(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    let (m, k) = a.shape();
    let (k2, n) = b.shape();
    assert_eq!(k, k2, "inner dimensions differ");
    let mut c = DMatrix::<C64>::zeros(m, n);
    if m == 0 || n == 0 || k == 0 {
        return c;
    }
    // SAFETY: column-major buffers of exactly m*k, k*n, m*n Complex<f64>
    // (layout-identical to [f64; 2]) with matching strides.
    unsafe {
        matrixmultiply::zgemm(
            matrixmultiply::CGemmOption::Standard,
            matrixmultiply::CGemmOption::Standard,
            m,
            k,
            n,
            [1.0, 0.0],
            a.as_ptr() as *const [f64; 2],
            1,
            m as isize,
            b.as_ptr() as *const [f64; 2],
            1,
            k as isize,
            [0.0, 0.0],
            c.as_mut_ptr() as *mut [f64; 2],
            1,
            m as isize,
        );
    }
    c
}
