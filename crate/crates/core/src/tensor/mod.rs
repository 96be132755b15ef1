//! Dense complex tensors with labeled indices.
//!
//! A [`DenseTensor`] is an ordered list of [`Index`] labels plus a flat
//! row-major buffer (first index slowest). Every operation that joins or
//! reshapes tensors is expressed through index ids, never through axis
//! positions, so the storage order stays an internal detail.

mod linalg;

use std::borrow::Cow;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{LpdoError, Result};

pub use linalg::{
    hermitian_eigh, matmul, qr_decompose, qr_isometrize, svd, svd_truncate, svd_truncate_labeled,
    NormMode, SvdOutcome, TruncationPolicy,
};
pub(crate) use linalg::select;

const TAG_SHIFT: u32 = 56;
const PRIME_SHIFT: u32 = 48;
const PRIME_MASK: u64 = 0xff << PRIME_SHIFT;
const POSITION_MASK: u64 = (1 << PRIME_SHIFT) - 1;
const TAG_PHYSICAL: u64 = 1;
const TAG_BOND: u64 = 2;
const TAG_KRAUS: u64 = 3;
const TAG_FRESH: u64 = 4;

static NEXT_FRESH: AtomicU64 = AtomicU64::new(1);

/// Identifier of a tensor leg. Two legs contract iff their ids match.
///
/// Ids for chain legs are structural (`physical(i)`, `bond(p)`, `kraus(i)`),
/// so identical chains carry identical ids. Prime levels give distinct copies
/// of the same leg for bra/ket layers of a contraction.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IndexId(pub u64);

impl IndexId {
    fn tagged(tag: u64, position: usize) -> Self {
        IndexId((tag << TAG_SHIFT) | (position as u64 & POSITION_MASK))
    }

    pub fn physical(site: usize) -> Self {
        Self::tagged(TAG_PHYSICAL, site)
    }

    /// Bond `p` sits to the left of site `p`; bonds `0` and `N` are the
    /// dimension-1 boundary legs.
    pub fn bond(position: usize) -> Self {
        Self::tagged(TAG_BOND, position)
    }

    pub fn kraus(site: usize) -> Self {
        Self::tagged(TAG_KRAUS, site)
    }

    /// A process-unique id for scratch legs that never end up in a chain.
    pub fn fresh() -> Self {
        let n = NEXT_FRESH.fetch_add(1, Ordering::Relaxed);
        Self::tagged(TAG_FRESH, n as usize)
    }

    pub fn prime(self, level: u8) -> Self {
        IndexId((self.0 & !PRIME_MASK) | ((level as u64) << PRIME_SHIFT))
    }

    pub fn prime_level(self) -> u8 {
        ((self.0 & PRIME_MASK) >> PRIME_SHIFT) as u8
    }
}

impl fmt::Debug for IndexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for IndexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = self.0 >> TAG_SHIFT;
        let pos = self.0 & POSITION_MASK;
        let name = match tag {
            TAG_PHYSICAL => "s",
            TAG_BOND => "chi",
            TAG_KRAUS => "kappa",
            TAG_FRESH => "tmp",
            _ => "idx",
        };
        write!(f, "{name}{pos}")?;
        for _ in 0..self.prime_level() {
            f.write_str("'")?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IndexRole {
    Physical,
    Bond,
    Kraus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Index {
    id: IndexId,
    dim: usize,
    role: IndexRole,
}

impl Index {
    pub fn new(id: IndexId, dim: usize, role: IndexRole) -> Result<Self> {
        if dim == 0 {
            return Err(LpdoError::ZeroDimension);
        }
        Ok(Self { id, dim, role })
    }

    pub fn fresh(dim: usize, role: IndexRole) -> Result<Self> {
        Self::new(IndexId::fresh(), dim, role)
    }

    pub fn id(&self) -> IndexId {
        self.id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn role(&self) -> IndexRole {
        self.role
    }

    pub fn with_id(self, id: IndexId) -> Self {
        Self { id, ..self }
    }

    pub fn primed(self, level: u8) -> Self {
        self.with_id(self.id.prime(level))
    }

    pub fn contractible(&self, other: &Index) -> bool {
        self.id == other.id && self.dim == other.dim
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor {
    indices: Vec<Index>,
    data: Vec<C64>,
}

fn grid_size(indices: &[Index]) -> usize {
    indices.iter().map(Index::dim).product()
}

fn row_major_strides(dims: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * dims[k + 1];
    }
    strides
}

/// Reorders row-major `data` so that output axis `j` is input axis `perm[j]`.
fn permute_data(data: &[C64], dims: &[usize], perm: &[usize]) -> Vec<C64> {
    let rank = dims.len();
    if rank <= 1 || perm.iter().enumerate().all(|(j, &p)| j == p) {
        return data.to_vec();
    }
    let in_strides = row_major_strides(dims);
    let out_dims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
    let step: Vec<usize> = perm.iter().map(|&p| in_strides[p]).collect();
    let last = rank - 1;
    let inner_dim = out_dims[last];
    let inner_step = step[last];
    let mut out = Vec::with_capacity(data.len());
    let mut counter = vec![0usize; rank];
    let mut offset = 0usize;
    for _ in 0..data.len() / inner_dim {
        if inner_step == 1 {
            out.extend_from_slice(&data[offset..offset + inner_dim]);
        } else {
            out.extend((0..inner_dim).map(|k| data[offset + k * inner_step]));
        }
        let mut ax = last;
        while ax > 0 {
            ax -= 1;
            counter[ax] += 1;
            offset += step[ax];
            if counter[ax] < out_dims[ax] {
                break;
            }
            offset -= step[ax] * out_dims[ax];
            counter[ax] = 0;
        }
    }
    out
}

fn check_distinct(indices: &[Index]) -> Result<()> {
    for (k, a) in indices.iter().enumerate() {
        if indices[..k].iter().any(|b| b.id == a.id) {
            return Err(LpdoError::DuplicateIndex(a.id));
        }
    }
    Ok(())
}

impl DenseTensor {
    pub fn new(indices: Vec<Index>, data: Vec<C64>) -> Result<Self> {
        check_distinct(&indices)?;
        let expected = grid_size(&indices);
        if data.len() != expected {
            return Err(LpdoError::DataLength {
                expected,
                got: data.len(),
            });
        }
        Ok(Self { indices, data })
    }

    pub fn zeros(indices: Vec<Index>) -> Result<Self> {
        let n = grid_size(&indices);
        Self::new(indices, vec![C64::new(0.0, 0.0); n])
    }

    /// Builds a tensor by evaluating `f` at every multi-index, in storage order.
    pub fn from_fn(indices: Vec<Index>, mut f: impl FnMut(&[usize]) -> C64) -> Result<Self> {
        let dims: Vec<usize> = indices.iter().map(Index::dim).collect();
        let total = grid_size(&indices);
        let mut data = Vec::with_capacity(total);
        let mut counter = vec![0usize; dims.len()];
        for _ in 0..total {
            data.push(f(&counter));
            for ax in (0..dims.len()).rev() {
                counter[ax] += 1;
                if counter[ax] < dims[ax] {
                    break;
                }
                counter[ax] = 0;
            }
        }
        Self::new(indices, data)
    }

    pub fn scalar(value: C64) -> Self {
        Self {
            indices: Vec::new(),
            data: vec![value],
        }
    }

    pub fn indices(&self) -> &[Index] {
        &self.indices
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn dims(&self) -> Vec<usize> {
        self.indices.iter().map(Index::dim).collect()
    }

    pub fn rank(&self) -> usize {
        self.indices.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn position(&self, id: IndexId) -> Option<usize> {
        self.indices.iter().position(|ix| ix.id == id)
    }

    pub fn index(&self, id: IndexId) -> Option<&Index> {
        self.indices.iter().find(|ix| ix.id == id)
    }

    pub fn dim_of(&self, id: IndexId) -> Result<usize> {
        self.index(id).map(Index::dim).ok_or(LpdoError::UnknownIndex(id))
    }

    /// Value at a multi-index given in this tensor's index order.
    pub fn get(&self, at: &[usize]) -> C64 {
        let dims = self.dims();
        let offset = at
            .iter()
            .zip(row_major_strides(&dims))
            .map(|(&k, s)| k * s)
            .sum::<usize>();
        self.data[offset]
    }

    /// The single value of a rank-0 (or all-dimension-1) tensor.
    pub fn scalar_value(&self) -> Option<C64> {
        (self.data.len() == 1).then(|| self.data[0])
    }

    fn axes_of(&self, ids: &[IndexId]) -> Result<Vec<usize>> {
        ids.iter()
            .map(|&id| self.position(id).ok_or(LpdoError::UnknownIndex(id)))
            .collect()
    }

    /// Reorders the tensor so that its indices appear in the order of `ids`.
    pub fn permute(&self, ids: &[IndexId]) -> Result<DenseTensor> {
        if ids.len() != self.indices.len() {
            return Err(LpdoError::ShapeMismatch(format!(
                "permutation lists {} ids for a rank-{} tensor",
                ids.len(),
                self.indices.len()
            )));
        }
        let perm = self.axes_of(ids)?;
        check_distinct(&perm.iter().map(|&p| self.indices[p]).collect::<Vec<_>>())?;
        Ok(self.permuted_by_axes(&perm))
    }

    fn permuted_by_axes(&self, perm: &[usize]) -> DenseTensor {
        let data = permute_data(&self.data, &self.dims(), perm);
        let indices = perm.iter().map(|&p| self.indices[p]).collect();
        DenseTensor { indices, data }
    }

    fn data_in_axis_order(&self, perm: &[usize]) -> Cow<'_, [C64]> {
        if perm.iter().enumerate().all(|(j, &p)| j == p) {
            Cow::Borrowed(&self.data)
        } else {
            Cow::Owned(permute_data(&self.data, &self.dims(), perm))
        }
    }

    pub fn conj(&self) -> DenseTensor {
        DenseTensor {
            indices: self.indices.clone(),
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn scale(&self, factor: C64) -> DenseTensor {
        DenseTensor {
            indices: self.indices.clone(),
            data: self.data.iter().map(|z| z * factor).collect(),
        }
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Renames leg `from` to `to`, keeping its dimension and role.
    pub fn relabel(&self, from: IndexId, to: IndexId) -> Result<DenseTensor> {
        self.relabel_many(&[(from, to)])
    }

    pub fn relabel_many(&self, pairs: &[(IndexId, IndexId)]) -> Result<DenseTensor> {
        let mut indices = self.indices.clone();
        for &(from, to) in pairs {
            let pos = self.position(from).ok_or(LpdoError::UnknownIndex(from))?;
            indices[pos] = indices[pos].with_id(to);
        }
        check_distinct(&indices)?;
        Ok(DenseTensor {
            indices,
            data: self.data.clone(),
        })
    }

    /// Reshapes the tensor into a matrix whose rows enumerate `row_ids`
    /// (in the given order, row-major) and whose columns enumerate the
    /// remaining indices in their current order.
    pub fn matricize(&self, row_ids: &[IndexId]) -> Result<Matricized> {
        let row_axes = self.axes_of(row_ids)?;
        check_distinct(&row_axes.iter().map(|&p| self.indices[p]).collect::<Vec<_>>())?;
        let col_axes: Vec<usize> = (0..self.rank()).filter(|a| !row_axes.contains(a)).collect();
        let perm: Vec<usize> = row_axes.iter().chain(&col_axes).copied().collect();
        let rows: Vec<Index> = row_axes.iter().map(|&p| self.indices[p]).collect();
        let cols: Vec<Index> = col_axes.iter().map(|&p| self.indices[p]).collect();
        let nr = grid_size(&rows);
        let nc = grid_size(&cols);
        let data = self.data_in_axis_order(&perm);
        Ok(Matricized {
            matrix: DMatrix::from_row_slice(nr, nc, &data),
            rows,
            cols,
        })
    }

    /// Inverse of [`matricize`](Self::matricize): folds a matrix back into a
    /// tensor whose indices are `rows` followed by `cols`.
    pub fn from_matrix(matrix: &DMatrix<C64>, rows: Vec<Index>, cols: Vec<Index>) -> Result<Self> {
        let (nr, nc) = matrix.shape();
        if nr != grid_size(&rows) || nc != grid_size(&cols) {
            return Err(LpdoError::ShapeMismatch(format!(
                "{nr}x{nc} matrix cannot fold onto {}x{} index grids",
                grid_size(&rows),
                grid_size(&cols)
            )));
        }
        let data = matrix.transpose().as_slice().to_vec();
        let indices = rows.into_iter().chain(cols).collect();
        Self::new(indices, data)
    }
}

/// A matrix view of a tensor together with the labels needed to fold it back.
#[derive(Clone, Debug)]
pub struct Matricized {
    pub matrix: DMatrix<C64>,
    pub rows: Vec<Index>,
    pub cols: Vec<Index>,
}

impl Matricized {
    pub fn into_tensor(self) -> Result<DenseTensor> {
        DenseTensor::from_matrix(&self.matrix, self.rows, self.cols)
    }
}

/// Row-major `m x k` times `k x n`.
fn gemm_row_major(m: usize, k: usize, n: usize, a: &[C64], b: &[C64]) -> Vec<C64> {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    let mut c = vec![C64::new(0.0, 0.0); m * n];
    // SAFETY: Complex<f64> is repr(C) { re, im }, layout-identical to [f64; 2];
    // the buffers hold exactly m*k, k*n and m*n elements with the row-major
    // strides passed below.
    unsafe {
        matrixmultiply::zgemm(
            matrixmultiply::CGemmOption::Standard,
            matrixmultiply::CGemmOption::Standard,
            m,
            k,
            n,
            [1.0, 0.0],
            a.as_ptr() as *const [f64; 2],
            k as isize,
            1,
            b.as_ptr() as *const [f64; 2],
            n as isize,
            1,
            [0.0, 0.0],
            c.as_mut_ptr() as *mut [f64; 2],
            n as isize,
            1,
        );
    }
    c
}

/// Sums over every index id shared by `a` and `b`.
///
/// The result carries `a`'s free indices (in `a`'s order) followed by `b`'s
/// free indices. With no shared ids this is the outer product.
pub fn contract(a: &DenseTensor, b: &DenseTensor) -> Result<DenseTensor> {
    let mut shared_a = Vec::new();
    let mut shared_b = Vec::new();
    for (pa, ia) in a.indices.iter().enumerate() {
        if let Some(pb) = b.position(ia.id) {
            let ib = &b.indices[pb];
            if ia.dim != ib.dim {
                return Err(LpdoError::DimensionMismatch {
                    id: ia.id,
                    left: ia.dim,
                    right: ib.dim,
                });
            }
            shared_a.push(pa);
            shared_b.push(pb);
        }
    }
    let free_a: Vec<usize> = (0..a.rank()).filter(|p| !shared_a.contains(p)).collect();
    let free_b: Vec<usize> = (0..b.rank()).filter(|p| !shared_b.contains(p)).collect();

    let perm_a: Vec<usize> = free_a.iter().chain(&shared_a).copied().collect();
    let perm_b: Vec<usize> = shared_b.iter().chain(&free_b).copied().collect();
    let m: usize = free_a.iter().map(|&p| a.indices[p].dim).product();
    let k: usize = shared_a.iter().map(|&p| a.indices[p].dim).product();
    let n: usize = free_b.iter().map(|&p| b.indices[p].dim).product();

    let da = a.data_in_axis_order(&perm_a);
    let db = b.data_in_axis_order(&perm_b);
    let data = gemm_row_major(m, k, n, &da, &db);
    let indices: Vec<Index> = free_a
        .iter()
        .map(|&p| a.indices[p])
        .chain(free_b.iter().map(|&p| b.indices[p]))
        .collect();
    DenseTensor::new(indices, data)
}
