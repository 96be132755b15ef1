//! Entropy objectives of a two-site block under a Kraus-leg isometry.
//!
//! The block `B[s_i, s_j, chi_l, chi_r, k_i, k_j]` is read as a pure state
//! of its purification. An isometry `V` acts on the fused Kraus leg
//! `c = k_i + kappa_i * k_j` (`k_i` fastest) by right multiplication,
//! `B'[.., c'] = sum_c B[.., c] V[c, c']`, and the entropy of the
//! bipartition `(s_i, chi_l, k_i') | (s_j, chi_r, k_j')` is returned.
//!
//! `S_sr = -ln Tr(rho~^2)` needs only the Gram matrix of the reshaped
//! state; `S_vn` needs its eigenvalues. Both are evaluated on the smaller
//! side of the bipartition.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::{isometry_defect, Objective, ISOMETRY_TOLERANCE};
use crate::chain::LpdoChain;
use crate::error::{LpdoError, Result};
use crate::tensor::{matmul, DenseTensor, IndexId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EntropyKind {
    #[serde(rename = "s_sr")]
    SecondRenyi,
    #[serde(rename = "s_vn")]
    VonNeumann,
}

impl EntropyKind {
    pub fn label(self) -> &'static str {
        match self {
            EntropyKind::SecondRenyi => "s_sr",
            EntropyKind::VonNeumann => "s_vn",
        }
    }
}

impl std::str::FromStr for EntropyKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "s_sr" | "sr" | "renyi" => Ok(EntropyKind::SecondRenyi),
            "s_vn" | "vn" | "von-neumann" => Ok(EntropyKind::VonNeumann),
            other => Err(format!("unknown objective '{other}' (expected s_sr or s_vn)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveValue {
    pub kind: EntropyKind,
    pub value: f64,
}

/// `-ln sum p_j^2` of a probability vector (normalized internally).
pub fn renyi2_entropy(p: &[f64]) -> f64 {
    let total: f64 = p.iter().sum();
    -(p.iter().map(|x| (x / total).powi(2)).sum::<f64>()).ln()
}

/// `-sum p_j ln p_j` of a probability vector (normalized internally).
pub fn von_neumann_entropy(p: &[f64]) -> f64 {
    let total: f64 = p.iter().sum();
    p.iter()
        .map(|x| x / total)
        .filter(|&x| x > 0.0)
        .map(|x| -x * x.ln())
        .sum()
}

/// A two-site block flattened to `rows (s_i, chi_l, s_j, chi_r)` by
/// `cols (k_j, k_i)`, i.e. the fused Kraus index with `k_i` fastest.
#[derive(Clone, Debug)]
pub struct BlockMatrix {
    pub matrix: DMatrix<C64>,
    pub site: usize,
    pub chi_l: usize,
    pub chi_r: usize,
    pub kappa_i: usize,
    pub kappa_j: usize,
    rows: Vec<crate::tensor::Index>,
    cols: Vec<crate::tensor::Index>,
}

impl BlockMatrix {
    /// `block` must carry the ids of [`LpdoChain::block_ids`] for bond `i`.
    pub fn from_block(block: &DenseTensor, i: usize) -> Result<Self> {
        let [si, sj, l, r, ki, kj] = LpdoChain::block_ids(i);
        let t = block.permute(&[si, l, sj, r, kj, ki])?;
        let mat = t.matricize(&[si, l, sj, r])?;
        let dim = |id: IndexId| t.dim_of(id);
        Ok(Self {
            matrix: mat.matrix,
            site: i,
            chi_l: dim(l)?,
            chi_r: dim(r)?,
            kappa_i: dim(ki)?,
            kappa_j: dim(kj)?,
            rows: mat.rows,
            cols: mat.cols,
        })
    }

    pub fn kappa_c(&self) -> usize {
        self.kappa_i * self.kappa_j
    }

    /// `B V` as a block tensor with the chain's leg order.
    pub fn apply(&self, v: &DMatrix<C64>) -> Result<DenseTensor> {
        if v.shape() != (self.kappa_c(), self.kappa_c()) {
            return Err(LpdoError::ShapeMismatch(format!(
                "isometry must be {k}x{k}",
                k = self.kappa_c()
            )));
        }
        let bv = matmul(&self.matrix, v);
        DenseTensor::from_matrix(&bv, self.rows.clone(), self.cols.clone())?
            .permute(&LpdoChain::block_ids(self.site))
    }
}

/// An entropy objective `V -> S(B V)` for one block, with exact
/// finite-difference probing that reuses the Gram matrix of `B V`.
#[derive(Clone, Debug)]
pub struct BlockObjective {
    kind: EntropyKind,
    b: DMatrix<C64>,
    dx: usize,
    dy: usize,
    kappa_i: usize,
    kappa_j: usize,
    /// Work with `M^T` so that the Gram matrix lives on the smaller side.
    transposed: bool,
}

/// Rows of the Gram side and columns of the reshaped state touched by a
/// perturbation of one output column of `V`.
struct Probe {
    rows: Vec<usize>,
    cols: Vec<usize>,
}

impl BlockObjective {
    pub fn new(block: &BlockMatrix, kind: EntropyKind) -> Self {
        let dx = 2 * block.chi_l;
        let dy = 2 * block.chi_r;
        Self {
            kind,
            b: block.matrix.clone(),
            dx,
            dy,
            kappa_i: block.kappa_i,
            kappa_j: block.kappa_j,
            transposed: dx * block.kappa_i > dy * block.kappa_j,
        }
    }

    pub fn kind(&self) -> EntropyKind {
        self.kind
    }

    pub fn kappa_c(&self) -> usize {
        self.kappa_i * self.kappa_j
    }

    fn check(&self, v: &DMatrix<C64>) -> Result<()> {
        let k = self.kappa_c();
        if v.shape() != (k, k) {
            return Err(LpdoError::ShapeMismatch(format!("isometry must be {k}x{k}")));
        }
        Ok(())
    }

    /// The state `B V` reshaped to `(x, k_i) x (y, k_j)`, or its transpose.
    fn reshaped(&self, v: &DMatrix<C64>) -> DMatrix<C64> {
        let bv = matmul(&self.b, v);
        let (dx, dy, ki, kj) = (self.dx, self.dy, self.kappa_i, self.kappa_j);
        let mut m = if self.transposed {
            DMatrix::zeros(dy * kj, dx * ki)
        } else {
            DMatrix::zeros(dx * ki, dy * kj)
        };
        for x in 0..dx {
            for y in 0..dy {
                for bj in 0..kj {
                    for bi in 0..ki {
                        let z = bv[(x * dy + y, bi + ki * bj)];
                        let (r, c) = (x * ki + bi, y * kj + bj);
                        if self.transposed {
                            m[(c, r)] = z;
                        } else {
                            m[(r, c)] = z;
                        }
                    }
                }
            }
        }
        m
    }

    fn entropy_of_gram(&self, g: &DMatrix<C64>) -> f64 {
        match self.kind {
            EntropyKind::SecondRenyi => {
                let t1 = g.trace().re;
                let t2: f64 = g.iter().map(|z| z.norm_sqr()).sum();
                -(t2 / (t1 * t1)).ln()
            }
            EntropyKind::VonNeumann => {
                let ev: Vec<f64> = g.clone().symmetric_eigenvalues().iter().map(|&x| x.max(0.0)).collect();
                von_neumann_entropy(&ev)
            }
        }
    }

    fn probe_layout(&self, b: usize) -> Probe {
        let (bi, bj) = (b % self.kappa_i, b / self.kappa_i);
        let xs: Vec<usize> = (0..self.dx).map(|x| x * self.kappa_i + bi).collect();
        let ys: Vec<usize> = (0..self.dy).map(|y| y * self.kappa_j + bj).collect();
        if self.transposed {
            Probe { rows: ys, cols: xs }
        } else {
            Probe { rows: xs, cols: ys }
        }
    }

    /// Inverse of [`Self::reshaped`], back to `rows (x, y)` by `cols (k_j, k_i)`.
    fn unreshaped(&self, m: &DMatrix<C64>) -> DMatrix<C64> {
        let (dx, dy, ki, kj) = (self.dx, self.dy, self.kappa_i, self.kappa_j);
        let mut bv = DMatrix::zeros(dx * dy, ki * kj);
        for x in 0..dx {
            for y in 0..dy {
                for bj in 0..kj {
                    for bi in 0..ki {
                        let (r, c) = (x * ki + bi, y * kj + bj);
                        bv[(x * dy + y, bi + ki * bj)] = if self.transposed { m[(c, r)] } else { m[(r, c)] };
                    }
                }
            }
        }
        bv
    }

    /// Closed-form ambient gradient `2 B^dagger unreshape(W M)` with
    /// `W = dS/dG`, in the convention of [`super::fd_gradient`].
    pub fn closed_form_gradient(&self, v: &DMatrix<C64>) -> Result<DMatrix<C64>> {
        self.check(v)?;
        let m = self.reshaped(v);
        let g = matmul(&m, &m.adjoint());
        let t1 = g.trace().re;
        let n = g.nrows();
        let w = match self.kind {
            EntropyKind::SecondRenyi => {
                let t2: f64 = g.iter().map(|z| z.norm_sqr()).sum();
                DMatrix::identity(n, n) * C64::new(2.0 / t1, 0.0) - &g * C64::new(2.0 / t2, 0.0)
            }
            EntropyKind::VonNeumann => {
                let eig = g.clone().symmetric_eigen();
                let p: Vec<f64> = eig.eigenvalues.iter().map(|&x| x.max(0.0) / t1).collect();
                let s = von_neumann_entropy(&p);
                let diag: Vec<C64> = p
                    .iter()
                    .map(|&q| if q > 0.0 { C64::new(-(q.ln() + s) / t1, 0.0) } else { C64::new(0.0, 0.0) })
                    .collect();
                let u = &eig.eigenvectors;
                let scaled = DMatrix::from_fn(n, n, |r, c| u[(r, c)] * diag[c]);
                matmul(&scaled, &u.adjoint())
            }
        };
        let wm = matmul(&w, &m);
        Ok(matmul(&self.b.adjoint(), &self.unreshaped(&wm)) * C64::new(2.0, 0.0))
    }

    /// Column `a` of `B` reshaped to the perturbation block in Gram-side
    /// orientation.
    fn perturbation(&self, a: usize) -> DMatrix<C64> {
        if self.transposed {
            DMatrix::from_fn(self.dy, self.dx, |y, x| self.b[(x * self.dy + y, a)])
        } else {
            DMatrix::from_fn(self.dx, self.dy, |x, y| self.b[(x * self.dy + y, a)])
        }
    }
}

impl Objective for BlockObjective {
    fn value(&self, v: &DMatrix<C64>) -> Result<f64> {
        self.check(v)?;
        let m = self.reshaped(v);
        let g = matmul(&m, &m.adjoint());
        Ok(self.entropy_of_gram(&g))
    }

    fn probes(&self, v: &DMatrix<C64>, eps: f64) -> Result<Vec<[f64; 4]>> {
        self.check(v)?;
        let m = self.reshaped(v);
        let g = matmul(&m, &m.adjoint());
        let t1 = g.trace().re;
        let t2: f64 = g.iter().map(|z| z.norm_sqr()).sum();
        let k = self.kappa_c();
        let deltas = [
            C64::new(eps, 0.0),
            C64::new(-eps, 0.0),
            C64::new(0.0, eps),
            C64::new(0.0, -eps),
        ];
        let layouts: Vec<Probe> = (0..k).map(|b| self.probe_layout(b)).collect();
        // rows of M^dagger restricted to the touched columns, per output index
        let mc_adj: Vec<DMatrix<C64>> = layouts
            .iter()
            .map(|p| DMatrix::from_fn(p.cols.len(), m.nrows(), |u, r| m[(r, p.cols[u])].conj()))
            .collect();
        let blocks: Vec<DMatrix<C64>> = (0..k).map(|a| self.perturbation(a)).collect();
        let mut out = vec![[0.0; 4]; k * k];
        for b in 0..k {
            let p = &layouts[b];
            let n = p.rows.len();
            for a in 0..k {
                let y = &blocks[a];
                // Z = X M^dagger is supported on the touched rows; K = X X^dagger
                // on the touched diagonal block.
                let zr = matmul(y, &mc_adj[b]);
                let kb = matmul(y, &y.adjoint());
                let slot = &mut out[b * k + a];
                match self.kind {
                    EntropyKind::SecondRenyi => {
                        let mut tr_z = C64::new(0.0, 0.0);
                        let mut tr_gz = C64::new(0.0, 0.0);
                        let mut tr_zz = C64::new(0.0, 0.0);
                        let mut tr_zk = C64::new(0.0, 0.0);
                        let mut tr_gk = C64::new(0.0, 0.0);
                        for u in 0..n {
                            tr_z += zr[(u, p.rows[u])];
                            for r in 0..g.nrows() {
                                tr_gz += g[(r, p.rows[u])] * zr[(u, r)];
                            }
                            for w in 0..n {
                                tr_zz += zr[(u, p.rows[w])] * zr[(w, p.rows[u])];
                                tr_zk += zr[(u, p.rows[w])] * kb[(w, u)];
                                tr_gk += g[(p.rows[w], p.rows[u])] * kb[(u, w)];
                            }
                        }
                        let tr_k = kb.trace().re;
                        let tr_zzd: f64 = zr.iter().map(|z| z.norm_sqr()).sum();
                        let tr_kk: f64 = kb.iter().map(|z| z.norm_sqr()).sum();
                        for (s, d) in deltas.iter().enumerate() {
                            let d2 = d.norm_sqr();
                            let trace = t1 + 2.0 * (d * tr_z).re + d2 * tr_k;
                            let square = t2
                                + 4.0 * (d * tr_gz).re
                                + 2.0 * d2 * tr_gk.re
                                + 2.0 * (d * d * tr_zz).re
                                + 2.0 * d2 * tr_zzd
                                + 4.0 * d2 * (d * tr_zk).re
                                + d2 * d2 * tr_kk;
                            slot[s] = -(square / (trace * trace)).ln();
                        }
                    }
                    EntropyKind::VonNeumann => {
                        for (s, d) in deltas.iter().enumerate() {
                            let mut gd = g.clone();
                            for u in 0..n {
                                for r in 0..gd.ncols() {
                                    let z = zr[(u, r)] * d;
                                    gd[(p.rows[u], r)] += z;
                                    gd[(r, p.rows[u])] += z.conj();
                                }
                                for w in 0..n {
                                    gd[(p.rows[u], p.rows[w])] += kb[(u, w)] * d.norm_sqr();
                                }
                            }
                            slot[s] = self.entropy_of_gram(&gd);
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    fn exact_gradient(&self, v: &DMatrix<C64>) -> Option<Result<DMatrix<C64>>> {
        Some(self.closed_form_gradient(v))
    }
}

fn checked_value(block: &DenseTensor, i: usize, v: &DMatrix<C64>, kind: EntropyKind) -> Result<ObjectiveValue> {
    let bm = BlockMatrix::from_block(block, i)?;
    if v.shape() != (bm.kappa_c(), bm.kappa_c()) {
        return Err(LpdoError::ShapeMismatch(format!(
            "isometry must be {k}x{k}",
            k = bm.kappa_c()
        )));
    }
    let defect = isometry_defect(v);
    if defect > ISOMETRY_TOLERANCE {
        return Err(LpdoError::NotIsometric(defect));
    }
    let value = BlockObjective::new(&bm, kind).value(v)?;
    Ok(ObjectiveValue { kind, value })
}

/// `-ln Tr(rho~^2)` of the left half of `B V`, with `rho~` normalized.
/// `block` carries the ids of [`LpdoChain::block_ids`] for bond `i`.
pub fn objective_s_sr(block: &DenseTensor, i: usize, v: &DMatrix<C64>) -> Result<ObjectiveValue> {
    checked_value(block, i, v, EntropyKind::SecondRenyi)
}

/// `-sum lambda ln lambda` over the normalized squared singular values of
/// `B V` across the bond.
pub fn objective_s_vn(block: &DenseTensor, i: usize, v: &DMatrix<C64>) -> Result<ObjectiveValue> {
    checked_value(block, i, v, EntropyKind::VonNeumann)
}
