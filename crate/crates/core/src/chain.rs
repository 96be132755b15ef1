//! The LPDO chain: site tensors, gauge moves, and physical updates.
//!
//! Site `i` carries legs `[s_i, chi_i, chi_{i+1}, kappa_i]` in that order,
//! using the structural ids `IndexId::physical(i)`, `IndexId::bond(i)`,
//! `IndexId::bond(i + 1)` and `IndexId::kraus(i)`. Interior bond `b`
//! (0-based, `0 <= b < N - 1`) joins sites `b` and `b + 1` and carries the
//! id `IndexId::bond(b + 1)`.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::channel::KrausChannel;
use crate::error::{LpdoError, Result};
use crate::gates;
use crate::tensor::{
    contract, hermitian_eigh, qr_decompose, svd_truncate_labeled, DenseTensor, Index, IndexId,
    IndexRole, NormMode, TruncationPolicy,
};

pub const LOCAL_DIM: usize = 2;

/// Tolerance on `U^dagger U = 1` for gates handed to the chain.
pub const UNITARY_TOLERANCE: f64 = 1e-12;

/// Probabilities below this fraction of the local trace are dropped when a
/// channel is applied, whatever the cutoff.
pub const ZERO_PROBABILITY: f64 = 1e-14;

/// Default L1 cutoff for channel application.
pub const DEFAULT_KRAUS_CUTOFF: f64 = 1e-12;

pub(crate) fn site_ids(i: usize) -> [IndexId; 4] {
    [
        IndexId::physical(i),
        IndexId::bond(i),
        IndexId::bond(i + 1),
        IndexId::kraus(i),
    ]
}

fn site_indices(i: usize, chi_l: usize, chi_r: usize, kappa: usize) -> Result<Vec<Index>> {
    Ok(vec![
        Index::new(IndexId::physical(i), LOCAL_DIM, IndexRole::Physical)?,
        Index::new(IndexId::bond(i), chi_l, IndexRole::Bond)?,
        Index::new(IndexId::bond(i + 1), chi_r, IndexRole::Bond)?,
        Index::new(IndexId::kraus(i), kappa, IndexRole::Kraus)?,
    ])
}

/// Direction in which the orthogonality center is moved.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Right,
    Left,
}

/// What a truncating split did to one bond.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitReport {
    pub bond: usize,
    pub dim_before: usize,
    pub dim_after: usize,
    pub discarded_weight: f64,
    /// Full singular spectrum across the bond before truncation.
    pub raw_spectrum: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChannelReport {
    pub kraus_before: usize,
    pub kraus_after: usize,
    pub discarded_probability: f64,
    pub probabilities: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpdoChain {
    sites: Vec<DenseTensor>,
    center: Option<usize>,
}

impl LpdoChain {
    /// Assembles a chain from site tensors carrying the structural ids of
    /// their position. Legs are reordered into the canonical layout; the
    /// claimed `center` is trusted, not verified.
    pub fn from_sites(sites: Vec<DenseTensor>, center: Option<usize>) -> Result<Self> {
        let n = sites.len();
        if n == 0 {
            return Err(LpdoError::EmptyChain);
        }
        if let Some(c) = center {
            if c >= n {
                return Err(LpdoError::SiteOutOfRange { site: c, len: n });
            }
        }
        let mut canonical = Vec::with_capacity(n);
        for (i, t) in sites.into_iter().enumerate() {
            if t.rank() != 4 {
                return Err(LpdoError::MalformedChain(format!("site {i} has rank {}", t.rank())));
            }
            let t = t
                .permute(&site_ids(i))
                .map_err(|e| LpdoError::MalformedChain(format!("site {i}: {e}")))?;
            let dims = t.dims();
            if dims[0] != LOCAL_DIM {
                return Err(LpdoError::MalformedChain(format!(
                    "site {i} has physical dimension {}",
                    dims[0]
                )));
            }
            canonical.push(t);
        }
        if canonical[0].dims()[1] != 1 || canonical[n - 1].dims()[2] != 1 {
            return Err(LpdoError::MalformedChain("boundary bonds must have dimension 1".into()));
        }
        for b in 0..n - 1 {
            let left = canonical[b].dims()[2];
            let right = canonical[b + 1].dims()[1];
            if left != right {
                return Err(LpdoError::DimensionMismatch {
                    id: IndexId::bond(b + 1),
                    left,
                    right,
                });
            }
        }
        Ok(Self {
            sites: canonical,
            center,
        })
    }

    /// The optimal LPDO of the maximally mixed state: `A = delta_{s,kappa}/sqrt 2`
    /// at every site, all bonds of dimension 1.
    pub fn optimal_lpmm(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(LpdoError::EmptyChain);
        }
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let sites = (0..n)
            .map(|i| {
                DenseTensor::from_fn(site_indices(i, 1, 1, LOCAL_DIM)?, |k| {
                    C64::new(if k[0] == k[3] { h } else { 0.0 }, 0.0)
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            sites,
            center: Some(0),
        })
    }

    /// A seeded random pure state (`kappa = 1`) with bond dimensions
    /// `min(chi_max, 2^b, 2^(N-b))`, left-orthonormalized and normalized,
    /// with the center on the last site.
    pub fn random_pure(n: usize, chi_max: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(LpdoError::EmptyChain);
        }
        if chi_max == 0 {
            return Err(LpdoError::Precondition("chi_max must be at least 1".into()));
        }
        let cap = |p: usize| -> usize {
            let pow = |e: usize| 1usize.checked_shl(e as u32).unwrap_or(usize::MAX);
            chi_max.min(pow(p)).min(pow(n - p))
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sites = Vec::with_capacity(n);
        for i in 0..n {
            let indices = site_indices(i, cap(i), cap(i + 1), 1)?;
            sites.push(DenseTensor::from_fn(indices, |_| {
                C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
            })?);
        }
        let mut chain = Self {
            sites,
            center: Some(0),
        };
        for i in 0..n - 1 {
            chain.move_center_right(i)?;
        }
        chain.normalize()?;
        Ok(chain)
    }

    /// Product of pure single-qubit states, each given as an unnormalized
    /// amplitude pair.
    pub fn product_state(states: &[[C64; 2]]) -> Result<Self> {
        if states.is_empty() {
            return Err(LpdoError::EmptyChain);
        }
        let sites = states
            .iter()
            .enumerate()
            .map(|(i, amp)| {
                let norm = (amp[0].norm_sqr() + amp[1].norm_sqr()).sqrt();
                if norm == 0.0 {
                    return Err(LpdoError::ZeroTensor);
                }
                DenseTensor::from_fn(site_indices(i, 1, 1, 1)?, |k| amp[k[0]] / norm)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            sites,
            center: Some(0),
        })
    }

    pub fn n_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn local_dim(&self) -> usize {
        LOCAL_DIM
    }

    pub fn site(&self, i: usize) -> &DenseTensor {
        &self.sites[i]
    }

    pub fn sites(&self) -> &[DenseTensor] {
        &self.sites
    }

    pub fn center(&self) -> Option<usize> {
        self.center
    }

    /// Dimension of interior bond `b` (between sites `b` and `b + 1`).
    pub fn bond_dim(&self, b: usize) -> usize {
        self.sites[b].dims()[2]
    }

    pub fn bond_dims(&self) -> Vec<usize> {
        (0..self.n_sites() - 1).map(|b| self.bond_dim(b)).collect()
    }

    pub fn kraus_dims(&self) -> Vec<usize> {
        self.sites.iter().map(|t| t.dims()[3]).collect()
    }

    /// Arithmetic mean of the interior bond dimensions (1 for a single site).
    pub fn chi_mean(&self) -> f64 {
        let dims = self.bond_dims();
        if dims.is_empty() {
            return 1.0;
        }
        dims.iter().sum::<usize>() as f64 / dims.len() as f64
    }

    pub fn chi_max(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    fn check_site(&self, i: usize) -> Result<()> {
        if i >= self.n_sites() {
            return Err(LpdoError::SiteOutOfRange {
                site: i,
                len: self.n_sites(),
            });
        }
        Ok(())
    }

    fn check_bond(&self, b: usize) -> Result<()> {
        if b + 1 >= self.n_sites() {
            return Err(LpdoError::BondOutOfRange {
                bond: b,
                len: self.n_sites(),
            });
        }
        Ok(())
    }

    /// Stores `t` (carrying site `i`'s ids in any order) as site `i`.
    fn store(&mut self, i: usize, t: DenseTensor) -> Result<()> {
        self.sites[i] = t.permute(&site_ids(i))?;
        Ok(())
    }

    /// Moves the center from site `i` to `i + 1` with a thin QR.
    fn move_center_right(&mut self, i: usize) -> Result<()> {
        let [s, l, r, k] = site_ids(i);
        let mat = self.sites[i].matricize(&[s, l, k])?;
        let (q, rf) = qr_decompose(&mat.matrix);
        let tmp = IndexId::fresh();
        let new_bond = Index::new(tmp, q.ncols(), IndexRole::Bond)?;
        let left = DenseTensor::from_matrix(&q, mat.rows, vec![new_bond])?;
        let carry = DenseTensor::from_matrix(&rf, vec![new_bond], mat.cols)?;
        let next = contract(&carry, &self.sites[i + 1])?;
        self.store(i, left.relabel(tmp, r)?)?;
        self.store(i + 1, next.relabel(tmp, r)?)?;
        self.center = Some(i + 1);
        Ok(())
    }

    /// Moves the center from site `i` to `i - 1` with a thin LQ.
    fn move_center_left(&mut self, i: usize) -> Result<()> {
        let [_, l, _, _] = site_ids(i);
        let mat = self.sites[i].matricize(&[l])?;
        let (q, rf) = qr_decompose(&mat.matrix.adjoint());
        let tmp = IndexId::fresh();
        let new_bond = Index::new(tmp, q.ncols(), IndexRole::Bond)?;
        let right = DenseTensor::from_matrix(&q.adjoint(), vec![new_bond], mat.cols)?;
        let carry = DenseTensor::from_matrix(&rf.adjoint(), mat.rows, vec![new_bond])?;
        let prev = contract(&self.sites[i - 1], &carry)?;
        self.store(i, right.relabel(tmp, l)?)?;
        self.store(i - 1, prev.relabel(tmp, l)?)?;
        self.center = Some(i - 1);
        Ok(())
    }

    /// Brings the chain into mixed canonical form around `target`: sites to
    /// the left are left-isometric over `(s, chi_l, kappa)`, sites to the
    /// right are right-isometric over `(s, chi_r, kappa)`.
    pub fn canonicalize(&mut self, target: usize) -> Result<()> {
        self.check_site(target)?;
        let current = match self.center {
            Some(c) => c,
            None => {
                for i in 0..self.n_sites() - 1 {
                    self.move_center_right(i)?;
                }
                self.center = Some(self.n_sites() - 1);
                self.n_sites() - 1
            }
        };
        for i in current..target {
            self.move_center_right(i)?;
        }
        for i in (target + 1..=current).rev() {
            self.move_center_left(i)?;
        }
        self.center = Some(target);
        Ok(())
    }

    /// Full left-to-right then right-to-left QR pass ending at `target`,
    /// regardless of the current center marker.
    pub fn recanonicalize(&mut self, target: usize) -> Result<()> {
        self.check_site(target)?;
        self.center = None;
        self.canonicalize(target)
    }

    /// Norm of the center tensor, which equals `sqrt(Tr rho)` in canonical form.
    pub fn center_norm(&self) -> Result<f64> {
        let c = self
            .center
            .ok_or_else(|| LpdoError::Precondition("chain has no orthogonality center".into()))?;
        Ok(self.sites[c].norm())
    }

    /// Rescales the center tensor so that `Tr rho = 1`.
    pub fn normalize(&mut self) -> Result<()> {
        let c = match self.center {
            Some(c) => c,
            None => {
                self.canonicalize(0)?;
                0
            }
        };
        let norm = self.sites[c].norm();
        if norm == 0.0 {
            return Err(LpdoError::ZeroTensor);
        }
        self.sites[c] = self.sites[c].scale(C64::new(1.0 / norm, 0.0));
        Ok(())
    }

    /// Truncating move of the center across one bond. The center must sit on
    /// the site the move starts from; the singular spectrum is renormalized
    /// and absorbed into the site it moves to.
    pub fn shift_center(&mut self, direction: Direction, policy: &TruncationPolicy) -> Result<SplitReport> {
        if policy.norm_mode != NormMode::L2 {
            return Err(LpdoError::InvalidPolicy("bond truncation uses the L2 norm".into()));
        }
        let c = self
            .center
            .ok_or_else(|| LpdoError::Precondition("chain has no orthogonality center".into()))?;
        let n = self.n_sites();
        let [s, l, r, k] = site_ids(c);
        let tmp = IndexId::fresh();
        match direction {
            Direction::Right => {
                if c + 1 >= n {
                    return Err(LpdoError::BondOutOfRange { bond: c, len: n });
                }
                let before = self.bond_dim(c);
                let out = svd_truncate_labeled(&self.sites[c], &[s, l, k], policy, tmp)?;
                let next = contract(&out.right_weighted(), &self.sites[c + 1])?;
                self.store(c, out.left.relabel(tmp, r)?)?;
                self.store(c + 1, next.relabel(tmp, r)?)?;
                self.center = Some(c + 1);
                Ok(SplitReport {
                    bond: c,
                    dim_before: before,
                    dim_after: out.kept_rank,
                    discarded_weight: out.discarded_weight,
                    raw_spectrum: out.raw_spectrum,
                })
            }
            Direction::Left => {
                if c == 0 {
                    return Err(LpdoError::BondOutOfRange { bond: 0, len: n });
                }
                let before = self.bond_dim(c - 1);
                let out = svd_truncate_labeled(&self.sites[c], &[l], policy, tmp)?;
                let prev = contract(&self.sites[c - 1], &out.left_weighted())?;
                self.store(c, out.right.relabel(tmp, l)?)?;
                self.store(c - 1, prev.relabel(tmp, l)?)?;
                self.center = Some(c - 1);
                Ok(SplitReport {
                    bond: c - 1,
                    dim_before: before,
                    dim_after: out.kept_rank,
                    discarded_weight: out.discarded_weight,
                    raw_spectrum: out.raw_spectrum,
                })
            }
        }
    }

    /// Leg order of [`two_site_block`](Self::two_site_block).
    pub fn block_ids(i: usize) -> [IndexId; 6] {
        [
            IndexId::physical(i),
            IndexId::physical(i + 1),
            IndexId::bond(i),
            IndexId::bond(i + 2),
            IndexId::kraus(i),
            IndexId::kraus(i + 1),
        ]
    }

    /// Contracts sites `i` and `i + 1` over their shared bond. The center
    /// must be on one of the two sites, so the block carries the full norm.
    pub fn two_site_block(&self, i: usize) -> Result<DenseTensor> {
        self.check_bond(i)?;
        if self.center != Some(i) && self.center != Some(i + 1) {
            return Err(LpdoError::CenterMisplaced {
                center: self.center,
                bond: i,
            });
        }
        contract(&self.sites[i], &self.sites[i + 1])?.permute(&Self::block_ids(i))
    }

    /// Splits a two-site block back into sites `i` and `i + 1` with a
    /// truncated SVD (L2) across the bond; the center ends on `i + 1`.
    ///
    /// `block` must carry the ids of [`block_ids`](Self::block_ids) and
    /// match the outer bond dimensions; its Kraus dimensions may differ
    /// from the current ones.
    pub fn split_block(&mut self, i: usize, block: &DenseTensor, policy: &TruncationPolicy) -> Result<SplitReport> {
        self.check_bond(i)?;
        if policy.norm_mode != NormMode::L2 {
            return Err(LpdoError::InvalidPolicy("bond truncation uses the L2 norm".into()));
        }
        let ids = Self::block_ids(i);
        let block = block.permute(&ids)?;
        let dims = block.dims();
        let outer_l = self.sites[i].dims()[1];
        let outer_r = self.sites[i + 1].dims()[2];
        if dims[2] != outer_l || dims[3] != outer_r {
            return Err(LpdoError::ShapeMismatch(format!(
                "block outer bonds ({}, {}) do not match the chain ({outer_l}, {outer_r})",
                dims[2], dims[3]
            )));
        }
        let before = self.bond_dim(i);
        let tmp = IndexId::fresh();
        let out = svd_truncate_labeled(&block, &[ids[0], ids[2], ids[4]], policy, tmp)?;
        let mid = IndexId::bond(i + 1);
        self.store(i, out.left.relabel(tmp, mid)?)?;
        self.store(i + 1, out.right_weighted().relabel(tmp, mid)?)?;
        self.center = Some(i + 1);
        Ok(SplitReport {
            bond: i,
            dim_before: before,
            dim_after: out.kept_rank,
            discarded_weight: out.discarded_weight,
            raw_spectrum: out.raw_spectrum,
        })
    }

    /// Applies a one-site (2x2) or adjacent two-site (4x4) unitary to the
    /// physical legs. For two sites the first listed site is the most
    /// significant qubit of `u`, and the bond is re-split under `policy`.
    pub fn apply_unitary(&mut self, sites: &[usize], u: &DMatrix<C64>, policy: &TruncationPolicy) -> Result<()> {
        let defect = gates::unitarity_defect(u);
        match *sites {
            [i] => {
                self.check_site(i)?;
                if u.shape() != (LOCAL_DIM, LOCAL_DIM) {
                    return Err(LpdoError::ShapeMismatch("one-site gate must be 2x2".into()));
                }
                if defect > UNITARY_TOLERANCE {
                    return Err(LpdoError::NotUnitary(defect));
                }
                let s = IndexId::physical(i);
                let out = Index::fresh(LOCAL_DIM, IndexRole::Physical)?;
                let phys = Index::new(s, LOCAL_DIM, IndexRole::Physical)?;
                let gate = DenseTensor::from_matrix(u, vec![out], vec![phys])?;
                let t = contract(&gate, &self.sites[i])?.relabel(out.id(), s)?;
                self.store(i, t)
            }
            [i, j] if j == i + 1 => {
                self.check_bond(i)?;
                if u.shape() != (LOCAL_DIM * LOCAL_DIM, LOCAL_DIM * LOCAL_DIM) {
                    return Err(LpdoError::ShapeMismatch("two-site gate must be 4x4".into()));
                }
                if defect > UNITARY_TOLERANCE {
                    return Err(LpdoError::NotUnitary(defect));
                }
                if self.center != Some(i) && self.center != Some(j) {
                    self.canonicalize(i)?;
                }
                let block = self.two_site_block(i)?;
                let (si, sj) = (IndexId::physical(i), IndexId::physical(j));
                let oi = Index::fresh(LOCAL_DIM, IndexRole::Physical)?;
                let oj = Index::fresh(LOCAL_DIM, IndexRole::Physical)?;
                let gate = DenseTensor::from_matrix(
                    u,
                    vec![oi, oj],
                    vec![
                        Index::new(si, LOCAL_DIM, IndexRole::Physical)?,
                        Index::new(sj, LOCAL_DIM, IndexRole::Physical)?,
                    ],
                )?;
                let block = contract(&gate, &block)?.relabel_many(&[(oi.id(), si), (oj.id(), sj)])?;
                self.split_block(i, &block, policy)?;
                Ok(())
            }
            _ => Err(LpdoError::NonAdjacent(sites.to_vec())),
        }
    }

    /// Applies a single-site channel by growing the Kraus leg and
    /// compressing it again through the Hermitian eigendecomposition of the
    /// Kraus-space Gram matrix. The center is moved onto `site` first.
    pub fn apply_channel(&mut self, site: usize, channel: &KrausChannel, policy: &TruncationPolicy) -> Result<ChannelReport> {
        self.check_site(site)?;
        if policy.norm_mode != NormMode::L1 {
            return Err(LpdoError::InvalidPolicy("channel application uses the L1 norm".into()));
        }
        if channel.dim() != LOCAL_DIM {
            return Err(LpdoError::ShapeMismatch("channel must act on one qubit".into()));
        }
        let defect = channel.completeness_defect();
        if defect > crate::channel::CPTP_TOLERANCE {
            return Err(LpdoError::NotCptp(defect));
        }
        self.canonicalize(site)?;
        let [s, l, r, k] = site_ids(site);
        let dims = self.sites[site].dims();
        let (chi_l, chi_r, kappa) = (dims[1], dims[2], dims[3]);
        let ops = channel.operators();

        // X[(s, l, r), (op, kappa)] = sum_s' K_op[s, s'] A[s', l, r, kappa]
        let a = self.sites[site].matricize(&[s])?.matrix;
        let inner = chi_l * chi_r;
        let mut x = DMatrix::<C64>::zeros(LOCAL_DIM * inner, ops.len() * kappa);
        for (op_idx, op) in ops.iter().enumerate() {
            let ka = op * &a;
            for sv in 0..LOCAL_DIM {
                for lr in 0..inner {
                    for kv in 0..kappa {
                        x[(sv * inner + lr, op_idx * kappa + kv)] = ka[(sv, lr * kappa + kv)];
                    }
                }
            }
        }
        let gram = x.adjoint() * &x;
        let (probs, vecs) = hermitian_eigh(&gram);
        let probs: Vec<f64> = probs.into_iter().map(|p| p.max(0.0)).collect();
        let total: f64 = probs.iter().sum();
        let selection = crate::tensor::select(&probs, policy, ZERO_PROBABILITY * total)?;
        let kept = selection.kept;
        let w = vecs.columns(0, kept).into_owned();
        let y = (x * w) * C64::new(selection.rescale.sqrt() * total.sqrt(), 0.0);

        let new_k = Index::new(k, kept, IndexRole::Kraus)?;
        let rows = vec![
            Index::new(s, LOCAL_DIM, IndexRole::Physical)?,
            Index::new(l, chi_l, IndexRole::Bond)?,
            Index::new(r, chi_r, IndexRole::Bond)?,
        ];
        self.store(site, DenseTensor::from_matrix(&y, rows, vec![new_k])?)?;
        Ok(ChannelReport {
            kraus_before: kappa,
            kraus_after: kept,
            discarded_probability: selection.discarded / total,
            probabilities: probs[..kept].iter().map(|p| p / total).collect(),
        })
    }

    /// Bitflip then dephasing at every site, left to right.
    pub fn depolarize(&mut self, gamma_dephasing: f64, gamma_bitflip: f64, kraus_cutoff: f64) -> Result<()> {
        let bitflip = KrausChannel::bitflip(gamma_bitflip)?;
        let dephasing = KrausChannel::dephasing(gamma_dephasing)?;
        let policy = TruncationPolicy::l1(kraus_cutoff)?;
        for i in 0..self.n_sites() {
            self.apply_channel(i, &bitflip, &policy)?;
            self.apply_channel(i, &dephasing, &policy)?;
        }
        Ok(())
    }

    /// Maximal depolarization (`gamma_d = gamma_b = 1/2`), which sends any
    /// state to the maximally mixed one while leaving the bonds untouched.
    pub fn depolarize_to_lpmm(&mut self) -> Result<()> {
        self.depolarize(0.5, 0.5, DEFAULT_KRAUS_CUTOFF)
    }

    /// Multiplies the Kraus leg of site `i` by `v` from the right,
    /// `A'[.., b] = sum_a A[.., a] v[a, b]`. Leaves `rho` invariant iff
    /// `v v^dagger = 1`.
    pub fn apply_kraus_isometry(&mut self, i: usize, v: &DMatrix<C64>) -> Result<()> {
        self.check_site(i)?;
        let kappa = self.sites[i].dims()[3];
        if v.nrows() != kappa {
            return Err(LpdoError::ShapeMismatch(format!(
                "isometry has {} rows, Kraus leg has dimension {kappa}",
                v.nrows()
            )));
        }
        let defect = (v * v.adjoint() - DMatrix::<C64>::identity(kappa, kappa))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if defect > 1e-10 {
            return Err(LpdoError::NotIsometric(defect));
        }
        let [s, l, r, k] = site_ids(i);
        let mat = self.sites[i].matricize(&[s, l, r])?;
        let new_k = Index::new(k, v.ncols(), IndexRole::Kraus)?;
        let t = DenseTensor::from_matrix(&(mat.matrix * v), mat.rows, vec![new_k])?;
        self.store(i, t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn optimal_site_tensor_entries() {
        let chain = LpdoChain::optimal_lpmm(1).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let t = chain.site(0);
        assert_eq!(t.dims(), vec![2, 1, 1, 2]);
        assert_eq!(t.get(&[0, 0, 0, 0]), c(h));
        assert_eq!(t.get(&[1, 0, 0, 1]), c(h));
        assert_eq!(t.get(&[0, 0, 0, 1]), c(0.0));
    }

    #[test]
    fn optimal_dims() {
        let chain = LpdoChain::optimal_lpmm(3).unwrap();
        assert_eq!(chain.bond_dims(), vec![1, 1]);
        assert_eq!(chain.kraus_dims(), vec![2, 2, 2]);
        assert_eq!(chain.chi_mean(), 1.0);
        assert!(LpdoChain::optimal_lpmm(0).is_err());
    }

    #[test]
    fn random_pure_bond_profile_and_determinism() {
        let a = LpdoChain::random_pure(8, 8, 7).unwrap();
        assert_eq!(a.bond_dims(), vec![2, 4, 8, 8, 8, 4, 2]);
        assert_eq!(a.kraus_dims(), vec![1; 8]);
        assert!((a.center_norm().unwrap() - 1.0).abs() < 1e-13);
        let b = LpdoChain::random_pure(8, 8, 7).unwrap();
        assert_eq!(a, b);
        let p = LpdoChain::random_pure(2, 1, 3).unwrap();
        assert_eq!(p.bond_dims(), vec![1]);
    }

    #[test]
    fn from_sites_rejects_mismatched_bonds() {
        let chain = LpdoChain::random_pure(3, 2, 1).unwrap();
        let mut sites = chain.sites().to_vec();
        sites.swap(0, 2);
        assert!(LpdoChain::from_sites(sites, None).is_err());
        assert!(LpdoChain::from_sites(Vec::new(), None).is_err());
        assert!(LpdoChain::from_sites(chain.sites().to_vec(), Some(1)).is_ok());
    }

    #[test]
    fn canonical_form_isometries() {
        let mut chain = LpdoChain::random_pure(6, 4, 2).unwrap();
        chain.depolarize_to_lpmm().unwrap();
        chain.canonicalize(2).unwrap();
        for i in 0..6 {
            let [s, l, _, k] = site_ids(i);
            let m = if i < 2 {
                chain.site(i).matricize(&[s, l, k]).unwrap().matrix
            } else if i > 2 {
                chain.site(i).matricize(&[l]).unwrap().matrix.adjoint()
            } else {
                continue;
            };
            let g = m.adjoint() * &m;
            let err = (g - DMatrix::identity(m.ncols(), m.ncols())).iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert!(err < 1e-12, "site {i}: {err}");
        }
        assert!((chain.center_norm().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn channel_requires_l1_and_cptp() {
        let mut chain = LpdoChain::optimal_lpmm(2).unwrap();
        let ch = KrausChannel::dephasing(0.5).unwrap();
        assert!(chain.apply_channel(0, &ch, &TruncationPolicy::l2(0.0).unwrap()).is_err());
        assert!(chain.apply_channel(5, &ch, &TruncationPolicy::l1(0.0).unwrap()).is_err());
    }

    #[test]
    fn identity_channel_keeps_kraus_dim() {
        let mut chain = LpdoChain::optimal_lpmm(2).unwrap();
        let report = chain
            .apply_channel(1, &KrausChannel::dephasing(0.0).unwrap(), &TruncationPolicy::l1(1e-12).unwrap())
            .unwrap();
        assert_eq!(report.kraus_after, 2);
        assert!((report.probabilities[0] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn depolarizing_keeps_bonds() {
        let mut chain = LpdoChain::random_pure(6, 4, 9).unwrap();
        let before = chain.bond_dims();
        chain.depolarize_to_lpmm().unwrap();
        assert_eq!(chain.bond_dims(), before);
        assert!(chain.kraus_dims().iter().all(|&k| k <= 4));
    }

    #[test]
    fn gate_shape_and_adjacency_errors() {
        let mut chain = LpdoChain::optimal_lpmm(3).unwrap();
        let p = TruncationPolicy::l2(0.0).unwrap();
        assert!(matches!(chain.apply_unitary(&[0, 2], &gates::cnot(), &p), Err(LpdoError::NonAdjacent(_))));
        assert!(matches!(chain.apply_unitary(&[1, 0], &gates::cnot(), &p), Err(LpdoError::NonAdjacent(_))));
        assert!(chain.apply_unitary(&[0], &gates::cnot(), &p).is_err());
        let bad = gates::pauli_x() * c(1.1);
        assert!(matches!(chain.apply_unitary(&[0], &bad, &p), Err(LpdoError::NotUnitary(_))));
    }

    #[test]
    fn cnot_on_optimal_grows_bond_to_two() {
        let mut chain = LpdoChain::optimal_lpmm(4).unwrap();
        chain.apply_unitary(&[1, 2], &gates::cnot(), &TruncationPolicy::l2(1e-12).unwrap()).unwrap();
        assert_eq!(chain.bond_dims(), vec![1, 2, 1]);
    }

    #[test]
    fn block_requires_adjacent_center() {
        let chain = LpdoChain::random_pure(5, 4, 1).unwrap();
        assert!(matches!(chain.two_site_block(1), Err(LpdoError::CenterMisplaced { .. })));
        assert!(chain.two_site_block(3).is_ok());
        assert!(chain.two_site_block(4).is_err());
    }

    #[test]
    fn kraus_isometry_checks_shape() {
        let mut chain = LpdoChain::optimal_lpmm(2).unwrap();
        assert!(chain.apply_kraus_isometry(0, &gates::identity(3)).is_err());
        chain.apply_kraus_isometry(0, &gates::hadamard()).unwrap();
        assert_eq!(chain.kraus_dims(), vec![2, 2]);
    }
}
