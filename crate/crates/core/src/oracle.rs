//! Dense density-matrix reference simulator for small chains.
//!
//! Qubit 0 is the most significant bit of a basis index, matching the
//! site-major convention of [`gates`](crate::gates).

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;

use crate::chain::{site_ids, LpdoChain};
use crate::channel::KrausChannel;
use crate::error::{LpdoError, Result};
use crate::gates;
use crate::measures::FidelityReport;
use crate::tensor::{contract, hermitian_eigh, DenseTensor, IndexId, TruncationPolicy};

/// Largest qubit count the dense representation accepts.
pub const MAX_ORACLE_QUBITS: usize = 12;

#[derive(Clone, Debug, PartialEq)]
pub struct DenseRho {
    n_qubits: usize,
    matrix: DMatrix<C64>,
}

fn check_size(n: usize) -> Result<()> {
    if n == 0 {
        return Err(LpdoError::EmptyChain);
    }
    if n > MAX_ORACLE_QUBITS {
        return Err(LpdoError::OracleTooLarge {
            n,
            max: MAX_ORACLE_QUBITS,
        });
    }
    Ok(())
}

impl DenseRho {
    pub fn new(n_qubits: usize, matrix: DMatrix<C64>) -> Result<Self> {
        check_size(n_qubits)?;
        let dim = 1 << n_qubits;
        if matrix.shape() != (dim, dim) {
            return Err(LpdoError::ShapeMismatch(format!(
                "{n_qubits} qubits need a {dim}x{dim} matrix"
            )));
        }
        Ok(Self { n_qubits, matrix })
    }

    pub fn maximally_mixed(n_qubits: usize) -> Result<Self> {
        check_size(n_qubits)?;
        let dim = 1 << n_qubits;
        let m = DMatrix::identity(dim, dim) * C64::new(1.0 / dim as f64, 0.0);
        Self::new(n_qubits, m)
    }

    /// `|psi><psi|` for an amplitude vector of length `2^n`.
    pub fn from_pure(n_qubits: usize, psi: &[C64]) -> Result<Self> {
        check_size(n_qubits)?;
        let v = nalgebra::DVector::from_column_slice(psi);
        Self::new(n_qubits, &v * v.adjoint())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn purity(&self) -> f64 {
        self.overlap(self)
    }

    /// `Tr[self other]`.
    pub fn overlap(&self, other: &DenseRho) -> f64 {
        self.matrix
            .iter()
            .zip(other.matrix.transpose().iter())
            .map(|(a, b)| a * b)
            .sum::<C64>()
            .re
    }

    pub fn fidelity_p(&self, initial: &DenseRho) -> FidelityReport {
        FidelityReport::from_parts(self.overlap(initial), self.purity(), initial.purity())
    }

    /// Largest elementwise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &DenseRho) -> f64 {
        (&self.matrix - &other.matrix).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigh(&self.matrix).0
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().last().copied().unwrap_or(0.0)
    }

    /// Reduced state on the listed qubits (kept in ascending order).
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DenseRho> {
        let n = self.n_qubits;
        let mut keep = keep.to_vec();
        keep.sort_unstable();
        keep.dedup();
        if let Some(&q) = keep.iter().find(|&&q| q >= n) {
            return Err(LpdoError::SiteOutOfRange { site: q, len: n });
        }
        let traced: Vec<usize> = (0..n).filter(|q| !keep.contains(q)).collect();
        let bit = |q: usize| 1usize << (n - 1 - q);
        let spread = |bits: usize, qubits: &[usize]| -> usize {
            qubits
                .iter()
                .enumerate()
                .filter(|(j, _)| bits >> (qubits.len() - 1 - j) & 1 == 1)
                .map(|(_, &q)| bit(q))
                .sum()
        };
        let dk = 1 << keep.len();
        let mut out = DMatrix::<C64>::zeros(dk, dk);
        for e in 0..1usize << traced.len() {
            let env = spread(e, &traced);
            for a in 0..dk {
                let ra = env | spread(a, &keep);
                for b in 0..dk {
                    out[(a, b)] += self.matrix[(ra, env | spread(b, &keep))];
                }
            }
        }
        DenseRho::new(keep.len(), out)
    }

    /// `-Tr rho ln rho` over eigenvalues above `1e-15`.
    pub fn von_neumann_entropy(&self) -> f64 {
        self.eigenvalues()
            .into_iter()
            .filter(|&p| p > 1e-15)
            .map(|p| -p * p.ln())
            .sum()
    }

    pub fn apply_unitary(&mut self, sites: &[usize], u: &DMatrix<C64>) -> Result<()> {
        check_sites(self.n_qubits, sites, u)?;
        let once = apply_left(&self.matrix, self.n_qubits, sites, u);
        self.matrix = apply_left(&once.adjoint(), self.n_qubits, sites, u).adjoint();
        Ok(())
    }

    pub fn apply_channel(&mut self, site: usize, channel: &KrausChannel) -> Result<()> {
        let dim = self.matrix.nrows();
        let mut acc = DMatrix::<C64>::zeros(dim, dim);
        for k in channel.operators() {
            check_sites(self.n_qubits, &[site], k)?;
            let once = apply_left(&self.matrix, self.n_qubits, &[site], k);
            acc += apply_left(&once.adjoint(), self.n_qubits, &[site], k).adjoint();
        }
        self.matrix = acc;
        Ok(())
    }

    pub fn apply(&mut self, op: &Operation) -> Result<()> {
        match op {
            Operation::Unitary { sites, matrix } => self.apply_unitary(sites, matrix),
            Operation::Channel { site, channel } => self.apply_channel(*site, channel),
        }
    }
}

fn check_sites(n: usize, sites: &[usize], op: &DMatrix<C64>) -> Result<()> {
    if let Some(&q) = sites.iter().find(|&&q| q >= n) {
        return Err(LpdoError::SiteOutOfRange { site: q, len: n });
    }
    let dim = 1 << sites.len();
    if op.shape() != (dim, dim) {
        return Err(LpdoError::ShapeMismatch(format!(
            "operator on {} qubits must be {dim}x{dim}",
            sites.len()
        )));
    }
    Ok(())
}

/// `(op on sites) * m`, acting on row indices only. The first listed
/// site is the most significant bit of `op`'s index.
fn apply_left(m: &DMatrix<C64>, n: usize, sites: &[usize], op: &DMatrix<C64>) -> DMatrix<C64> {
    let k = sites.len();
    let masks: Vec<usize> = sites.iter().map(|&q| 1usize << (n - 1 - q)).collect();
    let all: usize = masks.iter().sum();
    let offsets: Vec<usize> = (0..1usize << k)
        .map(|j| {
            (0..k)
                .filter(|&b| j >> (k - 1 - b) & 1 == 1)
                .map(|b| masks[b])
                .sum()
        })
        .collect();
    let mut out = DMatrix::<C64>::zeros(m.nrows(), m.ncols());
    let mut gathered = vec![C64::new(0.0, 0.0); offsets.len()];
    for col in 0..m.ncols() {
        for base in (0..m.nrows()).filter(|r| r & all == 0) {
            for (g, off) in gathered.iter_mut().zip(&offsets) {
                *g = m[(base | off, col)];
            }
            for (a, off) in offsets.iter().enumerate() {
                out[(base | off, col)] = gathered.iter().enumerate().map(|(b, g)| op[(a, b)] * g).sum();
            }
        }
    }
    out
}

/// One step of a gate/noise program, runnable on both representations.
#[derive(Clone, Debug, PartialEq)]
pub enum Operation {
    Unitary { sites: Vec<usize>, matrix: DMatrix<C64> },
    Channel { site: usize, channel: KrausChannel },
}

impl Operation {
    pub fn apply_to_chain(
        &self,
        chain: &mut LpdoChain,
        gate_policy: &TruncationPolicy,
        kraus_policy: &TruncationPolicy,
    ) -> Result<()> {
        match self {
            Operation::Unitary { sites, matrix } => chain.apply_unitary(sites, matrix, gate_policy),
            Operation::Channel { site, channel } => chain.apply_channel(*site, channel, kraus_policy).map(|_| ()),
        }
    }
}

/// `len` random steps on `n >= 2` qubits: one- and two-site Haar
/// unitaries, dephasing or bit flip of random strength, and random
/// two-operator channels, in equal proportion.
pub fn random_program<R: Rng + ?Sized>(n: usize, len: usize, rng: &mut R) -> Vec<Operation> {
    (0..len)
        .map(|_| match rng.gen_range(0..4) {
            0 => Operation::Unitary {
                sites: vec![rng.gen_range(0..n)],
                matrix: gates::random_unitary(2, rng),
            },
            1 => {
                let i = rng.gen_range(0..n - 1);
                Operation::Unitary {
                    sites: vec![i, i + 1],
                    matrix: gates::random_unitary(4, rng),
                }
            }
            2 => {
                let g = rng.gen_range(0.0..1.0);
                let ch = if rng.gen_bool(0.5) {
                    KrausChannel::dephasing(g).unwrap()
                } else {
                    KrausChannel::bitflip(g).unwrap()
                };
                Operation::Channel {
                    site: rng.gen_range(0..n),
                    channel: ch,
                }
            }
            _ => Operation::Channel {
                site: rng.gen_range(0..n),
                channel: KrausChannel::random(2, 2, rng).unwrap(),
            },
        })
        .collect()
}

/// Expands a chain into its dense `rho = sum_kappa A A^dagger` by a
/// left-to-right sweep of the operator.
pub fn lpdo_to_dense(chain: &LpdoChain) -> Result<DenseRho> {
    let n = chain.n_sites();
    check_size(n)?;
    let ket = |i: usize| chain.site(i).clone();
    let bra = |i: usize| -> Result<DenseTensor> {
        let [s, l, r, _] = site_ids(i);
        chain
            .site(i)
            .conj()
            .relabel_many(&[(s, s.prime(1)), (l, l.prime(1)), (r, r.prime(1))])
    };
    let mut acc = contract(&ket(0), &bra(0)?)?;
    for i in 1..n {
        acc = contract(&acc, &ket(i))?;
        acc = contract(&acc, &bra(i)?)?;
    }
    let mut order: Vec<IndexId> = (0..n).map(IndexId::physical).collect();
    order.extend((0..n).map(|i| IndexId::physical(i).prime(1)));
    let rows: Vec<IndexId> = order[..n].to_vec();
    // the remaining legs are the dimension-1 boundary bonds
    let cols: Vec<IndexId> = order[n..].to_vec();
    let mut ids = rows.clone();
    ids.extend(&cols);
    let boundary: Vec<IndexId> = acc
        .indices()
        .iter()
        .map(|ix| ix.id())
        .filter(|id| !ids.contains(id))
        .collect();
    ids.extend(boundary);
    let acc = acc.permute(&ids)?;
    let dim = 1 << n;
    let matrix = DMatrix::from_row_slice(dim, dim, acc.data());
    DenseRho::new(n, matrix)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gates;

    #[test]
    fn optimal_chain_is_maximally_mixed() {
        let rho = lpdo_to_dense(&LpdoChain::optimal_lpmm(3).unwrap()).unwrap();
        assert!(rho.max_abs_diff(&DenseRho::maximally_mixed(3).unwrap()) < 1e-15);
    }

    #[test]
    fn cnot_on_basis_state() {
        // |10> -> |11>
        let mut psi = vec![C64::new(0.0, 0.0); 4];
        psi[2] = C64::new(1.0, 0.0);
        let mut rho = DenseRho::from_pure(2, &psi).unwrap();
        rho.apply_unitary(&[0, 1], &gates::cnot()).unwrap();
        assert!((rho.matrix()[(3, 3)].re - 1.0).abs() < 1e-15);
        // reversed site order puts qubit 1 in control
        let mut rho = DenseRho::from_pure(2, &psi).unwrap();
        rho.apply_unitary(&[1, 0], &gates::cnot()).unwrap();
        assert!((rho.matrix()[(2, 2)].re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn full_bitflip_then_dephasing_on_zero() {
        let mut psi = vec![C64::new(0.0, 0.0); 2];
        psi[0] = C64::new(1.0, 0.0);
        let mut rho = DenseRho::from_pure(1, &psi).unwrap();
        rho.apply_channel(0, &KrausChannel::bitflip(0.5).unwrap()).unwrap();
        rho.apply_channel(0, &KrausChannel::dephasing(0.5).unwrap()).unwrap();
        assert!(rho.max_abs_diff(&DenseRho::maximally_mixed(1).unwrap()) < 1e-15);
    }

    #[test]
    fn partial_trace_and_entropy() {
        // Bell state: reduced state is 1/2, entropy ln 2
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let psi = [h, 0.0, 0.0, h].map(|x| C64::new(x, 0.0));
        let rho = DenseRho::from_pure(2, &psi).unwrap();
        let red = rho.partial_trace(&[1]).unwrap();
        assert!(red.max_abs_diff(&DenseRho::maximally_mixed(1).unwrap()) < 1e-15);
        assert!((red.von_neumann_entropy() - 2f64.ln()).abs() < 1e-12);
        assert!(rho.von_neumann_entropy().abs() < 1e-12);
    }

    #[test]
    fn size_limits() {
        assert!(matches!(
            DenseRho::maximally_mixed(13),
            Err(LpdoError::OracleTooLarge { n: 13, max: 12 })
        ));
        assert!(DenseRho::maximally_mixed(0).is_err());
    }
}
