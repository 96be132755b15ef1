//! Scalar measures of LPDO chains by transfer contraction: trace, purity,
//! Hilbert-Schmidt overlap and the purity-normalized fidelity
//! `F_P = Tr[rho_f rho_i] / max(P(rho_f), P(rho_i))`.
//!
//! Each measure stacks copies of the site tensors (bra and ket layers of
//! the purifications) and sweeps an environment tensor from left to right.
//! Layers are told apart by prime levels on their ids, so two legs are
//! summed together exactly when their relabeled ids coincide.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::chain::{site_ids, LpdoChain};
use crate::error::{LpdoError, Result};
use crate::tensor::{contract, DenseTensor, Index, IndexId, IndexRole};

/// One layer of a transfer contraction: which chain, whether conjugated,
/// and the prime levels given to its bond, physical and Kraus legs.
struct Layer<'a> {
    chain: &'a LpdoChain,
    conj: bool,
    bond: u8,
    phys: u8,
    kraus: u8,
}

impl Layer<'_> {
    fn site(&self, i: usize) -> Result<DenseTensor> {
        let [s, l, r, k] = site_ids(i);
        let t = self.chain.site(i);
        let t = if self.conj { t.conj() } else { t.clone() };
        t.relabel_many(&[
            (s, s.prime(self.phys)),
            (l, l.prime(self.bond)),
            (r, r.prime(self.bond)),
            (k, k.prime(self.kraus)),
        ])
    }
}

fn transfer(layers: &[Layer<'_>]) -> Result<C64> {
    let n = layers[0].chain.n_sites();
    if let Some(other) = layers.iter().find(|l| l.chain.n_sites() != n) {
        return Err(LpdoError::LengthMismatch(n, other.chain.n_sites()));
    }
    let boundary = layers
        .iter()
        .map(|l| Index::new(IndexId::bond(0).prime(l.bond), 1, IndexRole::Bond))
        .collect::<Result<Vec<_>>>()?;
    let mut env = DenseTensor::new(boundary, vec![C64::new(1.0, 0.0)])?;
    for i in 0..n {
        for layer in layers {
            env = contract(&env, &layer.site(i)?)?;
        }
    }
    Ok(env.data().iter().sum())
}

/// `Tr rho = <Psi|Psi>`.
pub fn trace(chain: &LpdoChain) -> Result<f64> {
    let value = transfer(&[
        Layer {
            chain,
            conj: false,
            bond: 0,
            phys: 0,
            kraus: 0,
        },
        Layer {
            chain,
            conj: true,
            bond: 1,
            phys: 0,
            kraus: 0,
        },
    ])?;
    Ok(value.re)
}

/// `Tr[rho_a rho_b]`, unnormalized.
pub fn overlap(a: &LpdoChain, b: &LpdoChain) -> Result<f64> {
    // sum A[s,k] A*[s',k] B[s',k'] B*[s,k']
    let value = transfer(&[
        Layer {
            chain: a,
            conj: false,
            bond: 0,
            phys: 0,
            kraus: 0,
        },
        Layer {
            chain: a,
            conj: true,
            bond: 1,
            phys: 1,
            kraus: 0,
        },
        Layer {
            chain: b,
            conj: false,
            bond: 2,
            phys: 1,
            kraus: 1,
        },
        Layer {
            chain: b,
            conj: true,
            bond: 3,
            phys: 0,
            kraus: 1,
        },
    ])?;
    Ok(value.re)
}

/// `Tr rho^2` of the chain as stored (not divided by `(Tr rho)^2`).
pub fn purity(chain: &LpdoChain) -> Result<f64> {
    overlap(chain, chain)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub overlap: f64,
    pub purity_f: f64,
    pub purity_i: f64,
    pub fidelity: f64,
}

impl FidelityReport {
    pub fn from_parts(overlap: f64, purity_f: f64, purity_i: f64) -> Self {
        Self {
            overlap,
            purity_f,
            purity_i,
            fidelity: overlap / purity_f.max(purity_i),
        }
    }
}

pub fn fidelity_p(rho_f: &LpdoChain, rho_i: &LpdoChain) -> Result<FidelityReport> {
    if rho_f.n_sites() != rho_i.n_sites() {
        return Err(LpdoError::LengthMismatch(rho_f.n_sites(), rho_i.n_sites()));
    }
    Ok(FidelityReport::from_parts(
        overlap(rho_f, rho_i)?,
        purity(rho_f)?,
        purity(rho_i)?,
    ))
}

/// A fixed reference state with its purity computed once, for tracking
/// the fidelity of a sequence of states against it.
#[derive(Clone, Debug)]
pub struct FidelityReference {
    chain: LpdoChain,
    purity: f64,
}

impl FidelityReference {
    pub fn new(chain: LpdoChain) -> Result<Self> {
        let purity = purity(&chain)?;
        Ok(Self { chain, purity })
    }

    pub fn chain(&self) -> &LpdoChain {
        &self.chain
    }

    pub fn purity(&self) -> f64 {
        self.purity
    }

    pub fn compare(&self, rho_f: &LpdoChain) -> Result<FidelityReport> {
        if rho_f.n_sites() != self.chain.n_sites() {
            return Err(LpdoError::LengthMismatch(rho_f.n_sites(), self.chain.n_sites()));
        }
        Ok(FidelityReport::from_parts(
            overlap(rho_f, &self.chain)?,
            purity(rho_f)?,
            self.purity,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn optimal_trace_and_purity() {
        let chain = LpdoChain::optimal_lpmm(4).unwrap();
        assert!((trace(&chain).unwrap() - 1.0).abs() < 1e-14);
        assert!((purity(&chain).unwrap() - 1.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn pure_chain_has_unit_purity() {
        let chain = LpdoChain::random_pure(8, 8, 7).unwrap();
        assert!((trace(&chain).unwrap() - 1.0).abs() < 1e-12);
        assert!((purity(&chain).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn fidelity_of_zero_state_with_mixed_qubit() {
        let zero = LpdoChain::product_state(&[[C64::new(1.0, 0.0), C64::new(0.0, 0.0)]]).unwrap();
        let mixed = LpdoChain::optimal_lpmm(1).unwrap();
        let report = fidelity_p(&zero, &mixed).unwrap();
        assert!((report.overlap - 0.5).abs() < 1e-15);
        assert!((report.fidelity - 0.5).abs() < 1e-15);
    }

    #[test]
    fn self_fidelity_is_one_and_lengths_checked() {
        let chain = LpdoChain::random_pure(5, 4, 3).unwrap();
        assert!((fidelity_p(&chain, &chain).unwrap().fidelity - 1.0).abs() < 1e-12);
        let short = LpdoChain::optimal_lpmm(4).unwrap();
        assert!(matches!(fidelity_p(&chain, &short), Err(LpdoError::LengthMismatch(5, 4))));
    }

    #[test]
    fn reference_matches_direct_fidelity() {
        let a = LpdoChain::random_pure(4, 4, 1).unwrap();
        let mut b = a.clone();
        b.depolarize(0.2, 0.1, 1e-12).unwrap();
        let reference = FidelityReference::new(a.clone()).unwrap();
        let direct = fidelity_p(&b, &a).unwrap();
        let cached = reference.compare(&b).unwrap();
        assert!((direct.fidelity - cached.fidelity).abs() < 1e-14);
    }
}
