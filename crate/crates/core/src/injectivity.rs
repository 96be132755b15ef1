//! Closed-form disentanglers for the optimal purification of the maximally
//! mixed state.
//!
//! Each site of the optimal chain is `A = 1/sqrt(2)` read as a map from the
//! Kraus leg to the physical leg. A physical unitary `U` on `m` sites can
//! therefore be moved onto the fused Kraus legs: `U A = A U`. Applying
//! `U^dagger` there undoes the bond growth caused by `U`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::chain::{LpdoChain, UNITARY_TOLERANCE};
use crate::error::{LpdoError, Result};
use crate::gates::{kron, unitarity_defect};
use crate::measures::fidelity_p;
use crate::stiefel::BlockMatrix;
use crate::tensor::TruncationPolicy;
use crate::C64;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InjectivityWitness {
    #[serde(skip)]
    pub u: DMatrix<C64>,
    #[serde(skip)]
    pub v: DMatrix<C64>,
    pub phase: f64,
    /// `min_phi |U A - e^{i phi} A V|_F` over the product of optimal site
    /// tensors `A`.
    pub residual: f64,
}

fn n_qubits(u: &DMatrix<C64>) -> Result<usize> {
    let d = u.nrows();
    if !u.is_square() || d < 2 || !d.is_power_of_two() {
        return Err(LpdoError::ShapeMismatch(format!(
            "unitary must be 2^m x 2^m, got {:?}",
            u.shape()
        )));
    }
    Ok(d.trailing_zeros() as usize)
}

/// `(V, phi)` with `U = e^{i phi} V`. The phase is `arg tr U`, or zero when
/// the trace vanishes, so a pure phase maps to `V = 1`.
pub fn disentangler_for(u: &DMatrix<C64>) -> Result<(DMatrix<C64>, f64)> {
    n_qubits(u)?;
    let defect = unitarity_defect(u);
    if defect > UNITARY_TOLERANCE {
        return Err(LpdoError::NotUnitary(defect));
    }
    let tr = u.trace();
    let phase = if tr.norm() > 1e-12 { tr.arg() } else { 0.0 };
    Ok((u * C64::from_polar(1.0, -phase), phase))
}

/// Product of `m` optimal site tensors as a (physical x Kraus) matrix,
/// read off the chain built by [`LpdoChain::optimal_lpmm`].
pub fn lpmm_product_tensor(m: usize) -> Result<DMatrix<C64>> {
    let site = LpdoChain::optimal_lpmm(1)?.site(0).clone();
    let a = DMatrix::from_fn(2, 2, |p, k| site.get(&[p, 0, 0, k]));
    let mut out = DMatrix::from_element(1, 1, C64::new(1.0, 0.0));
    for _ in 0..m {
        out = kron(&out, &a);
    }
    Ok(out)
}

/// Residual of `U A = e^{i phi} A V` with the best phase, and that phase.
pub fn injectivity_residual(u: &DMatrix<C64>, v: &DMatrix<C64>) -> Result<(f64, f64)> {
    let m = n_qubits(u)?;
    if v.shape() != u.shape() {
        return Err(LpdoError::ShapeMismatch("isometry and unitary shapes differ".into()));
    }
    let a = lpmm_product_tensor(m)?;
    let lhs = u * &a;
    let rhs = &a * v;
    let inner = rhs.dotc(&lhs);
    let phase = if inner.norm() > 0.0 { inner.arg() } else { 0.0 };
    Ok(((lhs - rhs * C64::from_polar(1.0, phase)).norm(), phase))
}

pub fn check_weak_injectivity(u: &DMatrix<C64>) -> Result<InjectivityWitness> {
    let (v, phase) = disentangler_for(u)?;
    let (residual, _) = injectivity_residual(u, &v)?;
    Ok(InjectivityWitness {
        u: u.clone(),
        v,
        phase,
        residual,
    })
}

/// Reorders a two-site Kraus isometry from site-major indexing
/// (`k_i` most significant, as for gates) to the fused order of
/// [`BlockMatrix`] (`k_i` fastest).
fn to_fused_order(v: &DMatrix<C64>, kappa_i: usize, kappa_j: usize) -> DMatrix<C64> {
    let fused = |site_major: usize| (site_major / kappa_j) + kappa_i * (site_major % kappa_j);
    let mut out = DMatrix::zeros(v.nrows(), v.ncols());
    for c in 0..v.ncols() {
        for r in 0..v.nrows() {
            out[(fused(r), fused(c))] = v[(r, c)];
        }
    }
    out
}

/// Right-multiplies the Kraus legs of one site, or the fused Kraus legs of
/// two adjacent sites, by `v`. For two sites `v` is indexed site-major and
/// the bond is re-split under `policy`; `rho` is unchanged.
pub fn apply_kappa_isometry(chain: &mut LpdoChain, sites: &[usize], v: &DMatrix<C64>, policy: &TruncationPolicy) -> Result<()> {
    match *sites {
        [i] => chain.apply_kraus_isometry(i, v),
        [i, j] if j == i + 1 => {
            if chain.center() != Some(i) && chain.center() != Some(j) {
                chain.canonicalize(i)?;
            }
            let bm = BlockMatrix::from_block(&chain.two_site_block(i)?, i)?;
            if !v.is_square() || v.nrows() != bm.kappa_c() {
                return Err(LpdoError::ShapeMismatch(format!(
                    "isometry is {:?}, fused Kraus leg has dimension {}",
                    v.shape(),
                    bm.kappa_c()
                )));
            }
            let defect = unitarity_defect(v);
            if defect > 1e-10 {
                return Err(LpdoError::NotIsometric(defect));
            }
            let block = bm.apply(&to_fused_order(v, bm.kappa_i, bm.kappa_j))?;
            chain.split_block(i, &block, policy)?;
            Ok(())
        }
        _ => Err(LpdoError::NonAdjacent(sites.to_vec())),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct InjectivityRun {
    #[serde(skip)]
    pub chain: LpdoChain,
    pub bonds_before: Vec<usize>,
    pub bonds_after_unitary: Vec<usize>,
    pub bonds_after: Vec<usize>,
    pub witness: InjectivityWitness,
    pub fidelity: f64,
}

/// Applies `u` to the physical legs of `sites` of the optimal chain and
/// then the disentangler's adjoint to their Kraus legs, truncating with an
/// L2 cutoff after each step.
pub fn prune_via_injectivity(chain: &LpdoChain, sites: &[usize], u: &DMatrix<C64>, cutoff: f64) -> Result<InjectivityRun> {
    let n = chain.n_sites();
    let optimal = LpdoChain::optimal_lpmm(n)?;
    if chain.bond_dims().iter().any(|&d| d != 1) || chain.kraus_dims().iter().any(|&k| k != 2) {
        return Err(LpdoError::Precondition("chain is not the optimal purification".into()));
    }
    let f = fidelity_p(chain, &optimal)?.fidelity;
    if (f - 1.0).abs() > 1e-10 {
        return Err(LpdoError::Precondition(format!("chain differs from the optimal purification, F = {f}")));
    }
    let m = n_qubits(u)?;
    if m != sites.len() {
        return Err(LpdoError::ShapeMismatch(format!("{m}-qubit unitary on {} sites", sites.len())));
    }
    let witness = check_weak_injectivity(u)?;
    let policy = TruncationPolicy::l2(cutoff)?;
    let mut out = chain.clone();
    let bonds_before = out.bond_dims();
    out.apply_unitary(sites, u, &policy)?;
    let bonds_after_unitary = out.bond_dims();
    apply_kappa_isometry(&mut out, sites, &witness.v.adjoint(), &policy)?;
    let fidelity = fidelity_p(&out, chain)?.fidelity;
    Ok(InjectivityRun {
        bonds_before,
        bonds_after_unitary,
        bonds_after: out.bond_dims(),
        chain: out,
        witness,
        fidelity,
    })
}
