//! Fidelity-preserving truncation sweeps.
//!
//! Each bond is cut by an SVD of the orthogonality-center tensor, values
//! below the normalized cutoff are discarded, the kept spectrum is
//! renormalized (L2) and absorbed into the neighbor, which becomes the new
//! center. Kraus legs are never touched.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::chain::{Direction, LpdoChain, SplitReport};
use crate::error::{LpdoError, Result};
use crate::measures::{trace, FidelityReference};
use crate::tensor::TruncationPolicy;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepStats {
    /// 1-based sweep counter.
    pub sweep_index: usize,
    pub chi_mean: f64,
    pub chi_max: usize,
    pub fidelity_vs_initial: Option<f64>,
    pub trace_deviation: f64,
    pub wall_time_ms: f64,
}

/// When to evaluate `F_P` against the initial chain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FidelityTracking {
    EverySweep,
    FinalOnly,
    Never,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub cutoff: f64,
    pub max_rank: Option<usize>,
    /// Follow each left-to-right pass with a right-to-left pass.
    pub bidirectional: bool,
    pub fidelity: FidelityTracking,
}

impl SweepOptions {
    pub fn new(cutoff: f64) -> Self {
        Self {
            cutoff,
            max_rank: None,
            bidirectional: false,
            fidelity: FidelityTracking::EverySweep,
        }
    }

    pub fn policy(&self) -> Result<TruncationPolicy> {
        TruncationPolicy::new(self.cutoff, self.max_rank, crate::tensor::NormMode::L2)
    }
}

/// Truncates interior bond `bond`. The center must sit on one of its two
/// sites and ends on the other one.
pub fn truncate_bond(chain: &mut LpdoChain, bond: usize, policy: &TruncationPolicy) -> Result<SplitReport> {
    if bond + 1 >= chain.n_sites() {
        return Err(LpdoError::BondOutOfRange {
            bond,
            len: chain.n_sites(),
        });
    }
    match chain.center() {
        Some(c) if c == bond => chain.shift_center(Direction::Right, policy),
        Some(c) if c == bond + 1 => chain.shift_center(Direction::Left, policy),
        center => Err(LpdoError::CenterMisplaced { center, bond }),
    }
}

/// One sweep: re-canonicalize onto site 0, then truncate every bond from
/// left to right (and back, if bidirectional). Returns the per-bond reports.
pub fn sweep_truncate(chain: &mut LpdoChain, policy: &TruncationPolicy, bidirectional: bool) -> Result<Vec<SplitReport>> {
    chain.recanonicalize(0)?;
    let n = chain.n_sites();
    let mut reports = Vec::with_capacity(if bidirectional { 2 * n } else { n });
    for b in 0..n.saturating_sub(1) {
        reports.push(truncate_bond(chain, b, policy)?);
    }
    if bidirectional {
        for b in (0..n.saturating_sub(1)).rev() {
            reports.push(truncate_bond(chain, b, policy)?);
        }
    }
    Ok(reports)
}

#[derive(Clone, Debug)]
pub struct TruncationRun {
    pub initial_chi_mean: f64,
    pub stats: Vec<SweepStats>,
    pub chain: LpdoChain,
}

/// Runs `n_sweeps` truncation sweeps, recording statistics after each.
pub fn run_truncation_schedule(chain: LpdoChain, n_sweeps: usize, options: &SweepOptions) -> Result<TruncationRun> {
    let policy = options.policy()?;
    let reference = match options.fidelity {
        FidelityTracking::Never => None,
        _ => Some(FidelityReference::new(chain.clone())?),
    };
    let initial_chi_mean = chain.chi_mean();
    let mut chain = chain;
    let mut stats = Vec::with_capacity(n_sweeps);
    for sweep in 1..=n_sweeps {
        let start = Instant::now();
        sweep_truncate(&mut chain, &policy, options.bidirectional)?;
        let wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
        let track = match options.fidelity {
            FidelityTracking::EverySweep => true,
            FidelityTracking::FinalOnly => sweep == n_sweeps,
            FidelityTracking::Never => false,
        };
        let fidelity_vs_initial = match (&reference, track) {
            (Some(r), true) => Some(r.compare(&chain)?.fidelity),
            _ => None,
        };
        stats.push(SweepStats {
            sweep_index: sweep,
            chi_mean: chain.chi_mean(),
            chi_max: chain.chi_max(),
            fidelity_vs_initial,
            trace_deviation: (trace(&chain)? - 1.0).abs(),
            wall_time_ms,
        });
    }
    Ok(TruncationRun {
        initial_chi_mean,
        stats,
        chain,
    })
}

/// Truncation sweeps until the bond dimensions stop changing from one
/// sweep to the next, at most `max_sweeps` of them. Returns the chain and
/// the number of sweeps run, or `None` for the count if it never settled.
pub fn truncate_until_stationary(chain: LpdoChain, cutoff: f64, max_sweeps: usize) -> Result<(LpdoChain, Option<usize>)> {
    let policy = TruncationPolicy::l2(cutoff)?;
    let mut chain = chain;
    let mut prev = chain.bond_dims();
    for sweep in 1..=max_sweeps {
        sweep_truncate(&mut chain, &policy, false)?;
        let dims = chain.bond_dims();
        if dims == prev {
            return Ok((chain, Some(sweep)));
        }
        prev = dims;
    }
    Ok((chain, None))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn optimal_chain_is_a_fixed_point() {
        let chain = LpdoChain::optimal_lpmm(6).unwrap();
        let run = run_truncation_schedule(chain, 3, &SweepOptions::new(0.5)).unwrap();
        for s in &run.stats {
            assert_eq!(s.chi_mean, 1.0);
            assert!((s.fidelity_vs_initial.unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_sweeps_leave_the_chain_alone() {
        let chain = LpdoChain::random_pure(5, 4, 1).unwrap();
        let run = run_truncation_schedule(chain.clone(), 0, &SweepOptions::new(0.5)).unwrap();
        assert!(run.stats.is_empty());
        assert_eq!(run.chain, chain);
    }

    #[test]
    fn bond_truncation_needs_the_center_nearby() {
        let mut chain = LpdoChain::random_pure(5, 4, 1).unwrap();
        chain.canonicalize(0).unwrap();
        let policy = TruncationPolicy::l2(0.1).unwrap();
        assert!(matches!(
            truncate_bond(&mut chain, 2, &policy),
            Err(LpdoError::CenterMisplaced { .. })
        ));
        assert!(truncate_bond(&mut chain, 4, &policy).is_err());
        let report = truncate_bond(&mut chain, 0, &policy).unwrap();
        assert!(report.dim_after <= report.dim_before);
        assert_eq!(chain.center(), Some(1));
        truncate_bond(&mut chain, 0, &policy).unwrap();
        assert_eq!(chain.center(), Some(0));
    }

    #[test]
    fn zero_cutoff_keeps_bonds() {
        let mut chain = LpdoChain::random_pure(6, 4, 3).unwrap();
        chain.depolarize_to_lpmm().unwrap();
        let before = chain.bond_dims();
        let run = run_truncation_schedule(chain, 1, &SweepOptions::new(0.0)).unwrap();
        assert_eq!(run.chain.bond_dims(), before);
        assert!((run.stats[0].fidelity_vs_initial.unwrap() - 1.0).abs() < 1e-10);
    }
}
