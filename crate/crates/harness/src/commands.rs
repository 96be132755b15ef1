//! The experiments behind each subcommand, as library calls.

use std::io::Write;
use std::path::Path;

use lpdo_core::gates;
use lpdo_core::injectivity::{prune_via_injectivity, InjectivityRun};
use lpdo_core::measures::{fidelity_p, purity, trace};
use lpdo_core::oracle::{lpdo_to_dense, DenseRho, MAX_ORACLE_QUBITS};
use lpdo_core::prune::{run_truncation_schedule, truncate_until_stationary, FidelityTracking, SweepOptions};
use lpdo_core::stiefel::riemann_sweep;
use lpdo_core::{LpdoChain, LpdoError, C64};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, StateKind};
use crate::error::{HarnessError, Result};
use crate::fit::{fit_exponential, FitResult, DEFAULT_BUDGET};

/// Fidelity and trace budgets every truncation row must meet.
pub const PRUNE_FIDELITY_TOL: f64 = 1e-8;
pub const PRUNE_TRACE_TOL: f64 = 1e-10;
/// Budgets for rows of optimized sweeps.
pub const RIEMANN_FIDELITY_TOL: f64 = 1e-4;
pub const RIEMANN_TRACE_TOL: f64 = 1e-8;
/// Tolerance of `verify` and `inject`.
pub const STATE_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PruneRow {
    pub run_id: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub chi_max: usize,
    pub lambda: f64,
    pub sweep: usize,
    pub chi_mean: f64,
    pub chi_max_bond: usize,
    pub fidelity_vs_initial: f64,
    pub trace_dev: f64,
    pub wall_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiemannRow {
    pub run_id: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub chi_max: usize,
    pub lambda: f64,
    pub sweep: usize,
    pub chi_mean: f64,
    pub chi_max_bond: usize,
    pub fidelity_vs_initial: f64,
    pub trace_dev: f64,
    pub wall_ms: f64,
    pub objective_kind: String,
    pub objective_before: f64,
    pub objective_after: f64,
    pub optimizer_iters: usize,
}

/// Worker pool sized by `LPDO_THREADS`, or by rayon's default when unset.
pub fn worker_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("LPDO_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| HarnessError::Usage(format!("LPDO_THREADS must be a positive integer, got '{v}'")))?;
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| HarnessError::Usage(e.to_string()))
}

/// Seed of grid cell `index`.
pub fn cell_seed(base: u64, index: usize) -> u64 {
    base ^ index as u64
}

pub fn build_state(cfg: &ExperimentConfig) -> Result<LpdoChain> {
    Ok(match cfg.state {
        StateKind::Optimal => LpdoChain::optimal_lpmm(cfg.n)?,
        StateKind::RandomPure => LpdoChain::random_pure(cfg.n, cfg.chi_max, cfg.seed)?,
        StateKind::Subopt => {
            let mut chain = LpdoChain::random_pure(cfg.n, cfg.chi_max, cfg.seed)?;
            chain.depolarize(cfg.gamma_d, cfg.gamma_b, cfg.kraus_cutoff)?;
            chain
        }
    })
}

pub fn load_bundle(path: &Path) -> Result<LpdoChain> {
    lpdo_core::bundle::load(path).map_err(|e| match e {
        LpdoError::Io(source) => HarnessError::io(path, source),
        other => HarnessError::BadFile {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    })
}

pub fn save_bundle(chain: &LpdoChain, path: &Path) -> Result<()> {
    lpdo_core::bundle::save(chain, path).map_err(|e| match e {
        LpdoError::Io(source) => HarnessError::io(path, source),
        other => HarnessError::Core(other),
    })
}

/// The configured input bundle, or a freshly built state.
pub fn initial_chain(cfg: &ExperimentConfig) -> Result<LpdoChain> {
    match &cfg.input {
        Some(path) => load_bundle(path),
        None => build_state(cfg),
    }
}

pub fn gen(cfg: &ExperimentConfig) -> Result<LpdoChain> {
    cfg.validate()?;
    let chain = build_state(cfg)?;
    if let Some(path) = &cfg.output {
        save_bundle(&chain, path)?;
    }
    Ok(chain)
}

pub fn prune(cfg: &ExperimentConfig) -> Result<Vec<PruneRow>> {
    cfg.validate()?;
    let chain = initial_chain(cfg)?;
    let (n, chi_max) = (chain.n_sites(), chain.chi_max());
    let cells: Vec<(usize, f64)> = cfg.lambdas.iter().copied().enumerate().collect();
    let runs = worker_pool()?.install(|| {
        cells
            .par_iter()
            .map(|&(run_id, lambda)| {
                let options = SweepOptions {
                    bidirectional: cfg.bidirectional,
                    ..SweepOptions::new(lambda)
                };
                run_truncation_schedule(chain.clone(), cfg.n_sweeps, &options).map(|run| (run_id, lambda, run))
            })
            .collect::<lpdo_core::Result<Vec<_>>>()
    })?;
    Ok(runs
        .into_iter()
        .flat_map(|(run_id, lambda, run)| {
            run.stats.into_iter().map(move |s| PruneRow {
                run_id,
                n,
                chi_max,
                lambda,
                sweep: s.sweep_index,
                chi_mean: s.chi_mean,
                chi_max_bond: s.chi_max,
                fidelity_vs_initial: s.fidelity_vs_initial.unwrap_or(f64::NAN),
                trace_dev: s.trace_deviation,
                wall_ms: s.wall_time_ms,
            })
        })
        .collect())
}

/// Optimized sweeps over the cutoff grid. With `stall_cutoff` set, the
/// chain is first truncated until its bonds settle.
pub fn riemann(cfg: &ExperimentConfig) -> Result<Vec<RiemannRow>> {
    cfg.validate()?;
    let mut chain = initial_chain(cfg)?;
    let chi_max = chain.chi_max();
    if let Some(cutoff) = cfg.stall_cutoff {
        chain = truncate_until_stationary(chain, cutoff, cfg.stall_max_sweeps)?.0;
    }
    let n = chain.n_sites();
    let cells: Vec<(usize, f64)> = cfg.lambdas.iter().copied().enumerate().collect();
    let runs = worker_pool()?.install(|| {
        cells
            .par_iter()
            .map(|&(run_id, lambda)| {
                let mut opt = cfg.optimizer.clone();
                opt.random_init = opt.random_init.map(|s| cell_seed(s, run_id));
                riemann_sweep(chain.clone(), lambda, &opt, cfg.n_sweeps, FidelityTracking::EverySweep, false)
                    .map(|run| (run_id, lambda, run))
            })
            .collect::<lpdo_core::Result<Vec<_>>>()
    })?;
    Ok(runs
        .into_iter()
        .flat_map(|(run_id, lambda, run)| {
            run.stats.into_iter().map(move |s| RiemannRow {
                run_id,
                n,
                chi_max,
                lambda,
                sweep: s.sweep.sweep_index,
                chi_mean: s.sweep.chi_mean,
                chi_max_bond: s.sweep.chi_max,
                fidelity_vs_initial: s.sweep.fidelity_vs_initial.unwrap_or(f64::NAN),
                trace_dev: s.sweep.trace_deviation,
                wall_ms: s.sweep.wall_time_ms,
                objective_kind: s.objective_kind.label().to_string(),
                objective_before: s.objective_before,
                objective_after: s.objective_after,
                optimizer_iters: s.optimizer_iters,
            })
        })
        .collect())
}

fn budget_violations<'a>(
    rows: impl Iterator<Item = (usize, usize, f64, f64)> + 'a,
    fidelity_tol: f64,
    trace_tol: f64,
) -> Vec<String> {
    rows.filter(|&(_, _, f, t)| !((f - 1.0).abs() <= fidelity_tol && t <= trace_tol))
        .map(|(run, sweep, f, t)| format!("run {run} sweep {sweep}: |F-1| = {:.2e}, |Tr-1| = {t:.2e}", (f - 1.0).abs()))
        .collect()
}

pub fn check_prune_rows(rows: &[PruneRow]) -> Vec<String> {
    budget_violations(
        rows.iter().map(|r| (r.run_id, r.sweep, r.fidelity_vs_initial, r.trace_dev)),
        PRUNE_FIDELITY_TOL,
        PRUNE_TRACE_TOL,
    )
}

pub fn check_riemann_rows(rows: &[RiemannRow]) -> Vec<String> {
    budget_violations(
        rows.iter().map(|r| (r.run_id, r.sweep, r.fidelity_vs_initial, r.trace_dev)),
        RIEMANN_FIDELITY_TOL,
        RIEMANN_TRACE_TOL,
    )
}

/// Writes rows with a header line, even when there are no rows.
pub fn write_csv<T: Serialize, W: Write>(rows: &[T], header: &[&str], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| HarnessError::Usage(e.to_string()))?;
    Ok(())
}

pub const PRUNE_HEADER: [&str; 10] = [
    "run_id",
    "N",
    "chi_max",
    "lambda",
    "sweep",
    "chi_mean",
    "chi_max_bond",
    "fidelity_vs_initial",
    "trace_dev",
    "wall_ms",
];

pub const RIEMANN_HEADER: [&str; 14] = [
    "run_id",
    "N",
    "chi_max",
    "lambda",
    "sweep",
    "chi_mean",
    "chi_max_bond",
    "fidelity_vs_initial",
    "trace_dev",
    "wall_ms",
    "objective_kind",
    "objective_before",
    "objective_after",
    "optimizer_iters",
];

/// Parses a gate name: `identity`, `x`, `h`, `cnot`, `swap`, `hh`,
/// `random1` or `random2` (the random ones drawn from `seed`).
pub fn parse_unitary(name: &str, seed: u64) -> Result<DMatrix<C64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(match name {
        "identity" | "id" => gates::identity(4),
        "x" => gates::pauli_x(),
        "h" => gates::hadamard(),
        "cnot" => gates::cnot(),
        "swap" => gates::swap(),
        "hh" => gates::kron(&gates::hadamard(), &gates::hadamard()),
        "random1" => gates::random_unitary(2, &mut rng),
        "random2" => gates::random_unitary(4, &mut rng),
        other => {
            return Err(HarnessError::Usage(format!(
                "unknown unitary '{other}' (expected identity, x, h, cnot, swap, hh, random1, random2)"
            )))
        }
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct InjectReport {
    pub run: InjectivityRun,
    /// Largest entry of `|rho - 1/2^N|` from the dense oracle, for small N.
    pub oracle_deviation: Option<f64>,
    pub failures: Vec<String>,
}

/// Applies `u` to the optimal chain on `n` sites starting at `site`, then
/// undoes it on the Kraus legs.
pub fn inject(n: usize, u: &DMatrix<C64>, site: usize, cutoff: f64) -> Result<InjectReport> {
    let m = u.nrows().trailing_zeros() as usize;
    if n < m || site + m > n {
        return Err(HarnessError::Usage(format!("a {m}-site unitary at site {site} does not fit in {n} sites")));
    }
    let sites: Vec<usize> = (site..site + m).collect();
    let chain = LpdoChain::optimal_lpmm(n)?;
    let run = prune_via_injectivity(&chain, &sites, u, cutoff)?;
    let oracle_deviation = if n <= MAX_ORACLE_QUBITS {
        Some(lpdo_to_dense(&run.chain)?.max_abs_diff(&DenseRho::maximally_mixed(n)?))
    } else {
        None
    };
    let mut failures = Vec::new();
    if run.bonds_after.iter().any(|&d| d != 1) {
        failures.push(format!("bonds did not return to 1: {:?}", run.bonds_after));
    }
    if run.witness.residual > STATE_TOL {
        failures.push(format!("witness residual {:.2e}", run.witness.residual));
    }
    if (run.fidelity - 1.0).abs() > STATE_TOL {
        failures.push(format!("fidelity {}", run.fidelity));
    }
    if let Some(d) = oracle_deviation.filter(|&d| d > STATE_TOL) {
        failures.push(format!("dense state deviates by {d:.2e}"));
    }
    Ok(InjectReport {
        run,
        oracle_deviation,
        failures,
    })
}

/// Reads two numeric columns of a CSV, optionally keeping only rows whose
/// `run_id` matches.
pub fn read_columns(path: &Path, x_col: &str, y_col: &str, run_id: Option<usize>) -> Result<(Vec<f64>, Vec<f64>)> {
    let file = std::fs::File::open(path).map_err(|e| HarnessError::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let headers = reader.headers()?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| HarnessError::BadFile {
            path: path.to_path_buf(),
            message: format!("no column '{name}'"),
        })
    };
    let (xi, yi) = (col(x_col)?, col(y_col)?);
    let ri = match run_id {
        Some(_) => Some(col("run_id")?),
        None => None,
    };
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let num = |i: usize| {
            record[i].trim().parse::<f64>().map_err(|_| HarnessError::BadFile {
                path: path.to_path_buf(),
                message: format!("row {}: '{}' is not a number", line + 1, &record[i]),
            })
        };
        if let (Some(i), Some(want)) = (ri, run_id) {
            if num(i)? != want as f64 {
                continue;
            }
        }
        xs.push(num(xi)?);
        ys.push(num(yi)?);
    }
    Ok((xs, ys))
}

pub fn fit_csv(path: &Path, x_col: &str, y_col: &str, run_id: Option<usize>) -> Result<FitResult> {
    let (x, y) = read_columns(path, x_col, y_col, run_id)?;
    fit_exponential(&x, &y, DEFAULT_BUDGET)
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub n: usize,
    pub fidelity: f64,
    /// The same fidelity from the dense oracle, for small N.
    pub fidelity_dense: Option<f64>,
    pub trace_dev_a: f64,
    pub trace_dev_b: f64,
    pub purity_a: f64,
    pub purity_b: f64,
    pub failures: Vec<String>,
}

/// Compares two states; they pass when they agree within `tol` and both
/// have unit trace.
pub fn verify(a: &LpdoChain, b: &LpdoChain, tol: f64) -> Result<VerifyReport> {
    if a.n_sites() != b.n_sites() {
        return Err(HarnessError::Usage(format!("{} sites against {}", a.n_sites(), b.n_sites())));
    }
    let n = a.n_sites();
    let f = fidelity_p(a, b)?;
    let fidelity_dense = if n <= MAX_ORACLE_QUBITS {
        Some(lpdo_to_dense(a)?.fidelity_p(&lpdo_to_dense(b)?).fidelity)
    } else {
        None
    };
    let (ta, tb) = ((trace(a)? - 1.0).abs(), (trace(b)? - 1.0).abs());
    let mut failures = Vec::new();
    if (f.fidelity - 1.0).abs() > tol {
        failures.push(format!("F_P = {} differs from 1 by more than {tol:e}", f.fidelity));
    }
    for (name, t) in [("first", ta), ("second", tb)] {
        if t > STATE_TOL {
            failures.push(format!("{name} state has |Tr - 1| = {t:.2e}"));
        }
    }
    if let Some(fd) = fidelity_dense.filter(|fd| (fd - f.fidelity).abs() > STATE_TOL) {
        failures.push(format!("transfer and dense fidelities differ: {} vs {fd}", f.fidelity));
    }
    Ok(VerifyReport {
        n,
        fidelity: f.fidelity,
        fidelity_dense,
        trace_dev_a: ta,
        trace_dev_b: tb,
        purity_a: purity(a)?,
        purity_b: purity(b)?,
        failures,
    })
}
