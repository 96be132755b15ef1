//! Command-line surface of the `lpdo` binary.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use lpdo_core::stiefel::{EntropyKind, GradientMode};

use crate::commands::{self, PRUNE_HEADER, RIEMANN_HEADER, STATE_TOL};
use crate::config::{ExperimentConfig, StateKind};
use crate::error::{HarnessError, Result};

#[derive(Debug, Parser)]
#[command(name = "lpdo", version, about = "Pruning experiments on purified maximally mixed states")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a state and save it as a bundle.
    Gen(RunArgs),
    /// Truncation sweeps over a cutoff grid; CSV out.
    Prune(RunArgs),
    /// Optimized pruning sweeps over a cutoff grid; CSV out.
    Riemann(RunArgs),
    /// Apply a unitary to the optimal state and undo it on the Kraus legs.
    Inject(InjectArgs),
    /// Fit alpha + beta exp(-gamma x) to two CSV columns.
    Fit(FitArgs),
    /// Compare two bundles.
    Verify(VerifyArgs),
}

fn parse_gradient(s: &str) -> std::result::Result<GradientMode, String> {
    match s {
        "exact" => Ok(GradientMode::Exact),
        "fd" | "finite_difference" => Ok(GradientMode::FiniteDifference),
        other => Err(format!("unknown gradient '{other}' (expected exact or fd)")),
    }
}

/// Flags shared by the state and sweep commands. Each one overrides the
/// matching key of the config file.
#[derive(Debug, Default, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub kind: Option<StateKind>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub chi_max: Option<usize>,
    /// Comma-separated cutoff grid.
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
    #[arg(long)]
    pub sweeps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub gamma_d: Option<f64>,
    #[arg(long)]
    pub gamma_b: Option<f64>,
    #[arg(long)]
    pub bidirectional: bool,
    /// Truncate with this cutoff until the bonds settle before optimizing.
    #[arg(long)]
    pub stall: Option<f64>,
    /// s_sr or s_vn.
    #[arg(long)]
    pub objective: Option<EntropyKind>,
    #[arg(long)]
    pub n_iter: Option<usize>,
    /// exact or fd.
    #[arg(long, value_parser = parse_gradient)]
    pub gradient: Option<GradientMode>,
    #[arg(long)]
    pub random_init: Option<u64>,
    #[arg(short, long)]
    pub input: Option<PathBuf>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

impl RunArgs {
    /// The config file (or defaults) with these flags applied.
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        macro_rules! set {
            ($flag:expr => $field:expr) => {
                if let Some(v) = $flag.clone() {
                    $field = v;
                }
            };
        }
        set!(self.kind => cfg.state);
        set!(self.n => cfg.n);
        set!(self.chi_max => cfg.chi_max);
        set!(self.lambdas => cfg.lambdas);
        set!(self.sweeps => cfg.n_sweeps);
        set!(self.seed => cfg.seed);
        set!(self.gamma_d => cfg.gamma_d);
        set!(self.gamma_b => cfg.gamma_b);
        set!(self.objective => cfg.optimizer.objective);
        set!(self.n_iter => cfg.optimizer.n_iter);
        set!(self.gradient => cfg.optimizer.gradient);
        if self.bidirectional {
            cfg.bidirectional = true;
        }
        if self.stall.is_some() {
            cfg.stall_cutoff = self.stall;
        }
        if self.random_init.is_some() {
            cfg.optimizer.random_init = self.random_init;
        }
        if self.input.is_some() {
            cfg.input = self.input.clone();
        }
        if self.output.is_some() {
            cfg.output = self.output.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct InjectArgs {
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    /// identity, x, h, cnot, swap, hh, random1 or random2.
    #[arg(long, default_value = "cnot")]
    pub u: String,
    /// First site the unitary acts on; defaults to the middle bond.
    #[arg(long)]
    pub site: Option<usize>,
    #[arg(long, default_value_t = 1e-8)]
    pub lambda: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub csv: PathBuf,
    #[arg(long, default_value = "sweep")]
    pub x: String,
    #[arg(long, default_value = "chi_mean")]
    pub y: String,
    /// Keep only rows with this run_id.
    #[arg(long)]
    pub run_id: Option<usize>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    pub first: PathBuf,
    pub second: PathBuf,
    /// Allowed |F_P - 1|.
    #[arg(long, default_value_t = STATE_TOL)]
    pub tol: f64,
}

fn write_rows<T: serde::Serialize>(rows: &[T], header: &[&str], cfg: &ExperimentConfig) -> Result<()> {
    match &cfg.output {
        Some(path) => {
            let file = std::fs::File::create(path).map_err(|e| HarnessError::io(path, e))?;
            commands::write_csv(rows, header, std::io::BufWriter::new(file))
        }
        None => commands::write_csv(rows, header, std::io::stdout().lock()),
    }
}

fn invariant_result(failures: Vec<String>) -> Result<()> {
    if failures.is_empty() {
        Ok(())
    } else {
        Err(HarnessError::Invariant(failures.join("; ")))
    }
}

/// Runs one command, printing its report to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let io = |e: std::io::Error| HarnessError::io("<stdout>", e);
    match cli.command {
        Command::Gen(args) => {
            let cfg = args.resolve()?;
            if cfg.output.is_none() {
                return Err(HarnessError::Usage("gen needs --output".into()));
            }
            let chain = commands::gen(&cfg)?;
            writeln!(out, "sites: {}", chain.n_sites()).map_err(io)?;
            writeln!(out, "chi: {:?}", chain.bond_dims()).map_err(io)?;
            writeln!(out, "kappa: {:?}", chain.kraus_dims()).map_err(io)?;
            Ok(())
        }
        Command::Prune(args) => {
            let cfg = args.resolve()?;
            let rows = commands::prune(&cfg)?;
            write_rows(&rows, &PRUNE_HEADER, &cfg)?;
            invariant_result(commands::check_prune_rows(&rows))
        }
        Command::Riemann(args) => {
            let cfg = args.resolve()?;
            let rows = commands::riemann(&cfg)?;
            write_rows(&rows, &RIEMANN_HEADER, &cfg)?;
            invariant_result(commands::check_riemann_rows(&rows))
        }
        Command::Inject(args) => {
            let u = commands::parse_unitary(&args.u, args.seed)?;
            let m = u.nrows().trailing_zeros() as usize;
            let site = args.site.unwrap_or((args.n.saturating_sub(m)) / 2);
            let report = commands::inject(args.n, &u, site, args.lambda)?;
            let r = &report.run;
            writeln!(out, "chi before: {:?}", r.bonds_before).map_err(io)?;
            writeln!(out, "chi after U: {:?}", r.bonds_after_unitary).map_err(io)?;
            writeln!(out, "chi after V^dagger: {:?}", r.bonds_after).map_err(io)?;
            writeln!(out, "phase: {:.6}", r.witness.phase).map_err(io)?;
            writeln!(out, "witness residual: {:.3e}", r.witness.residual).map_err(io)?;
            writeln!(out, "fidelity: {:.15}", r.fidelity).map_err(io)?;
            if let Some(d) = report.oracle_deviation {
                writeln!(out, "dense deviation: {d:.3e}").map_err(io)?;
            }
            invariant_result(report.failures)
        }
        Command::Fit(args) => {
            let fit = commands::fit_csv(&args.csv, &args.x, &args.y, args.run_id)?;
            writeln!(out, "alpha: {} +- {}", fit.alpha, fit.sigma_alpha).map_err(io)?;
            writeln!(out, "beta: {} +- {}", fit.beta, fit.sigma_beta).map_err(io)?;
            writeln!(out, "gamma: {} +- {}", fit.gamma, fit.sigma_gamma).map_err(io)?;
            writeln!(out, "residual_norm: {}", fit.residual_norm).map_err(io)?;
            writeln!(out, "converged: {}", fit.converged).map_err(io)?;
            if fit.converged {
                Ok(())
            } else {
                Err(HarnessError::Invariant("fit did not converge".into()))
            }
        }
        Command::Verify(args) => {
            let a = commands::load_bundle(&args.first)?;
            let b = commands::load_bundle(&args.second)?;
            let report = commands::verify(&a, &b, args.tol)?;
            writeln!(out, "F_P: {:.15}", report.fidelity).map_err(io)?;
            if let Some(fd) = report.fidelity_dense {
                writeln!(out, "F_P (dense): {fd:.15}").map_err(io)?;
            }
            writeln!(out, "|Tr-1|: {:.3e} {:.3e}", report.trace_dev_a, report.trace_dev_b).map_err(io)?;
            writeln!(out, "purity: {:.15e} {:.15e}", report.purity_a, report.purity_b).map_err(io)?;
            writeln!(out, "{}", if report.failures.is_empty() { "pass" } else { "fail" }).map_err(io)?;
            invariant_result(report.failures)
        }
    }
}
