//! Experiment configuration: a TOML file whose keys match the fields of
//! [`ExperimentConfig`]. Missing keys take their defaults.
//!
//! ```toml
//! state = "subopt"
//! n = 12
//! chi_max = 8
//! lambdas = [0.1]
//! n_sweeps = 15
//! stall_cutoff = 1e-8
//!
//! [optimizer]
//! objective = "s_vn"
//! n_iter = 300
//! ```

use std::path::{Path, PathBuf};

use lpdo_core::stiefel::OptimizerConfig;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum StateKind {
    /// The exact product purification of the maximally mixed state.
    Optimal,
    /// A random pure state with bounded bond dimension.
    RandomPure,
    /// A random pure state sent through full depolarization.
    Subopt,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub state: StateKind,
    pub n: usize,
    pub chi_max: usize,
    pub lambdas: Vec<f64>,
    pub n_sweeps: usize,
    pub bidirectional: bool,
    pub gamma_d: f64,
    pub gamma_b: f64,
    pub kraus_cutoff: f64,
    pub seed: u64,
    /// Truncate with this cutoff until the bonds settle before optimizing.
    pub stall_cutoff: Option<f64>,
    pub stall_max_sweeps: usize,
    pub optimizer: OptimizerConfig,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            state: StateKind::Subopt,
            n: 20,
            chi_max: 8,
            lambdas: vec![0.05, 0.1, 0.2, 0.3, 0.4, 0.5],
            n_sweeps: 20,
            bidirectional: false,
            gamma_d: 0.5,
            gamma_b: 0.5,
            kraus_cutoff: 1e-12,
            seed: 1,
            stall_cutoff: None,
            stall_max_sweeps: 50,
            optimizer: OptimizerConfig::default(),
            input: None,
            output: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        if self.n == 0 || self.n > 1000 {
            return bad(format!("n = {} outside 1..=1000", self.n));
        }
        if self.chi_max == 0 || self.chi_max > 256 {
            return bad(format!("chi_max = {} outside 1..=256", self.chi_max));
        }
        if let Some(l) = self.lambdas.iter().find(|l| !(0.0..1.0).contains(*l)) {
            return bad(format!("cutoff {l} outside [0, 1)"));
        }
        for (name, g) in [("gamma_d", self.gamma_d), ("gamma_b", self.gamma_b)] {
            if !(0.0..=1.0).contains(&g) {
                return bad(format!("{name} = {g} outside [0, 1]"));
            }
        }
        if !(0.0..1.0).contains(&self.kraus_cutoff) {
            return bad(format!("kraus_cutoff = {} outside [0, 1)", self.kraus_cutoff));
        }
        if let Some(s) = self.stall_cutoff.filter(|s| !(0.0..1.0).contains(s)) {
            return bad(format!("stall_cutoff = {s} outside [0, 1)"));
        }
        self.optimizer.validate().map_err(|e| HarnessError::Config(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use lpdo_core::stiefel::{EntropyKind, GradientMode};

    #[test]
    fn round_trips_through_toml() {
        let mut cfg = ExperimentConfig::default();
        cfg.lambdas = vec![1e-8, 0.3];
        cfg.stall_cutoff = Some(1e-8);
        cfg.optimizer.objective = EntropyKind::VonNeumann;
        cfg.optimizer.gradient = GradientMode::FiniteDifference;
        cfg.optimizer.random_init = Some(7);
        cfg.output = Some("out.csv".into());
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        let d = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::from_toml(&d.to_toml()).unwrap(), d);
    }

    #[test]
    fn partial_files_fill_defaults() {
        let cfg = ExperimentConfig::from_toml("n = 6\n[optimizer]\nobjective = \"s_vn\"\n").unwrap();
        assert_eq!(cfg.n, 6);
        assert_eq!(cfg.chi_max, 8);
        assert_eq!(cfg.optimizer.objective, EntropyKind::VonNeumann);
        assert_eq!(cfg.optimizer.n_iter, OptimizerConfig::default().n_iter);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(ExperimentConfig::from_toml("n = 0").is_err());
        assert!(ExperimentConfig::from_toml("lambdas = [1.5]").is_err());
        assert!(ExperimentConfig::from_toml("gamma_d = -0.1").is_err());
        assert!(ExperimentConfig::from_toml("nonsense = 1").is_err());
        assert!(ExperimentConfig::from_toml("[optimizer]\nshrink = 2.0").is_err());
    }
}
