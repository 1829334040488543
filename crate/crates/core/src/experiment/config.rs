use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::DEFAULT_FOCK_BUDGET;
use crate::semiclassics::MAX_MOMENT_ORDER;
use crate::spectral::{InteractionKernel, OneBodySpec};

fn default_coupling_rule() -> f64 {
    1.0
}

fn default_k_max() -> usize {
    2
}

fn default_n_max_policy() -> f64 {
    1e-8
}

fn default_fock_budget() -> usize {
    DEFAULT_FOCK_BUDGET
}

fn default_n_max_limit() -> usize {
    4000
}

fn default_trial_samples() -> usize {
    256
}

fn default_bl_samples() -> usize {
    1024
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputPaths {
    /// Long-format metric table.
    pub csv: PathBuf,
    /// Summary with config echo, oracle values and timings.
    pub json: PathBuf,
}

impl Default for OutputPaths {
    fn default() -> Self {
        OutputPaths {
            csv: PathBuf::from("report.csv"),
            json: PathBuf::from("summary.json"),
        }
    }
}

impl OutputPaths {
    /// Relative paths re-rooted under `dir`.
    pub fn under(&self, dir: &Path) -> OutputPaths {
        let join = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { dir.join(p) };
        OutputPaths {
            csv: join(&self.csv),
            json: join(&self.json),
        }
    }
}

/// A schedule of `(T, λ = coupling_rule / T)` runs on a fixed mode truncation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub operator: OneBodySpec,
    pub kernel: InteractionKernel,
    #[serde(rename = "K")]
    pub modes: usize,
    #[serde(rename = "T_schedule")]
    pub t_schedule: Vec<f64>,
    #[serde(default = "default_coupling_rule")]
    pub coupling_rule: f64,
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    pub mc_samples: usize,
    pub seed: u64,
    /// Tail-mass threshold for the particle cutoff.
    #[serde(default = "default_n_max_policy")]
    pub n_max_policy: f64,
    #[serde(default)]
    pub output: OutputPaths,
    #[serde(default = "default_fock_budget")]
    pub fock_budget: usize,
    #[serde(default = "default_n_max_limit")]
    pub n_max_limit: usize,
    #[serde(default = "default_trial_samples")]
    pub trial_samples: usize,
    #[serde(default = "default_bl_samples")]
    pub bl_samples: usize,
}

impl ExperimentConfig {
    /// Config with every optional field at its default.
    pub fn new(
        operator: OneBodySpec,
        kernel: InteractionKernel,
        modes: usize,
        t_schedule: Vec<f64>,
        mc_samples: usize,
        seed: u64,
    ) -> Self {
        ExperimentConfig {
            operator,
            kernel,
            modes,
            t_schedule,
            coupling_rule: default_coupling_rule(),
            k_max: default_k_max(),
            mc_samples,
            seed,
            n_max_policy: default_n_max_policy(),
            output: OutputPaths::default(),
            fock_budget: default_fock_budget(),
            n_max_limit: default_n_max_limit(),
            trial_samples: default_trial_samples(),
            bl_samples: default_bl_samples(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.operator.validate()?;
        self.kernel.validate()?;
        if self.modes == 0 {
            return Err(Error::Config("K must be at least 1".into()));
        }
        if self.t_schedule.is_empty() {
            return Err(Error::Config("T_schedule is empty".into()));
        }
        if self.t_schedule.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
            return Err(Error::Config("temperatures must be positive and finite".into()));
        }
        if self.t_schedule.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("T_schedule must be strictly ascending".into()));
        }
        if !(self.coupling_rule > 0.0 && self.coupling_rule.is_finite()) {
            return Err(Error::Config("coupling_rule must be positive".into()));
        }
        if self.k_max == 0 || self.k_max > MAX_MOMENT_ORDER {
            return Err(Error::Config(format!("k_max must be in 1..={MAX_MOMENT_ORDER}")));
        }
        if self.mc_samples == 0 {
            return Err(Error::Config("mc_samples must be at least 1".into()));
        }
        if !(self.n_max_policy > 0.0 && self.n_max_policy < 1.0) {
            return Err(Error::Config("n_max_policy must lie in (0, 1)".into()));
        }
        if self.trial_samples == 0 || self.bl_samples == 0 {
            return Err(Error::Config("trial_samples and bl_samples must be positive".into()));
        }
        Ok(())
    }

    pub fn coupling(&self, temperature: f64) -> f64 {
        self.coupling_rule / temperature
    }
}
