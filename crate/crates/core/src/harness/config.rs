use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::HarnessError;
use crate::bandit::{make_grid, ArmSpace, GridDim, PolicyKind};
use crate::bridge::Transport;
use crate::env::{SyntheticPretrainSpec, TestFunctionSpec};
use crate::gp::{FitBudget, GpHyperparams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmSpaceConfig {
    pub dims: Vec<GridDim>,
}

/// A policy to run for every seed. A fixed arm without an index expands into
/// one policy per arm (the grid-search baseline).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicyEntry {
    GpTs,
    FixedArm {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        index: Option<usize>,
    },
    UniformRandom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvironmentConfig {
    Synthetic(SyntheticPretrainSpec),
    TestFunction(TestFunctionSpec),
    Replay {
        path: PathBuf,
    },
    Bridge {
        transport: Transport,
        /// Per-reply timeout in seconds; 0 waits indefinitely.
        #[serde(default)]
        timeout_s: f64,
        /// Forwarded to the trainer in the init message, with `seed` added.
        #[serde(default)]
        init_config: Map<String, Value>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Bandit interactions per run.
    pub interactions: u64,
    /// Trainer updates per interaction.
    pub updates: u64,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    pub arm_space: ArmSpaceConfig,
    pub policies: Vec<PolicyEntry>,
    /// Initial GP hyperparameters; defaults depend on the arm-space dimension.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gp: Option<GpHyperparams>,
    #[serde(default)]
    pub fit: FitBudget,
    pub environment: EnvironmentConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            interactions: 100,
            updates: 100,
            seeds: vec![0, 1, 2, 3, 4],
            output_dir: PathBuf::from("runs"),
            arm_space: ArmSpaceConfig { dims: vec![GridDim::new("rho", 0.0, 0.5, 0.05)] },
            policies: vec![PolicyEntry::GpTs, PolicyEntry::FixedArm { index: None }, PolicyEntry::UniformRandom],
            gp: None,
            fit: FitBudget::default(),
            environment: EnvironmentConfig::Synthetic(SyntheticPretrainSpec::default()),
        }
    }
}

pub const DEFAULT_CONFIG_TOML: &str = r#"# Number of bandit interactions per run and trainer updates per interaction.
interactions = 100
updates = 100
# One run per seed and policy. The seed drives both the policy stream and an
# independent environment stream.
seeds = [0, 1, 2, 3, 4]
# Relative to the working directory; --out overrides it.
output_dir = "runs"

# Arms are the grid points strictly inside (lower, upper), every `step`.
# Several [[arm_space.dims]] tables give their Cartesian product.
[[arm_space.dims]]
name = "rho"
lower = 0.0
upper = 0.5
step = 0.05

# kind = "gp_ts" | "fixed_arm" (optional `index`; without it, one run per arm)
#      | "uniform_random"
[[policies]]
kind = "gp_ts"

[[policies]]
kind = "fixed_arm"

[[policies]]
kind = "uniform_random"

# Type-II maximum likelihood refit after every interaction.
[fit]
restarts = 4
evals_per_restart = 60
seed = 0

# Initial GP hyperparameters. Omit this section to use a constant mean,
# Matern-5/2 kernel with lengthscale 0.1 per dimension, output scale 1 and
# noise variance 0.01.
# [gp]
# noise_variance = 0.01
# [gp.mean]
# family = "constant"        # or "zero"
# constant_value = 0.0
# [gp.kernel]
# family = "matern52"        # or "squared_exponential"
# lengthscales = [0.1]
# output_scale = 1.0

# kind = "synthetic" | "test_function" | "replay" | "bridge"
#
#   test_function: noise_sd = 0.1, initial_loss = 3.0
#   replay:        path = "log.csv"  (relative to this file)
#   bridge:        transport = { stdio = ["gpts", "mock-trainer", "--transport", "stdio"] }
#                  or transport = { tcp = "127.0.0.1:5555" }
#                  timeout_s = 0.0, [environment.init_config] forwarded to the trainer
[environment]
kind = "synthetic"
initial_loss = 10.0
floor = 1.5
optimum = [0.15]
width = [0.1]
rate = 0.3
noise_sd = 0.05
"#;

/// One concrete (policy, seed) run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunTask {
    pub policy: PolicyKind,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    /// Reads a config file; relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        if let EnvironmentConfig::Replay { path: p } = &mut cfg.environment {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn arm_space(&self) -> Result<ArmSpace, HarnessError> {
        make_grid(self.arm_space.dims.clone()).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn gp_defaults(&self) -> GpHyperparams {
        self.gp.clone().unwrap_or_else(|| GpHyperparams::default_for_dim(self.arm_space.dims.len()))
    }

    /// Checks everything that can be checked without running, and expands the
    /// policy list into concrete runs in (policy, seed) order.
    pub fn validate(&self) -> Result<Vec<RunTask>, HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.seeds.is_empty() {
            return bad("seeds must not be empty".into());
        }
        if self.interactions < 1 || self.updates < 1 {
            return bad("interactions and updates must be at least 1".into());
        }
        if self.policies.is_empty() {
            return bad("no policies configured".into());
        }
        let space = self.arm_space()?;
        let gp = self.gp_defaults();
        gp.validate().map_err(|e| HarnessError::Config(format!("gp: {e}")))?;
        if gp.dim() != space.dim() {
            return bad(format!("gp has {} lengthscales for a {}-dimensional arm space", gp.dim(), space.dim()));
        }
        match &self.environment {
            EnvironmentConfig::Synthetic(spec) => {
                spec.validate().map_err(|e| HarnessError::Config(format!("synthetic: {e}")))?;
                if spec.optimum.len() != space.dim() {
                    return bad(format!(
                        "synthetic optimum has {} coordinates, arms have {}",
                        spec.optimum.len(),
                        space.dim()
                    ));
                }
            }
            EnvironmentConfig::TestFunction(_) if space.dim() != 1 => {
                return bad("the test function needs a one-dimensional arm space".into());
            }
            _ => {}
        }
        let mut kinds = Vec::new();
        for p in &self.policies {
            match *p {
                PolicyEntry::GpTs => kinds.push(PolicyKind::GpTs),
                PolicyEntry::UniformRandom => kinds.push(PolicyKind::UniformRandom),
                PolicyEntry::FixedArm { index: Some(i) } if i >= space.len() => {
                    return bad(format!("fixed arm {i} outside an arm space of {} arms", space.len()));
                }
                PolicyEntry::FixedArm { index: Some(i) } => kinds.push(PolicyKind::FixedArm { index: i }),
                PolicyEntry::FixedArm { index: None } => {
                    kinds.extend((0..space.len()).map(|index| PolicyKind::FixedArm { index }))
                }
            }
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = kinds.iter().find(|k| !seen.insert(**k)) {
            return bad(format!("policy {} listed twice", dup.label()));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = self.seeds.iter().find(|s| !seen.insert(**s)) {
            return bad(format!("seed {dup} listed twice"));
        }
        Ok(kinds.into_iter().flat_map(|policy| self.seeds.iter().map(move |&seed| RunTask { policy, seed })).collect())
    }
}
