//! Experiment configuration: JSON schema, defaults, and validation.
//!
//! A config names one task, the matrices or ensemble it runs on, the sweep
//! grid, and the output prefix. Validation errors map to exit code 2; they
//! are raised before any computation starts.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sketchspec_core::chernoff::{EnsembleKind, MatrixEnsemble};
use sketchspec_core::generate::GeneratorSpec;

use crate::calibrate::REGIME_KEYS;

/// Every experiment the driver can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    AmmProject,
    AmmRowSample,
    Regression,
    LowrankSign,
    LowrankGaussian,
    LowrankLeverage,
    LowrankTail,
    JlLab,
    ChernoffLab,
    RudelsonLab,
    Calibrate,
}

impl Task {
    pub fn label(self) -> &'static str {
        match self {
            Task::AmmProject => "amm-project",
            Task::AmmRowSample => "amm-row-sample",
            Task::Regression => "regression",
            Task::LowrankSign => "lowrank-sign",
            Task::LowrankGaussian => "lowrank-gaussian",
            Task::LowrankLeverage => "lowrank-leverage",
            Task::LowrankTail => "lowrank-tail",
            Task::JlLab => "jl-lab",
            Task::ChernoffLab => "chernoff-lab",
            Task::RudelsonLab => "rudelson-lab",
            Task::Calibrate => "calibrate",
        }
    }

    fn needs_matrix(self) -> bool {
        matches!(
            self,
            Task::AmmProject
                | Task::AmmRowSample
                | Task::Regression
                | Task::LowrankSign
                | Task::LowrankGaussian
                | Task::LowrankLeverage
                | Task::LowrankTail
                | Task::RudelsonLab
        )
    }

    fn is_amm(self) -> bool {
        matches!(self, Task::AmmProject | Task::AmmRowSample)
    }
}

/// Grid of sweep values. Empty lists mean task-specific defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSpec {
    /// Sketch sizes. Empty: derive from the sample-size formula.
    pub t: Vec<usize>,
    /// Accuracy targets, each in (0, 1).
    pub eps: Vec<f64>,
    /// Ambient row counts (or subspace dimensions for jl-lab).
    pub n: Vec<usize>,
    /// Target ranks for low-rank tasks, subspace ranks for jl-lab.
    pub k: Vec<usize>,
}

/// Random-matrix ensemble selector for chernoff-lab.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub kind: EnsembleKind,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<usize>,
    /// Explicit norm cap for rank-r-frame; defaults to n/r, which makes the
    /// mean exactly the identity. Holding it fixed across an n sweep keeps
    /// deviations comparable between dimensions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
}

impl EnsembleConfig {
    pub fn build(&self) -> Result<MatrixEnsemble, String> {
        if self.gamma.is_some() && self.kind != EnsembleKind::RankRFrame {
            return Err("only rank-r-frame ensembles take an explicit gamma".into());
        }
        match self.kind {
            EnsembleKind::IsotropicOuterProduct => {
                MatrixEnsemble::isotropic(self.n).map_err(|e| e.to_string())
            }
            EnsembleKind::RankRFrame => {
                let r = self.r.ok_or("rank-r-frame ensemble needs the r field")?;
                match self.gamma {
                    Some(g) => {
                        MatrixEnsemble::rank_r_frame_scaled(self.n, r, g).map_err(|e| e.to_string())
                    }
                    None => MatrixEnsemble::rank_r_frame(self.n, r).map_err(|e| e.to_string()),
                }
            }
            EnsembleKind::DiagonalRademacher => {
                MatrixEnsemble::diagonal_rademacher(self.n).map_err(|e| e.to_string())
            }
            EnsembleKind::Custom => {
                Err("custom ensembles are built in code, not from configs".into())
            }
        }
    }
}

fn default_trials() -> usize {
    100
}

fn default_residual_scale() -> f64 {
    0.5
}

fn default_version() -> u32 {
    1
}

/// One experiment: task, inputs, sweep, trial count, seeds, and outputs.
///
/// Trial seeds are `seed_base + trial_index`, so reruns and partial reruns
/// reproduce the same draws regardless of thread count.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Schema version; must be 1.
    #[serde(default = "default_version")]
    pub version: u32,
    pub task: Task,
    /// Synthetic input matrix. Mutually exclusive with `matrix_path`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorSpec>,
    /// Second synthetic matrix for the product tasks. Defaults to the first
    /// generator re-seeded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator_b: Option<GeneratorSpec>,
    /// Input matrix file (.mtx/.mm or .bin/.sksp).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix_path: Option<String>,
    /// Second input matrix file for the product tasks, or an n x 1
    /// right-hand side for regression.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix_b_path: Option<String>,
    #[serde(default)]
    pub sweep: SweepSpec,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed_base: u64,
    /// Per-regime constant overrides, keyed like the calibration file.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub constant_overrides: BTreeMap<String, f64>,
    /// Calibration file to take constants from instead of the built-in
    /// defaults. Overrides still win.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration_path: Option<String>,
    /// Output prefix; the run writes `<prefix>.jsonl` and `<prefix>.csv`.
    pub output_path: String,
    /// Replace the random sketch with the identity (t = n). Errors become
    /// exact zeros and ratios exact ones; used to check the plumbing.
    #[serde(default)]
    pub identity_hook: bool,
    /// Ensemble for chernoff-lab.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<EnsembleConfig>,
    /// Regression right-hand sides are `A x0 + residual_scale * ||A x0|| *
    /// g` with unit-norm `g` orthogonal to nothing in particular.
    #[serde(default = "default_residual_scale")]
    pub residual_scale: f64,
    /// Attach a quadratic-form sandwich verdict to each amm-project record.
    #[serde(default)]
    pub record_sandwich: bool,
    /// Let rudelson-lab run below the stable-rank floor (with a warning).
    #[serde(default)]
    pub allow_below_stable_rank: bool,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, String> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| format!("config parse error: {e}"))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.version != 1 {
            return Err(format!(
                "unsupported config version {}, expected 1",
                self.version
            ));
        }
        if self.trials == 0 {
            return Err("trials must be at least 1".into());
        }
        if self.output_path.is_empty() {
            return Err("output_path must not be empty".into());
        }
        if !(self.residual_scale.is_finite() && self.residual_scale >= 0.0) {
            return Err(format!(
                "residual_scale must be finite and nonnegative, got {}",
                self.residual_scale
            ));
        }
        for &e in &self.sweep.eps {
            if !(e > 0.0 && e < 1.0) {
                return Err(format!("sweep.eps values must lie in (0, 1), got {e}"));
            }
        }
        for &t in &self.sweep.t {
            if t == 0 {
                return Err("sweep.t values must be at least 1".into());
            }
        }
        for &n in &self.sweep.n {
            if n == 0 {
                return Err("sweep.n values must be at least 1".into());
            }
        }
        for &k in &self.sweep.k {
            if k == 0 {
                return Err("sweep.k values must be at least 1".into());
            }
        }
        for (key, &value) in &self.constant_overrides {
            if !REGIME_KEYS.contains(&key.as_str()) {
                return Err(format!(
                    "unknown constant_overrides key {key:?}; known keys: {}",
                    REGIME_KEYS.join(", ")
                ));
            }
            if !(value.is_finite() && value > 0.0) {
                return Err(format!(
                    "constant_overrides[{key:?}] must be positive and finite, got {value}"
                ));
            }
        }
        if let Some(g) = &self.generator {
            g.validate()
                .map_err(|e| format!("generator invalid: {e}"))?;
        }
        if let Some(g) = &self.generator_b {
            g.validate()
                .map_err(|e| format!("generator_b invalid: {e}"))?;
        }
        if self.generator.is_some() && self.matrix_path.is_some() {
            return Err("give either generator or matrix_path, not both".into());
        }
        if self.generator_b.is_some() && self.matrix_b_path.is_some() {
            return Err("give either generator_b or matrix_b_path, not both".into());
        }

        let has_a = self.generator.is_some() || self.matrix_path.is_some();
        let has_b = self.generator_b.is_some() || self.matrix_b_path.is_some();

        if self.task.needs_matrix() && !has_a {
            return Err(format!(
                "task {} needs a generator or matrix_path",
                self.task.label()
            ));
        }
        if !self.task.needs_matrix() && has_a {
            return Err(format!(
                "task {} takes no input matrix",
                self.task.label()
            ));
        }
        if self.task.is_amm() && self.matrix_path.is_some() && !has_b {
            return Err("product tasks with a file-based A need generator_b or matrix_b_path".into());
        }
        if !self.task.is_amm() && self.task != Task::Regression && has_b {
            return Err(format!(
                "task {} takes no second input",
                self.task.label()
            ));
        }
        if self.task == Task::Regression && self.generator_b.is_some() {
            return Err("regression synthesizes its right-hand side; use matrix_b_path for an explicit one".into());
        }

        match self.task {
            Task::JlLab | Task::ChernoffLab | Task::RudelsonLab => {
                if self.sweep.t.is_empty() {
                    return Err(format!(
                        "task {} needs explicit sweep.t values",
                        self.task.label()
                    ));
                }
            }
            _ => {}
        }
        if self.task == Task::ChernoffLab {
            let ens = self
                .ensemble
                .as_ref()
                .ok_or("chernoff-lab needs an ensemble")?;
            ens.build()?;
        } else if self.ensemble.is_some() {
            return Err(format!(
                "only chernoff-lab takes an ensemble, not {}",
                self.task.label()
            ));
        }
        if self.identity_hook
            && matches!(
                self.task,
                Task::ChernoffLab | Task::RudelsonLab | Task::Calibrate
            )
        {
            return Err(format!(
                "the identity hook does not apply to {}",
                self.task.label()
            ));
        }
        if self.task == Task::LowrankTail && self.sweep.k.len() > 1 {
            return Err("lowrank-tail takes a single sweep.k value".into());
        }
        Ok(())
    }

    /// Seed that pins instance-level randomness (right-hand sides, derived
    /// second matrices): the generator seed when there is one, else
    /// seed_base.
    pub fn instance_seed(&self) -> u64 {
        self.generator.as_ref().map_or(self.seed_base, |g| g.seed)
    }
}
