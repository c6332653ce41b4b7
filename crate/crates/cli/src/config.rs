//! TOML study configuration.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use critmap_core::dataset::validate_schema;
use critmap_core::synth::{BellParams, SyntheticFunction, SyntheticSpec};
use critmap_core::{Distribution, KernelConfig, MaternNu, Relaxation, Role, VariableSpec};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableEntry {
    pub name: String,
    pub role: Role,
    pub distribution: Distribution,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSection {
    #[serde(default)]
    pub relaxation: Relaxation,
    /// Exponential relaxation scale; `std(y) / 5` when absent.
    #[serde(default)]
    pub scale: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitSection {
    pub starts: usize,
    pub max_evals: usize,
    pub q2_tolerance: f64,
    /// Likelihood evaluations per fold when validation refits each fold.
    pub fold_max_evals: usize,
}

impl Default for FitSection {
    fn default() -> Self {
        Self {
            starts: 10,
            max_evals: 200,
            q2_tolerance: 1e-3,
            fold_max_evals: 50,
        }
    }
}

/// Analytic study generated by `synth`; its sample replaces `sample_path`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSection {
    pub function: SyntheticFunction,
    pub d_total: usize,
    #[serde(default)]
    pub active_indices: Vec<usize>,
    pub n: usize,
    #[serde(default)]
    pub bell: Option<BellParams>,
}

impl SyntheticSection {
    pub fn spec(&self, seed: u64) -> SyntheticSpec {
        SyntheticSpec {
            function: self.function,
            d_total: self.d_total,
            active_indices: self.active_indices.clone(),
            n: self.n,
            seed,
            bell: self.bell.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    /// Learning sample CSV, relative to the config file.
    #[serde(default)]
    pub sample_path: Option<PathBuf>,
    #[serde(default = "default_output")]
    pub output_column: String,
    #[serde(default)]
    pub variables: Vec<VariableEntry>,
    #[serde(default = "default_quantile")]
    pub quantile_level: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_permutations")]
    pub permutations: usize,
    #[serde(default)]
    pub kernel: KernelConfig,
    #[serde(default)]
    pub output_kernel: KernelConfig,
    #[serde(default)]
    pub target: TargetSection,
    #[serde(default)]
    pub nu: MaternNu,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default)]
    pub fit: FitSection,
    #[serde(default = "default_grid")]
    pub grid: [usize; 2],
    #[serde(default = "default_mc")]
    pub mc_samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub synthetic: Option<SyntheticSection>,
}

fn default_output() -> String {
    "y".into()
}
fn default_quantile() -> f64 {
    0.9
}
fn default_alpha() -> f64 {
    0.1
}
fn default_permutations() -> usize {
    999
}
fn default_folds() -> usize {
    10
}
fn default_grid() -> [usize; 2] {
    [50, 50]
}
fn default_mc() -> usize {
    10_000
}

impl StudyConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).context("invalid study configuration")?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config {}", path.display()))
    }

    fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| -> Result<()> {
            if !(v > 0.0 && v < 1.0) {
                bail!("{name} must lie in (0, 1), got {v}");
            }
            Ok(())
        };
        unit("quantile_level", self.quantile_level)?;
        unit("alpha", self.alpha)?;
        if self.permutations == 0 {
            bail!("permutations must be positive");
        }
        if self.folds < 2 {
            bail!("folds must be at least 2, got {}", self.folds);
        }
        if self.grid.contains(&0) {
            bail!("grid resolution must be positive, got {:?}", self.grid);
        }
        if self.mc_samples == 0 {
            bail!("mc_samples must be positive");
        }
        if self.fit.starts == 0 || self.fit.max_evals == 0 || self.fit.fold_max_evals == 0 {
            bail!("fit starts and evaluation budgets must be positive");
        }
        if let Some(scale) = self.target.scale {
            if !(scale > 0.0 && scale.is_finite()) {
                bail!("target.scale must be positive, got {scale}");
            }
        }
        match (&self.synthetic, &self.sample_path) {
            (Some(_), Some(_)) => bail!("set either sample_path or [synthetic], not both"),
            (None, None) => bail!("sample_path is required unless a [synthetic] study is configured"),
            (Some(_), None) if !self.variables.is_empty() => {
                bail!("variables are derived from the [synthetic] study and must not be listed")
            }
            (None, Some(_)) => validate_schema(&self.variable_specs()?)?,
            _ => {}
        }
        Ok(())
    }

    /// Variables with indices assigned by position.
    pub fn variable_specs(&self) -> Result<Vec<VariableSpec>> {
        if self.variables.is_empty() {
            bail!("no variables declared");
        }
        Ok(self
            .variables
            .iter()
            .enumerate()
            .map(|(k, v)| VariableSpec::new(v.name.clone(), k, v.role, v.distribution))
            .collect())
    }
}
