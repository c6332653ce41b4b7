//! Analytic benchmark studies with known ground truth.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dataset::{sample_inputs, Distribution, LearningSample, Role, VariableSpec};
use crate::error::{Error, Result};
use crate::rng::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SyntheticFunction {
    /// Linear in the active inputs with decreasing coefficients.
    AdditiveLinear,
    /// Ishigami function on the first three inputs, inert elsewhere.
    IshigamiExtended,
    /// Bell over the two penalizing inputs with an interaction term, plus a
    /// linear background over the remaining explanatory inputs.
    BellInteraction,
}

/// Parameters of the bell-interaction function
/// `A·exp(−(x_a−c_a)²/s_a² − (x_b−c_b)²/s_b²·(1+γ·x_a)) + Σ b_k·x_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BellParams {
    pub amplitude: f64,
    pub centers: [f64; 2],
    pub widths: [f64; 2],
    pub interaction: f64,
    /// One coefficient per background input, in column order after the two
    /// penalizing inputs.
    pub background: Vec<f64>,
}

impl Default for BellParams {
    fn default() -> Self {
        Self {
            amplitude: 3.0,
            centers: [0.6, 0.4],
            widths: [0.25, 0.3],
            interaction: 0.5,
            background: vec![1.0, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub function: SyntheticFunction,
    /// Total number of inputs, active plus inert.
    pub d_total: usize,
    /// Active inputs (0-based columns). Defaults per function when empty.
    #[serde(default)]
    pub active_indices: Vec<usize>,
    pub n: usize,
    pub seed: u64,
    #[serde(default)]
    pub bell: Option<BellParams>,
}

const LINEAR_COEFFICIENTS: [f64; 5] = [2.0, 1.75, 1.5, 1.25, 1.0];

/// Known structure of a generated study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub function: SyntheticFunction,
    pub d_total: usize,
    pub active_indices: Vec<usize>,
    pub penalize_indices: [usize; 2],
    /// Coefficient of each active input for additive-linear studies.
    pub coefficients: Option<Vec<f64>>,
    pub bell: Option<BellParams>,
}

impl SyntheticSpec {
    pub fn new(function: SyntheticFunction, d_total: usize, n: usize, seed: u64) -> Self {
        Self {
            function,
            d_total,
            active_indices: Vec::new(),
            n,
            seed,
            bell: None,
        }
    }

    /// Default active inputs: spread evenly over the columns for
    /// additive-linear, the leading columns otherwise.
    fn resolved_active(&self) -> Vec<usize> {
        if !self.active_indices.is_empty() {
            return self.active_indices.clone();
        }
        match self.function {
            SyntheticFunction::AdditiveLinear => {
                let k = self.d_total.min(LINEAR_COEFFICIENTS.len());
                (0..k).map(|i| i * self.d_total / k).collect()
            }
            SyntheticFunction::IshigamiExtended => (0..3).collect(),
            SyntheticFunction::BellInteraction => {
                let p = self.bell_params();
                (0..2 + p.background.len()).collect()
            }
        }
    }

    fn bell_params(&self) -> BellParams {
        self.bell.clone().unwrap_or_default()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidArgument("sample size must be positive".into()));
        }
        if self.n < 2 {
            return Err(Error::InvalidArgument("at least two runs are required".into()));
        }
        let active = self.resolved_active();
        let min_d = match self.function {
            SyntheticFunction::AdditiveLinear => 2,
            SyntheticFunction::IshigamiExtended => 3,
            SyntheticFunction::BellInteraction => 2 + self.bell_params().background.len(),
        };
        if self.d_total < min_d {
            return Err(Error::InvalidArgument(format!(
                "{:?} needs at least {min_d} inputs, got {}",
                self.function, self.d_total
            )));
        }
        if active.iter().any(|&j| j >= self.d_total) {
            return Err(Error::InvalidArgument("active index outside 0..d_total".into()));
        }
        let mut sorted = active.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != active.len() {
            return Err(Error::InvalidArgument("duplicate active index".into()));
        }
        match self.function {
            SyntheticFunction::AdditiveLinear if active.len() < 2 || active.len() > LINEAR_COEFFICIENTS.len() => {
                Err(Error::InvalidArgument(format!(
                    "additive-linear supports 2 to {} active inputs",
                    LINEAR_COEFFICIENTS.len()
                )))
            }
            SyntheticFunction::IshigamiExtended | SyntheticFunction::BellInteraction
                if !self.active_indices.is_empty() && active != self.resolved_default() =>
            {
                Err(Error::InvalidArgument(format!(
                    "{:?} has a fixed active set {:?}",
                    self.function,
                    self.resolved_default()
                )))
            }
            _ => Ok(()),
        }
    }

    fn resolved_default(&self) -> Vec<usize> {
        Self {
            active_indices: Vec::new(),
            ..self.clone()
        }
        .resolved_active()
    }

    pub fn marginal(&self) -> Distribution {
        match self.function {
            SyntheticFunction::IshigamiExtended => Distribution::Uniform {
                lower: -std::f64::consts::PI,
                upper: std::f64::consts::PI,
            },
            _ => Distribution::Uniform { lower: 0.0, upper: 1.0 },
        }
    }

    /// The two inputs that play the penalizing role.
    pub fn penalize_indices(&self) -> [usize; 2] {
        match self.function {
            SyntheticFunction::AdditiveLinear => {
                let a = self.resolved_active();
                [a[0], a[1]]
            }
            _ => [0, 1],
        }
    }

    pub fn variables(&self) -> Vec<VariableSpec> {
        let pen = self.penalize_indices();
        (0..self.d_total)
            .map(|k| {
                let role = if pen.contains(&k) {
                    Role::Penalize
                } else {
                    Role::Candidate
                };
                VariableSpec::new(format!("x{}", k + 1), k, role, self.marginal())
            })
            .collect()
    }

    /// Evaluates the analytic function at one input vector.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        match self.function {
            SyntheticFunction::AdditiveLinear => self
                .resolved_active()
                .iter()
                .zip(LINEAR_COEFFICIENTS)
                .map(|(&j, c)| c * x[j])
                .sum(),
            SyntheticFunction::IshigamiExtended => {
                x[0].sin() + 7.0 * x[1].sin().powi(2) + 0.1 * x[2].powi(4) * x[0].sin()
            }
            SyntheticFunction::BellInteraction => bell(&self.bell_params(), x),
        }
    }

    pub fn ground_truth(&self) -> GroundTruth {
        let active = self.resolved_active();
        GroundTruth {
            function: self.function,
            d_total: self.d_total,
            coefficients: matches!(self.function, SyntheticFunction::AdditiveLinear)
                .then(|| LINEAR_COEFFICIENTS[..active.len()].to_vec()),
            active_indices: active,
            penalize_indices: self.penalize_indices(),
            bell: matches!(self.function, SyntheticFunction::BellInteraction).then(|| self.bell_params()),
        }
    }

    /// Draws the design and evaluates the function on every row.
    pub fn generate(&self) -> Result<(LearningSample, GroundTruth)> {
        self.validate()?;
        let vars = self.variables();
        let x = sample_inputs(&vars, self.n, derive_seed(self.seed, "synthetic-design"))?;
        let y = (0..self.n)
            .map(|i| self.evaluate(&x.row(i).iter().copied().collect::<Vec<_>>()))
            .collect();
        Ok((LearningSample::new(x, y, vars, "y")?, self.ground_truth()))
    }

    /// Brute-force conditional exceedance of the true function at every
    /// penalizing pair, integrating the other inputs with `draws` shared
    /// samples. Rows follow `axis1`, columns `axis2`.
    pub fn true_exceedance(
        &self,
        axis1: &[f64],
        axis2: &[f64],
        threshold: f64,
        draws: usize,
        seed: u64,
    ) -> Result<Vec<Vec<f64>>> {
        self.validate()?;
        let vars = self.variables();
        let pen = self.penalize_indices();
        let others: Vec<VariableSpec> = vars.iter().filter(|v| !pen.contains(&v.index)).cloned().collect();
        let sample = if others.is_empty() {
            DMatrix::zeros(draws.max(1), 0)
        } else {
            sample_inputs(&others, draws, derive_seed(seed, "true-exceedance"))?
        };
        let mut x = vec![0.0; self.d_total];
        let mut out = vec![vec![0.0; axis2.len()]; axis1.len()];
        for (i, &a) in axis1.iter().enumerate() {
            for (j, &b) in axis2.iter().enumerate() {
                let mut hits = 0usize;
                for m in 0..sample.nrows() {
                    for (t, v) in others.iter().enumerate() {
                        x[v.index] = sample[(m, t)];
                    }
                    x[pen[0]] = a;
                    x[pen[1]] = b;
                    hits += usize::from(self.evaluate(&x) > threshold);
                }
                out[i][j] = hits as f64 / sample.nrows() as f64;
            }
        }
        Ok(out)
    }
}

fn bell(p: &BellParams, x: &[f64]) -> f64 {
    let da = (x[0] - p.centers[0]) / p.widths[0];
    let db = (x[1] - p.centers[1]) / p.widths[1];
    let peak = p.amplitude * (-(da * da) - db * db * (1.0 + p.interaction * x[0])).exp();
    peak + p.background.iter().zip(&x[2..]).map(|(b, v)| b * v).sum::<f64>()
}
