use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::likelihood::LikelihoodProblem;
use super::optimize::minimize_bounded;
use super::{matern_with_log_derivative, GpHyperparams, MaternNu};
use crate::dataset::LearningSample;
use crate::error::{Error, Result};
use crate::hsic::sample_std;
use crate::rng::{derive_indexed, rng_from_seed};

/// Relative jitter added to the covariance diagonal, as a fraction of the
/// output variance.
pub const NUGGET_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub mean: f64,
    pub mse: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitOptions {
    pub nu: MaternNu,
    /// Number of local optimizations; a warm start counts as one.
    pub starts: usize,
    /// Likelihood evaluations allowed per start.
    pub max_evals: usize,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            nu: MaternNu::FiveHalves,
            starts: 10,
            max_evals: 200,
            seed: 0,
        }
    }
}

/// A Gaussian process conditioned on a learning sample.
#[derive(Debug, Clone)]
pub struct GpModel {
    hyperparams: GpHyperparams,
    nugget_floor: f64,
    input_indices: Vec<usize>,
    input_means: Vec<f64>,
    input_scales: Vec<f64>,
    x: DMatrix<f64>,
    y: Vec<f64>,
    lower: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
    log_likelihood: f64,
}

fn standardization(x_raw: &DMatrix<f64>) -> (Vec<f64>, Vec<f64>) {
    let p = x_raw.ncols();
    let mut means = Vec::with_capacity(p);
    let mut scales = Vec::with_capacity(p);
    for k in 0..p {
        let col: Vec<f64> = x_raw.column(k).iter().copied().collect();
        let mean = col.iter().sum::<f64>() / col.len() as f64;
        let sd = sample_std(&col);
        means.push(mean);
        scales.push(if sd > 0.0 { sd } else { 1.0 });
    }
    (means, scales)
}

fn output_scale(y: &[f64]) -> f64 {
    let s = sample_std(y);
    if s > 0.0 {
        s * s
    } else {
        1.0
    }
}

impl GpModel {
    /// Conditions a process with the given covariance hyperparameters on
    /// raw inputs `x_raw` (columns ordered as `input_indices`). The trend is
    /// re-estimated by generalized least squares.
    pub fn condition(
        hyperparams: &GpHyperparams,
        x_raw: &DMatrix<f64>,
        y: &[f64],
        input_indices: Vec<usize>,
    ) -> Result<Self> {
        hyperparams.validate()?;
        let (n, p) = x_raw.shape();
        if y.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: y.len(),
            });
        }
        if hyperparams.lengths.len() != p || input_indices.len() != p {
            return Err(Error::LengthMismatch {
                expected: p,
                got: hyperparams.lengths.len(),
            });
        }
        let (input_means, input_scales) = standardization(x_raw);
        let x = DMatrix::from_fn(n, p, |i, k| (x_raw[(i, k)] - input_means[k]) / input_scales[k]);
        let floor = NUGGET_FLOOR * output_scale(y);
        let problem = LikelihoodProblem::new(&x, y, hyperparams.matern_nu, floor);
        let eval = problem.evaluate(hyperparams).ok_or(Error::IndefiniteCovariance)?;
        let mut hp = hyperparams.clone();
        hp.trend = eval.trend;
        Ok(Self {
            hyperparams: hp,
            nugget_floor: floor,
            input_indices,
            input_means,
            input_scales,
            x,
            y: y.to_vec(),
            lower: eval.chol.l(),
            chol: eval.chol,
            alpha: eval.alpha,
            log_likelihood: eval.lml,
        })
    }

    pub fn hyperparams(&self) -> &GpHyperparams {
        &self.hyperparams
    }

    pub fn input_indices(&self) -> &[usize] {
        &self.input_indices
    }

    pub fn dim(&self) -> usize {
        self.input_indices.len()
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn log_likelihood(&self) -> f64 {
        self.log_likelihood
    }

    pub fn nugget_floor(&self) -> f64 {
        self.nugget_floor
    }

    pub fn input_means(&self) -> &[f64] {
        &self.input_means
    }

    pub fn input_scales(&self) -> &[f64] {
        &self.input_scales
    }

    /// Standardized training inputs.
    pub fn training_inputs(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn training_outputs(&self) -> &[f64] {
        &self.y
    }

    /// Lower Cholesky factor of `K + (τ + floor)·I`.
    pub fn cholesky_factor(&self) -> &DMatrix<f64> {
        &self.lower
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    /// Regularized training covariance `K + (τ + floor)·I`.
    pub fn regularized_covariance(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut k = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                k[(i, j)] = self.cross_std(self.x.row(i).transpose().as_slice(), j);
            }
            k[(i, i)] += self.hyperparams.nugget + self.nugget_floor;
        }
        k
    }

    /// `(K + (τ + floor)·I)⁻¹`.
    pub fn inverse_covariance(&self) -> DMatrix<f64> {
        self.chol.inverse()
    }

    pub(crate) fn standardize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.input_means.iter().zip(&self.input_scales))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    /// Correlation between a standardized point and training point `j`,
    /// scaled by the process variance.
    fn cross_std(&self, xs: &[f64], j: usize) -> f64 {
        let nu = self.hyperparams.matern_nu;
        let mut prod = self.hyperparams.process_variance;
        for (k, l) in self.hyperparams.lengths.iter().enumerate() {
            prod *= matern_with_log_derivative((xs[k] - self.x[(j, k)]).abs() / l, nu).0;
        }
        prod
    }

    fn cross_vector(&self, xs: &[f64]) -> DVector<f64> {
        DVector::from_fn(self.n(), |j, _| self.cross_std(xs, j))
    }

    /// Covariance between two standardized points, including the nugget
    /// when they coincide.
    fn point_covariance(&self, a: &[f64], b: &[f64]) -> f64 {
        let nu = self.hyperparams.matern_nu;
        let mut prod = self.hyperparams.process_variance;
        for (k, l) in self.hyperparams.lengths.iter().enumerate() {
            prod *= matern_with_log_derivative((a[k] - b[k]).abs() / l, nu).0;
        }
        if a == b {
            prod += self.hyperparams.nugget;
        }
        prod
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::LengthMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Conditional mean and mean squared error at `x` (input units, model
    /// input order).
    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        self.check_point(x)?;
        let xs = self.standardize(x);
        let k = self.cross_vector(&xs);
        let mean = self.hyperparams.trend + k.dot(&self.alpha);
        let v = self
            .lower
            .solve_lower_triangular(&k)
            .ok_or(Error::IndefiniteCovariance)?;
        let mse = (self.hyperparams.process_variance + self.hyperparams.nugget - v.norm_squared()).max(0.0);
        if !mean.is_finite() || !mse.is_finite() {
            return Err(Error::NonFinite(format!("{x:?}")));
        }
        Ok(Prediction { mean, mse })
    }

    /// Predictions at every row of `points` (m×p, input units).
    pub fn predict_batch(&self, points: &DMatrix<f64>) -> Result<Vec<Prediction>> {
        (0..points.nrows())
            .map(|i| {
                let row: Vec<f64> = points.row(i).iter().copied().collect();
                self.predict(&row)
            })
            .collect()
    }

    /// Joint conditional distribution at the rows of `points`.
    pub fn predict_joint(&self, points: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let m = points.nrows();
        if points.ncols() != self.dim() {
            return Err(Error::LengthMismatch {
                expected: self.dim(),
                got: points.ncols(),
            });
        }
        let std_points: Vec<Vec<f64>> = (0..m)
            .map(|i| self.standardize(&points.row(i).iter().copied().collect::<Vec<_>>()))
            .collect();
        let kstar = DMatrix::from_fn(self.n(), m, |j, i| self.cross_std(&std_points[i], j));
        let mean = (kstar.transpose() * &self.alpha).add_scalar(self.hyperparams.trend);
        let v = self
            .lower
            .solve_lower_triangular(&kstar)
            .ok_or(Error::IndefiniteCovariance)?;
        let reduction = v.transpose() * &v;
        let cov = DMatrix::from_fn(m, m, |i, j| {
            self.point_covariance(&std_points[i], &std_points[j]) - reduction[(i, j)]
        });
        let cov = (&cov + cov.transpose()) * 0.5;
        Ok((mean, cov))
    }

    pub fn to_doc(&self, input_names: Vec<String>, training: Option<TrainingReference>) -> GpModelDoc {
        GpModelDoc {
            hyperparams: self.hyperparams.clone(),
            nugget_floor: self.nugget_floor,
            input_indices: self.input_indices.clone(),
            input_names,
            input_means: self.input_means.clone(),
            input_scales: self.input_scales.clone(),
            log_likelihood: self.log_likelihood,
            training,
        }
    }

    /// Rebuilds a serialized model on its learning sample.
    pub fn from_doc(doc: &GpModelDoc, sample: &LearningSample) -> Result<Self> {
        if let Some(&bad) = doc.input_indices.iter().find(|&&j| j >= sample.d()) {
            return Err(Error::InvalidArgument(format!(
                "model input index {bad} exceeds the sample dimension {}",
                sample.d()
            )));
        }
        let x = sample.select_columns(&doc.input_indices);
        let model = Self::condition(&doc.hyperparams, &x, sample.output(), doc.input_indices.clone())?;
        Ok(model)
    }
}

/// Where a serialized model's conditioning data lives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReference {
    pub path: String,
    pub sha256: String,
    pub rows: usize,
}

/// JSON form of a fitted model. The conditioning data is referenced, not
/// embedded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpModelDoc {
    pub hyperparams: GpHyperparams,
    pub nugget_floor: f64,
    pub input_indices: Vec<usize>,
    pub input_names: Vec<String>,
    pub input_means: Vec<f64>,
    pub input_scales: Vec<f64>,
    pub log_likelihood: f64,
    pub training: Option<TrainingReference>,
}

pub(crate) struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub start_lower: Vec<f64>,
    pub start_upper: Vec<f64>,
}

pub(crate) fn bounds(p: usize, scale: f64) -> Bounds {
    let ln = f64::ln;
    let mut lower = vec![ln(0.01); p];
    let mut upper = vec![ln(100.0); p];
    let mut start_lower = vec![ln(0.05); p];
    let mut start_upper = vec![ln(10.0); p];
    lower.extend([ln(1e-6 * scale), ln(1e-10 * scale)]);
    upper.extend([ln(1e3 * scale), ln(10.0 * scale)]);
    start_lower.extend([ln(0.1 * scale), ln(1e-6 * scale)]);
    start_upper.extend([ln(2.0 * scale), ln(0.5 * scale)]);
    Bounds {
        lower,
        upper,
        start_lower,
        start_upper,
    }
}

/// Latin hypercube in the start box.
fn latin_starts(b: &Bounds, count: usize, seed: u64) -> Vec<Vec<f64>> {
    if count == 0 {
        return Vec::new();
    }
    let dim = b.lower.len();
    let mut rng = rng_from_seed(seed);
    let mut points = vec![vec![0.0; dim]; count];
    for k in 0..dim {
        let mut strata: Vec<usize> = (0..count).collect();
        strata.shuffle(&mut rng);
        for (i, s) in strata.into_iter().enumerate() {
            let u = (s as f64 + rng.random::<f64>()) / count as f64;
            points[i][k] = b.start_lower[k] + u * (b.start_upper[k] - b.start_lower[k]);
        }
    }
    points
}

pub(crate) fn theta_from(hp: &GpHyperparams) -> Vec<f64> {
    let mut t: Vec<f64> = hp.lengths.iter().map(|l| l.ln()).collect();
    t.push(hp.process_variance.ln());
    t.push(hp.nugget.max(1e-300).ln());
    t
}

/// Maximum-likelihood fit on raw inputs `x_raw` (columns ordered as
/// `input_indices`). Starts are run independently and the best likelihood
/// wins, ties going to the lower start index.
pub fn fit(
    x_raw: &DMatrix<f64>,
    y: &[f64],
    input_indices: Vec<usize>,
    options: &FitOptions,
    init: Option<&GpHyperparams>,
) -> Result<GpModel> {
    let (n, p) = x_raw.shape();
    if p == 0 || n <= p {
        return Err(Error::InvalidArgument(format!(
            "fitting needs n > p >= 1, got n = {n}, p = {p}"
        )));
    }
    if y.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: y.len(),
        });
    }
    if input_indices.len() != p {
        return Err(Error::LengthMismatch {
            expected: p,
            got: input_indices.len(),
        });
    }
    if let Some(hp) = init {
        if hp.lengths.len() != p {
            return Err(Error::LengthMismatch {
                expected: p,
                got: hp.lengths.len(),
            });
        }
    }
    let (means, scales) = standardization(x_raw);
    let x = DMatrix::from_fn(n, p, |i, k| (x_raw[(i, k)] - means[k]) / scales[k]);
    // optimize on a standardized output so that shifting or rescaling y
    // only perturbs the problem at rounding level
    let scale = output_scale(y);
    let center = y.iter().sum::<f64>() / n as f64;
    let ys: Vec<f64> = y.iter().map(|v| (v - center) / scale.sqrt()).collect();
    let problem = LikelihoodProblem::new(&x, &ys, options.nu, NUGGET_FLOOR);
    let b = bounds(p, 1.0);

    let mut starts = Vec::with_capacity(options.starts.max(1));
    if let Some(hp) = init {
        let mut t = theta_from(hp);
        t[p] -= scale.ln();
        t[p + 1] -= scale.ln();
        starts.push(t);
    }
    let remaining = options.starts.max(1).saturating_sub(starts.len());
    starts.extend(latin_starts(&b, remaining, derive_indexed(options.seed, p as u64)));

    let results: Vec<Option<(f64, Vec<f64>)>> = starts
        .par_iter()
        .map(|x0| {
            minimize_bounded(
                |theta| {
                    problem
                        .value_and_gradient(theta)
                        .map(|(v, g)| (-v, g.into_iter().map(|d| -d).collect()))
                },
                x0,
                &b.lower,
                &b.upper,
                options.max_evals,
            )
            .map(|r| (r.value, r.x))
        })
        .collect();

    let mut best: Option<(f64, Vec<f64>)> = None;
    for (value, theta) in results.into_iter().flatten() {
        if best.as_ref().is_none_or(|(bv, _)| value < *bv) {
            best = Some((value, theta));
        }
    }
    let (_, theta) = best
        .ok_or_else(|| Error::FitFailure(format!("all {} starts failed the Cholesky factorization", starts.len())))?;
    let (lengths, variance, nugget) = problem.unpack(&theta);
    let hp = GpHyperparams::new(lengths, variance * scale, nugget * scale, options.nu);
    GpModel::condition(&hp, x_raw, y, input_indices)
}
