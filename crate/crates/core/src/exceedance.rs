//! Conditional probability that the output exceeds a critical threshold,
//! mapped over a grid of the two penalizing inputs.
//!
//! For fixed penalizing values the probability integrates the predictive
//! Gaussian over the remaining explanatory inputs:
//!
//! ```text
//! P(x_pen) ≈ (1/M) Σ_m Φ((μ(x̃_m, x_pen) − q) / √mse(x̃_m, x_pen))
//! ```
//!
//! One sample `x̃_1..x̃_M` is shared by every grid cell (common random
//! numbers), which makes the surface smooth and exactly monotone in `q`.
//! Because the Matérn covariance is a product over inputs, the training
//! cross-covariance factors into a part shared by all cells and a per-cell
//! factor coming from the penalizing inputs, so each cell costs one
//! `M×n` by `n×n` product.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{sample_inputs, VariableSpec};
use crate::error::{Error, Result};
use crate::gp::{matern, GpModel};
use crate::rng::derive_seed;

/// Grid over the two penalizing inputs. `inputs` are the sample columns the
/// axes refer to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenGrid {
    pub inputs: [usize; 2],
    pub axis1: Vec<f64>,
    pub axis2: Vec<f64>,
}

impl PenGrid {
    pub fn new(inputs: [usize; 2], axis1: Vec<f64>, axis2: Vec<f64>) -> Result<Self> {
        let grid = Self { inputs, axis1, axis2 };
        for axis in [&grid.axis1, &grid.axis2] {
            if axis.is_empty() {
                return Err(Error::Empty("grid axis".into()));
            }
            if axis.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("grid axis value".into()));
            }
            if axis.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidArgument("grid axes must be strictly increasing".into()));
            }
        }
        if inputs[0] == inputs[1] {
            return Err(Error::InvalidArgument(
                "grid axes must refer to two distinct inputs".into(),
            ));
        }
        Ok(grid)
    }

    /// Evenly spaced axes spanning each input's support. Unbounded marginals
    /// are cut at their 0.5% and 99.5% quantiles.
    pub fn over_support(specs: [&VariableSpec; 2], resolution: (usize, usize)) -> Result<Self> {
        let axis = |spec: &VariableSpec, count: usize| -> Result<Vec<f64>> {
            if count == 0 {
                return Err(Error::InvalidArgument("grid resolution must be positive".into()));
            }
            spec.distribution.validate()?;
            let (lo, hi) = if spec.distribution.is_bounded() {
                spec.distribution.support()
            } else {
                (spec.distribution.quantile(0.005), spec.distribution.quantile(0.995))
            };
            if count == 1 {
                return Ok(vec![0.5 * (lo + hi)]);
            }
            let step = (hi - lo) / (count - 1) as f64;
            Ok((0..count)
                .map(|i| if i == count - 1 { hi } else { lo + step * i as f64 })
                .collect())
        };
        Self::new(
            [specs[0].index, specs[1].index],
            axis(specs[0], resolution.0)?,
            axis(specs[1], resolution.1)?,
        )
    }

    pub fn resolution(&self) -> (usize, usize) {
        (self.axis1.len(), self.axis2.len())
    }

    /// Checks every value against the declared supports.
    pub fn check_support(&self, specs: [&VariableSpec; 2]) -> Result<()> {
        for (axis, spec) in [(&self.axis1, specs[0]), (&self.axis2, specs[1])] {
            if let Some(&v) = axis.iter().find(|&&v| !spec.distribution.contains(v)) {
                return Err(Error::OutOfSupport {
                    row: 0,
                    column: spec.name.clone(),
                    value: v,
                    support: spec.distribution.to_string(),
                });
            }
        }
        Ok(())
    }
}

/// Row `i` of each matrix corresponds to `axis1[i]`, column `j` to
/// `axis2[j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExceedanceMap {
    pub grid: PenGrid,
    /// Full predictive estimate.
    pub probability: Vec<Vec<f64>>,
    pub mc_stderr: Vec<Vec<f64>>,
    /// Plug-in estimate: fraction of draws whose predicted mean exceeds `q`.
    pub plugin: Vec<Vec<f64>>,
    pub mc_samples: usize,
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorstCase {
    pub location: [f64; 2],
    pub probability: f64,
    pub indices: [usize; 2],
}

/// Probability that a Gaussian with the given mean and variance exceeds `q`.
/// A zero variance gives the indicator `mean > q`.
pub fn exceedance_term(mean: f64, mse: f64, q: f64) -> f64 {
    if mse > 0.0 {
        let z = (mean - q) / mse.sqrt();
        0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
    } else if mean > q {
        1.0
    } else {
        0.0
    }
}

/// Where each model input comes from during mapping.
enum Source {
    Pen(usize),
    Tilde(usize),
}

struct Layout {
    sources: Vec<Source>,
    tilde: Vec<VariableSpec>,
}

fn layout(model: &GpModel, pen: [usize; 2], tilde_specs: &[VariableSpec]) -> Result<Layout> {
    let mut tilde = Vec::new();
    let mut sources = Vec::with_capacity(model.dim());
    for &col in model.input_indices() {
        if let Some(a) = pen.iter().position(|&p| p == col) {
            sources.push(Source::Pen(a));
            continue;
        }
        let spec = tilde_specs.iter().find(|s| s.index == col).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "model input column {col} is neither penalizing nor covered by a marginal"
            ))
        })?;
        sources.push(Source::Tilde(tilde.len()));
        tilde.push(spec.clone());
    }
    Ok(Layout { sources, tilde })
}

/// Cross-covariance between the shared draws and the training points over
/// the non-penalizing inputs, scaled by the process variance (M×n).
fn shared_cross(model: &GpModel, layout: &Layout, draws: &DMatrix<f64>) -> DMatrix<f64> {
    let hp = model.hyperparams();
    let train = model.training_inputs();
    let (means, scales) = (model.input_means(), model.input_scales());
    let n = model.n();
    let m = draws.nrows();
    let mut c = DMatrix::from_element(m, n, hp.process_variance);
    for (k, source) in layout.sources.iter().enumerate() {
        let Source::Tilde(t) = *source else { continue };
        let length = hp.lengths[k];
        for j in 0..n {
            let xj = train[(j, k)];
            for i in 0..m {
                let xs = (draws[(i, t)] - means[k]) / scales[k];
                c[(i, j)] *= matern(xs - xj, length, hp.matern_nu);
            }
        }
    }
    c
}

/// Per-cell factor from the penalizing inputs (length n).
fn pen_factor(model: &GpModel, layout: &Layout, values: [f64; 2]) -> DVector<f64> {
    let hp = model.hyperparams();
    let train = model.training_inputs();
    let (means, scales) = (model.input_means(), model.input_scales());
    let mut r = DVector::from_element(model.n(), 1.0);
    for (k, source) in layout.sources.iter().enumerate() {
        let Source::Pen(a) = *source else { continue };
        let xs = (values[a] - means[k]) / scales[k];
        for j in 0..model.n() {
            r[j] *= matern(xs - train[(j, k)], hp.lengths[k], hp.matern_nu);
        }
    }
    r
}

/// Predictive means and variances at all draws for one penalizing pair.
fn cell_predictions(
    model: &GpModel,
    shared: &DMatrix<f64>,
    inverse: &DMatrix<f64>,
    r: &DVector<f64>,
) -> (DVector<f64>, DVector<f64>) {
    let hp = model.hyperparams();
    let weighted_alpha = r.component_mul(model.alpha());
    let means = (shared * weighted_alpha).add_scalar(hp.trend);
    let scaled_inverse = DMatrix::from_fn(inverse.nrows(), inverse.ncols(), |a, b| inverse[(a, b)] * r[a] * r[b]);
    let product = shared * scaled_inverse;
    let prior = hp.process_variance + hp.nugget;
    let mse = DVector::from_fn(shared.nrows(), |i, _| {
        (prior - product.row(i).dot(&shared.row(i))).max(0.0)
    });
    (means, mse)
}

struct CellEstimate {
    probability: f64,
    stderr: f64,
    plugin: f64,
}

fn estimate_cell(means: &DVector<f64>, mse: &DVector<f64>, q: f64) -> Result<CellEstimate> {
    let m = means.len() as f64;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut above = 0usize;
    for (&mu, &v) in means.iter().zip(mse.iter()) {
        if !mu.is_finite() || !v.is_finite() {
            return Err(Error::NonFinite(format!("prediction mean {mu}, mse {v}")));
        }
        let t = exceedance_term(mu, v, q);
        sum += t;
        sum_sq += t * t;
        above += usize::from(mu > q);
    }
    let probability = sum / m;
    // population variance of values in [0, 1] never exceeds 1/4
    let variance = (sum_sq / m - probability * probability).max(0.0);
    if !(0.0..=1.0).contains(&probability) {
        return Err(Error::NonFinite(format!("probability {probability} outside [0, 1]")));
    }
    Ok(CellEstimate {
        probability,
        stderr: (variance / m).sqrt(),
        plugin: above as f64 / m,
    })
}

/// Exceedance probability over a grid of the penalizing inputs.
///
/// `tilde_specs` gives the marginal of every other model input (matched by
/// sample column). The draws are shared across cells and determined by
/// `seed` alone.
pub fn exceedance_map(
    model: &GpModel,
    grid: &PenGrid,
    tilde_specs: &[VariableSpec],
    threshold: f64,
    samples: usize,
    seed: u64,
) -> Result<ExceedanceMap> {
    if samples == 0 {
        return Err(Error::InvalidArgument(
            "at least one Monte Carlo sample is required".into(),
        ));
    }
    if !threshold.is_finite() {
        return Err(Error::NonFinite("threshold".into()));
    }
    let grid = PenGrid::new(grid.inputs, grid.axis1.clone(), grid.axis2.clone())?;
    let layout = layout(model, grid.inputs, tilde_specs)?;
    let draws = if layout.tilde.is_empty() {
        DMatrix::zeros(samples, 0)
    } else {
        sample_inputs(&layout.tilde, samples, derive_seed(seed, "exceedance-draws"))?
    };
    let shared = shared_cross(model, &layout, &draws);
    let inverse = model.inverse_covariance();

    let cells: Vec<(usize, usize)> = (0..grid.axis1.len())
        .flat_map(|i| (0..grid.axis2.len()).map(move |j| (i, j)))
        .collect();
    let estimates: Vec<CellEstimate> = cells
        .par_iter()
        .map(|&(i, j)| {
            let r = pen_factor(model, &layout, [grid.axis1[i], grid.axis2[j]]);
            let (means, mse) = cell_predictions(model, &shared, &inverse, &r);
            estimate_cell(&means, &mse, threshold)
        })
        .collect::<Result<_>>()?;

    let (rows, cols) = grid.resolution();
    let mut probability = vec![vec![0.0; cols]; rows];
    let mut mc_stderr = vec![vec![0.0; cols]; rows];
    let mut plugin = vec![vec![0.0; cols]; rows];
    for (&(i, j), e) in cells.iter().zip(estimates) {
        probability[i][j] = e.probability;
        mc_stderr[i][j] = e.stderr;
        plugin[i][j] = e.plugin;
    }
    Ok(ExceedanceMap {
        grid,
        probability,
        mc_stderr,
        plugin,
        mc_samples: samples,
        threshold,
    })
}

/// Probability and Monte Carlo standard error at one penalizing pair; the
/// same computation as a one-cell map.
pub fn conditional_exceedance(
    model: &GpModel,
    pen_inputs: [usize; 2],
    pen_values: [f64; 2],
    tilde_specs: &[VariableSpec],
    threshold: f64,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let grid = PenGrid::new(pen_inputs, vec![pen_values[0]], vec![pen_values[1]])?;
    let map = exceedance_map(model, &grid, tilde_specs, threshold, samples, seed)?;
    Ok((map.probability[0][0], map.mc_stderr[0][0]))
}

/// Cell with the largest probability; ties go to the lexicographically
/// smallest `(i, j)`.
pub fn worst_case(map: &ExceedanceMap) -> WorstCase {
    let mut best = (0, 0);
    for (i, row) in map.probability.iter().enumerate() {
        for (j, &p) in row.iter().enumerate() {
            if p > map.probability[best.0][best.1] {
                best = (i, j);
            }
        }
    }
    WorstCase {
        location: [map.grid.axis1[best.0], map.grid.axis2[best.1]],
        probability: map.probability[best.0][best.1],
        indices: [best.0, best.1],
    }
}

impl ExceedanceMap {
    /// One row per cell, axis1 varying slowest.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("axis1_value,axis2_value,probability,stderr,plugin\n");
        for (i, a) in self.grid.axis1.iter().enumerate() {
            for (j, b) in self.grid.axis2.iter().enumerate() {
                out.push_str(&format!(
                    "{a},{b},{},{},{}\n",
                    self.probability[i][j], self.mc_stderr[i][j], self.plugin[i][j]
                ));
            }
        }
        out
    }

    pub fn max_stderr(&self) -> f64 {
        self.mc_stderr.iter().flatten().copied().fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Distribution, Role};
    use crate::gp::{GpHyperparams, MaternNu};
    use crate::rng::rng_from_seed;
    use rand::Rng;

    fn uniform(name: &str, index: usize, role: Role) -> VariableSpec {
        VariableSpec::new(name, index, role, Distribution::Uniform { lower: 0.0, upper: 1.0 })
    }

    fn specs() -> Vec<VariableSpec> {
        vec![
            uniform("a", 0, Role::Penalize),
            uniform("b", 1, Role::Penalize),
            uniform("c", 2, Role::Candidate),
            uniform("d", 3, Role::Candidate),
        ]
    }

    fn model_on(f: impl Fn(&[f64]) -> f64, n: usize, hp: &GpHyperparams, seed: u64) -> GpModel {
        let mut rng = rng_from_seed(seed);
        let x = DMatrix::from_fn(n, 4, |_, _| rng.random::<f64>());
        let y: Vec<f64> = (0..n)
            .map(|i| f(&x.row(i).iter().copied().collect::<Vec<_>>()))
            .collect();
        GpModel::condition(hp, &x, &y, vec![0, 1, 2, 3]).unwrap()
    }

    fn hp(variance: f64, nugget: f64) -> GpHyperparams {
        GpHyperparams::new(vec![1.0, 0.8, 1.2, 1.5], variance, nugget, MaternNu::FiveHalves)
    }

    fn smooth(x: &[f64]) -> f64 {
        (3.0 * x[0]).sin() + x[1] * x[2] + 0.5 * x[3]
    }

    #[test]
    fn term_limits() {
        assert_eq!(exceedance_term(1.0, 0.0, 0.5), 1.0);
        assert_eq!(exceedance_term(0.5, 0.0, 0.5), 0.0);
        assert_eq!(exceedance_term(0.0, 0.0, 0.5), 0.0);
        assert!((exceedance_term(2.0, 4.0, 2.0) - 0.5).abs() < 1e-15);
        // one standard deviation above the threshold
        assert!((exceedance_term(3.0, 4.0, 1.0) - 0.841_344_746_068_542_9).abs() < 1e-15);
    }

    #[test]
    fn factored_predictions_match_direct_predictions() {
        let model = model_on(smooth, 40, &hp(1.0, 1e-4), 1);
        let specs = specs();
        let layout = layout(&model, [0, 1], &specs[2..]).unwrap();
        let draws = sample_inputs(&layout.tilde, 25, 9).unwrap();
        let shared = shared_cross(&model, &layout, &draws);
        let inverse = model.inverse_covariance();
        let pen = [0.3, 0.7];
        let r = pen_factor(&model, &layout, pen);
        let (means, mse) = cell_predictions(&model, &shared, &inverse, &r);
        for i in 0..25 {
            let p = model.predict(&[pen[0], pen[1], draws[(i, 0)], draws[(i, 1)]]).unwrap();
            assert!((p.mean - means[i]).abs() < 1e-9, "{} vs {}", p.mean, means[i]);
            assert!((p.mse - mse[i]).abs() < 1e-8, "{} vs {}", p.mse, mse[i]);
        }
    }

    #[test]
    fn mean_at_threshold_gives_one_half() {
        // constant output: trend = q and a zero correction everywhere
        let model = model_on(|_| 2.5, 30, &hp(1.0, 0.0), 2);
        let specs = specs();
        let (p, se) = conditional_exceedance(&model, [0, 1], [0.4, 0.6], &specs[2..], 2.5, 500, 3).unwrap();
        assert!((p - 0.5).abs() <= 3.0 * se.max(1e-12), "{p} ± {se}");
    }

    #[test]
    fn tiny_variance_far_below_threshold_gives_zero() {
        let model = model_on(|_| -7.5, 30, &hp(1e-12, 0.0), 2);
        let specs = specs();
        let (p, _) = conditional_exceedance(&model, [0, 1], [0.4, 0.6], &specs[2..], 2.5, 200, 3).unwrap();
        assert!(p < 1e-9);
    }

    #[test]
    fn one_cell_map_equals_conditional_exceedance() {
        let model = model_on(smooth, 40, &hp(1.0, 1e-3), 4);
        let specs = specs();
        let grid = PenGrid::new([0, 1], vec![0.25], vec![0.75]).unwrap();
        let map = exceedance_map(&model, &grid, &specs[2..], 0.8, 300, 5).unwrap();
        let (p, se) = conditional_exceedance(&model, [0, 1], [0.25, 0.75], &specs[2..], 0.8, 300, 5).unwrap();
        assert_eq!(map.probability[0][0], p);
        assert_eq!(map.mc_stderr[0][0], se);
    }

    #[test]
    fn threshold_below_everything_is_certain() {
        let model = model_on(smooth, 40, &hp(0.5, 1e-6), 6);
        let specs = specs();
        let grid = PenGrid::over_support([&specs[0], &specs[1]], (4, 3)).unwrap();
        let map = exceedance_map(&model, &grid, &specs[2..], -50.0, 200, 7).unwrap();
        assert!(map.probability.iter().flatten().all(|&p| p >= 1.0 - 1e-6));
    }

    #[test]
    fn raising_the_threshold_never_increases_any_cell() {
        let model = model_on(smooth, 50, &hp(1.0, 1e-3), 8);
        let specs = specs();
        let grid = PenGrid::over_support([&specs[0], &specs[1]], (5, 5)).unwrap();
        let low = exceedance_map(&model, &grid, &specs[2..], 0.6, 400, 9).unwrap();
        let high = exceedance_map(&model, &grid, &specs[2..], 0.9, 400, 9).unwrap();
        for (a, b) in low.probability.iter().flatten().zip(high.probability.iter().flatten()) {
            assert!(b <= a);
        }
    }

    #[test]
    fn stderr_halves_with_four_times_the_draws() {
        let model = model_on(smooth, 40, &hp(0.2, 1e-3), 10);
        let specs = specs();
        let q = 0.9;
        let (_, s1) = conditional_exceedance(&model, [0, 1], [0.5, 0.5], &specs[2..], q, 2000, 11).unwrap();
        let (_, s2) = conditional_exceedance(&model, [0, 1], [0.5, 0.5], &specs[2..], q, 8000, 11).unwrap();
        let ratio = s1 / s2;
        assert!((1.5..=2.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn stderr_respects_the_bernoulli_bound() {
        let model = model_on(smooth, 40, &hp(1.0, 1e-3), 12);
        let specs = specs();
        let grid = PenGrid::over_support([&specs[0], &specs[1]], (3, 3)).unwrap();
        for m in [1, 2, 7, 100] {
            let map = exceedance_map(&model, &grid, &specs[2..], 0.7, m, 13).unwrap();
            assert!(map.max_stderr() <= 0.5 / (m as f64).sqrt() + 1e-15);
        }
    }

    #[test]
    fn full_and_plugin_agree_for_near_interpolating_model() {
        // dense design over the penalizing inputs only, so the predictive
        // variance is close to zero at every cell
        let side = 15;
        let x = DMatrix::from_fn(side * side, 2, |i, k| {
            let c = if k == 0 { i / side } else { i % side };
            c as f64 / (side - 1) as f64
        });
        let y: Vec<f64> = (0..side * side).map(|i| x[(i, 0)] + x[(i, 1)]).collect();
        let hp = GpHyperparams::new(vec![2.0, 2.0], 1.0, 0.0, MaternNu::FiveHalves);
        let model = GpModel::condition(&hp, &x, &y, vec![0, 1]).unwrap();
        let specs = specs();
        let grid = PenGrid::over_support([&specs[0], &specs[1]], (7, 7)).unwrap();
        let q = 1.03;
        let map = exceedance_map(&model, &grid, &[], q, 50, 15).unwrap();
        let mut decided = 0;
        for (i, a) in grid.axis1.iter().enumerate() {
            for (j, b) in grid.axis2.iter().enumerate() {
                let p = model.predict(&[*a, *b]).unwrap();
                if (p.mean - q).abs() > 6.0 * p.mse.sqrt() {
                    decided += 1;
                    assert!((map.probability[i][j] - map.plugin[i][j]).abs() < 1e-8);
                }
            }
        }
        assert!(decided >= 40, "{decided}");
    }

    #[test]
    fn worst_case_tie_break_and_peak() {
        let grid = PenGrid::new([0, 1], vec![0.0, 1.0], vec![0.0, 1.0, 2.0]).unwrap();
        let map = |p: Vec<Vec<f64>>| ExceedanceMap {
            grid: grid.clone(),
            mc_stderr: vec![vec![0.0; 3]; 2],
            plugin: p.clone(),
            probability: p,
            mc_samples: 1,
            threshold: 0.0,
        };
        assert_eq!(worst_case(&map(vec![vec![0.3; 3]; 2])).indices, [0, 0]);
        let w = worst_case(&map(vec![vec![0.1, 0.9, 0.2], vec![0.9, 0.4, 0.9]]));
        assert_eq!(w.indices, [0, 1]);
        assert_eq!(w.location, [0.0, 1.0]);
        let w = worst_case(&map(vec![vec![0.1, 0.2, 0.3], vec![0.4, 0.8, 0.5]]));
        assert_eq!((w.indices, w.probability), ([1, 1], 0.8));
    }

    #[test]
    fn grid_validation() {
        assert!(PenGrid::new([0, 1], vec![0.0, 0.0], vec![1.0]).is_err());
        assert!(PenGrid::new([0, 1], vec![], vec![1.0]).is_err());
        assert!(PenGrid::new([1, 1], vec![0.0], vec![1.0]).is_err());
        let specs = specs();
        let g = PenGrid::over_support([&specs[0], &specs[1]], (3, 2)).unwrap();
        assert_eq!(g.axis1, vec![0.0, 0.5, 1.0]);
        assert_eq!(g.axis2, vec![0.0, 1.0]);
        assert!(g.check_support([&specs[0], &specs[1]]).is_ok());
        let bad = PenGrid::new([0, 1], vec![0.5, 1.5], vec![0.5]).unwrap();
        assert!(bad.check_support([&specs[0], &specs[1]]).is_err());
    }

    #[test]
    fn missing_marginal_is_reported() {
        let model = model_on(smooth, 20, &hp(1.0, 1e-3), 16);
        let specs = specs();
        let grid = PenGrid::new([0, 1], vec![0.5], vec![0.5]).unwrap();
        assert!(exceedance_map(&model, &grid, &specs[2..3], 0.5, 10, 1).is_err());
        assert!(exceedance_map(&model, &grid, &specs[2..], 0.5, 0, 1).is_err());
    }

    #[test]
    fn map_is_deterministic_and_serializes() {
        let model = model_on(smooth, 30, &hp(1.0, 1e-3), 17);
        let specs = specs();
        let grid = PenGrid::over_support([&specs[0], &specs[1]], (3, 4)).unwrap();
        let a = exceedance_map(&model, &grid, &specs[2..], 0.7, 100, 18).unwrap();
        let b = exceedance_map(&model, &grid, &specs[2..], 0.7, 100, 18).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_csv().lines().count(), 13);
        let back: ExceedanceMap = serde_json::from_str(&serde_json::to_string(&a).unwrap()).unwrap();
        assert_eq!(back, a);
    }
}
