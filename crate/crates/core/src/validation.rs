//! Cross-validation diagnostics for a fitted metamodel.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::dataset::LearningSample;
use crate::error::{Error, Result};
use crate::gp::{fit, FitOptions, GpHyperparams, GpModel};
use crate::rng::{derive_indexed, rng_from_seed};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvPrediction {
    pub index: usize,
    pub observed: f64,
    pub predicted_mean: f64,
    pub predicted_mse: f64,
    pub fold: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationCurve {
    pub levels: Vec<f64>,
    pub observed: Vec<f64>,
}

/// Fold id of every observation: a seeded shuffle dealt round-robin, so
/// fold sizes differ by at most one.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 || folds > n {
        return Err(Error::InvalidArgument(format!(
            "fold count must lie in [2, {n}], got {folds}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from_seed(seed));
    let mut assignment = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        assignment[i] = pos % folds;
    }
    Ok(assignment)
}

fn split(assignment: &[usize], fold: usize) -> (Vec<usize>, Vec<usize>) {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (i, &f) in assignment.iter().enumerate() {
        if f == fold {
            test.push(i);
        } else {
            train.push(i);
        }
    }
    (train, test)
}

#[derive(Debug, Clone, Copy)]
pub enum FoldRefit {
    /// Re-optimize from the full-data hyperparameters with this budget.
    Reoptimize { max_evals: usize },
    /// Keep the covariance hyperparameters; only the trend is re-estimated.
    Fixed,
}

impl Default for FoldRefit {
    fn default() -> Self {
        FoldRefit::Reoptimize { max_evals: 50 }
    }
}

/// K-fold predictions for the inputs of `model`. Each fold is refitted on
/// its complement and predicts the held-out rows.
pub fn kfold_predict(
    sample: &LearningSample,
    model: &GpModel,
    folds: usize,
    seed: u64,
    refit: FoldRefit,
) -> Result<Vec<CvPrediction>> {
    let x = sample.select_columns(model.input_indices());
    kfold_on(
        &x,
        sample.output(),
        model.input_indices(),
        model.hyperparams(),
        folds,
        seed,
        refit,
    )
}

pub(crate) fn kfold_on(
    x: &nalgebra::DMatrix<f64>,
    y: &[f64],
    input_indices: &[usize],
    hp: &GpHyperparams,
    folds: usize,
    seed: u64,
    refit: FoldRefit,
) -> Result<Vec<CvPrediction>> {
    let n = y.len();
    let assignment = fold_assignment(n, folds, seed)?;
    let mut out = Vec::with_capacity(n);
    for fold in 0..folds {
        let (train, test) = split(&assignment, fold);
        let xt = rows(x, &train);
        let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let wrap = |e: Error| Error::Fold {
            fold,
            source: Box::new(e),
        };
        let fold_model = match refit {
            FoldRefit::Fixed => GpModel::condition(hp, &xt, &yt, input_indices.to_vec()),
            FoldRefit::Reoptimize { max_evals } => {
                let opts = FitOptions {
                    nu: hp.matern_nu,
                    starts: 1,
                    max_evals,
                    seed: derive_indexed(seed, fold as u64),
                };
                fit(&xt, &yt, input_indices.to_vec(), &opts, Some(hp))
            }
        }
        .map_err(wrap)?;
        for &i in &test {
            let point: Vec<f64> = x.row(i).iter().copied().collect();
            let p = fold_model.predict(&point).map_err(wrap)?;
            out.push(CvPrediction {
                index: i,
                observed: y[i],
                predicted_mean: p.mean,
                predicted_mse: p.mse,
                fold,
            });
        }
    }
    out.sort_by_key(|c| c.index);
    Ok(out)
}

fn rows(x: &nalgebra::DMatrix<f64>, idx: &[usize]) -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::from_fn(idx.len(), x.ncols(), |i, k| x[(idx[i], k)])
}

/// Predictivity coefficient `1 − SSE/SST`.
pub fn q2(observed: &[f64], predicted: &[f64]) -> Result<f64> {
    if observed.len() != predicted.len() {
        return Err(Error::LengthMismatch {
            expected: observed.len(),
            got: predicted.len(),
        });
    }
    if observed.len() < 2 {
        return Err(Error::InvalidArgument("Q2 needs at least 2 observations".into()));
    }
    let n = observed.len() as f64;
    let mean = observed.iter().sum::<f64>() / n;
    let sst: f64 = observed.iter().map(|y| (y - mean).powi(2)).sum();
    if sst == 0.0 {
        return Err(Error::ConstantObserved);
    }
    let sse: f64 = observed.iter().zip(predicted).map(|(y, p)| (y - p).powi(2)).sum();
    Ok(1.0 - sse / sst)
}

pub fn q2_of(cv: &[CvPrediction]) -> Result<f64> {
    let obs: Vec<f64> = cv.iter().map(|c| c.observed).collect();
    let pred: Vec<f64> = cv.iter().map(|c| c.predicted_mean).collect();
    q2(&obs, &pred)
}

/// Fraction of observations whose predicted side of `threshold` matches the
/// observed side.
pub fn exceedance_classification_rate(observed: &[f64], predicted: &[f64], threshold: f64) -> Result<f64> {
    if observed.len() != predicted.len() {
        return Err(Error::LengthMismatch {
            expected: observed.len(),
            got: predicted.len(),
        });
    }
    if observed.is_empty() {
        return Err(Error::Empty("classification rate of no predictions".into()));
    }
    let good = observed
        .iter()
        .zip(predicted)
        .filter(|(o, p)| (**o > threshold) == (**p > threshold))
        .count();
    Ok(good as f64 / observed.len() as f64)
}

/// Theoretical levels 0.05, 0.10, …, 0.95.
pub fn default_levels() -> Vec<f64> {
    (1..=19).map(|k| k as f64 / 20.0).collect()
}

/// Proportion of observations inside their `level` Gaussian prediction
/// interval, for every level.
pub fn calibration_curve(cv: &[CvPrediction], levels: &[f64]) -> Result<CalibrationCurve> {
    if cv.iter().any(|c| !(c.predicted_mse >= 0.0)) {
        return Err(Error::InvalidArgument("prediction mse must be nonnegative".into()));
    }
    if levels.iter().any(|l| !(0.0..1.0).contains(l)) {
        return Err(Error::InvalidArgument("calibration levels must lie in [0, 1)".into()));
    }
    if cv.is_empty() {
        return Err(Error::Empty("calibration of no predictions".into()));
    }
    let normal = Normal::standard();
    let observed = levels
        .iter()
        .map(|&level| {
            let z = if level == 0.0 {
                0.0
            } else {
                normal.inverse_cdf(0.5 * (1.0 + level))
            };
            let inside = cv
                .iter()
                .filter(|c| (c.observed - c.predicted_mean).abs() <= z * c.predicted_mse.sqrt())
                .count();
            inside as f64 / cv.len() as f64
        })
        .collect();
    Ok(CalibrationCurve {
        levels: levels.to_vec(),
        observed,
    })
}

/// Mean and spread of Q² over random sub-samples of one size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapPoint {
    pub n: usize,
    pub q2_mean: f64,
    pub q2_std: f64,
}

/// Convergence diagnostic: for each size, `resamples` sub-samples drawn
/// without replacement (replacement would put duplicates on both sides of a
/// fold); Q² by K-fold with the covariance hyperparameters held fixed.
pub fn bootstrap_q2(
    sample: &LearningSample,
    model: &GpModel,
    sizes: &[usize],
    resamples: usize,
    folds: usize,
    seed: u64,
) -> Result<Vec<BootstrapPoint>> {
    if resamples < 2 {
        return Err(Error::InvalidArgument("at least 2 resamples are required".into()));
    }
    let x = sample.select_columns(model.input_indices());
    let mut out = Vec::with_capacity(sizes.len());
    for (s, &size) in sizes.iter().enumerate() {
        if size > sample.n() || size < folds.max(model.dim() + 2) {
            return Err(Error::InvalidArgument(format!(
                "sub-sample size {size} is outside [{}, {}]",
                folds.max(model.dim() + 2),
                sample.n()
            )));
        }
        let mut values = Vec::with_capacity(resamples);
        for r in 0..resamples {
            let stream = derive_indexed(derive_indexed(seed, s as u64), r as u64);
            let mut idx: Vec<usize> = (0..sample.n()).collect();
            idx.shuffle(&mut rng_from_seed(stream));
            idx.truncate(size);
            let xs = rows(&x, &idx);
            let ys: Vec<f64> = idx.iter().map(|&i| sample.output()[i]).collect();
            let cv = kfold_on(
                &xs,
                &ys,
                model.input_indices(),
                model.hyperparams(),
                folds,
                stream,
                FoldRefit::Fixed,
            )?;
            values.push(q2_of(&cv)?);
        }
        let mean = values.iter().sum::<f64>() / resamples as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (resamples - 1) as f64;
        out.push(BootstrapPoint {
            n: size,
            q2_mean: mean,
            q2_std: var.sqrt(),
        });
    }
    Ok(out)
}

/// Evenly spaced sub-sample sizes from `n/3` up to `n`.
pub fn default_sizes(n: usize, points: usize) -> Vec<usize> {
    let lo = (n / 3).max(10);
    (0..points).map(|k| lo + (n - lo) * k / (points - 1).max(1)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Distribution, Role, VariableSpec};
    use crate::gp::MaternNu;
    use crate::rng::rng_from_seed;
    use nalgebra::DMatrix;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn sample_of(x: DMatrix<f64>, y: Vec<f64>) -> LearningSample {
        let vars = (0..x.ncols())
            .map(|k| {
                VariableSpec::new(
                    format!("x{k}"),
                    k,
                    Role::Candidate,
                    Distribution::Uniform { lower: 0.0, upper: 1.0 },
                )
            })
            .collect();
        LearningSample::new(x, y, vars, "y").unwrap()
    }

    #[test]
    fn q2_examples() {
        let obs = [0.0, 1.0, 2.0];
        assert_eq!(q2(&obs, &obs).unwrap(), 1.0);
        assert_eq!(q2(&obs, &[1.0, 1.0, 1.0]).unwrap(), 0.0);
        assert!((q2(&obs, &[0.0, 1.0, 1.0]).unwrap() - 0.5).abs() < 1e-12);
        assert!(matches!(q2(&[2.0, 2.0], &[1.0, 3.0]), Err(Error::ConstantObserved)));
    }

    #[test]
    fn classification_examples() {
        let obs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(exceedance_classification_rate(&obs, &obs, 2.5).unwrap(), 1.0);
        assert_eq!(
            exceedance_classification_rate(&obs, &[4.0, 3.0, 2.0, 1.0], 2.5).unwrap(),
            0.0
        );
        assert_eq!(
            exceedance_classification_rate(&obs, &[1.0, 2.0, 2.0, 2.0], 2.5).unwrap(),
            0.5
        );
    }

    #[test]
    fn calibration_degenerate_cases() {
        let cv: Vec<CvPrediction> = (0..10)
            .map(|i| CvPrediction {
                index: i,
                observed: i as f64,
                predicted_mean: i as f64 + 0.5,
                predicted_mse: 0.0,
                fold: 0,
            })
            .collect();
        let c = calibration_curve(&cv, &default_levels()).unwrap();
        assert!(c.observed.iter().all(|&v| v == 0.0));
        let c = calibration_curve(&cv, &[0.0]).unwrap();
        assert_eq!(c.observed, vec![0.0]);
    }

    #[test]
    fn calibration_matches_simulated_gaussians() {
        let mut rng = rng_from_seed(17);
        let cv: Vec<CvPrediction> = (0..2000)
            .map(|i| {
                let mean = rng.random::<f64>() * 10.0;
                let mse = 0.1 + rng.random::<f64>();
                let z: f64 = rng.sample(StandardNormal);
                CvPrediction {
                    index: i,
                    observed: mean + mse.sqrt() * z,
                    predicted_mean: mean,
                    predicted_mse: mse,
                    fold: 0,
                }
            })
            .collect();
        let levels = default_levels();
        let c = calibration_curve(&cv, &levels).unwrap();
        for (l, o) in c.levels.iter().zip(&c.observed) {
            assert!((l - o).abs() <= 0.03, "level {l}: {o}");
        }
        assert!(c.observed.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn folds_partition_and_repeat() {
        let a = fold_assignment(23, 5, 3).unwrap();
        assert_eq!(a, fold_assignment(23, 5, 3).unwrap());
        for f in 0..5 {
            let size = a.iter().filter(|&&v| v == f).count();
            assert!(size == 4 || size == 5);
        }
        assert!(fold_assignment(5, 6, 0).is_err());
        assert!(fold_assignment(5, 1, 0).is_err());
    }

    fn smooth_data(n: usize, seed: u64) -> (DMatrix<f64>, Vec<f64>) {
        let mut rng = rng_from_seed(seed);
        let x = DMatrix::from_fn(n, 2, |_, _| rng.random::<f64>());
        let y = (0..n).map(|i| (3.0 * x[(i, 0)]).sin() + x[(i, 1)]).collect();
        (x, y)
    }

    #[test]
    fn leave_one_out_partition() {
        let (x, y) = smooth_data(30, 1);
        let s = sample_of(x.clone(), y.clone());
        let m = fit(
            &x,
            &y,
            vec![0, 1],
            &FitOptions {
                starts: 3,
                ..FitOptions::default()
            },
            None,
        )
        .unwrap();
        let cv = kfold_predict(&s, &m, 30, 4, FoldRefit::default()).unwrap();
        assert_eq!(cv.len(), 30);
        let mut folds: Vec<usize> = cv.iter().map(|c| c.fold).collect();
        folds.sort_unstable();
        assert_eq!(folds, (0..30).collect::<Vec<_>>());
        assert!(cv.iter().enumerate().all(|(i, c)| c.index == i));
        let again = kfold_predict(&s, &m, 30, 4, FoldRefit::default()).unwrap();
        assert_eq!(cv, again);
        assert!(q2_of(&cv).unwrap() > 0.9);
    }

    #[test]
    fn duplicated_rows_are_predicted_nearly_exactly() {
        let (x, y) = smooth_data(20, 2);
        let xx = DMatrix::from_fn(40, 2, |i, k| x[(i % 20, k)]);
        let yy: Vec<f64> = (0..40).map(|i| y[i % 20]).collect();
        let s = sample_of(xx, yy);
        let hp = GpHyperparams::new(vec![0.8, 1.5], 1.0, 0.0, MaternNu::FiveHalves);
        let m = GpModel::condition(&hp, s.design(), s.output(), vec![0, 1]).unwrap();
        let cv = kfold_predict(&s, &m, 5, 8, FoldRefit::Fixed).unwrap();
        let assign = fold_assignment(40, 5, 8).unwrap();
        for c in &cv {
            let twin = (c.index + 20) % 40;
            if assign[twin] != assign[c.index] {
                assert!((c.predicted_mean - c.observed).abs() < 1e-3);
                assert!(c.predicted_mse < 1e-4);
            }
        }
    }

    #[test]
    fn bootstrap_curve_nondecreasing() {
        let (x, y) = smooth_data(120, 5);
        let s = sample_of(x.clone(), y.clone());
        let m = fit(
            &x,
            &y,
            vec![0, 1],
            &FitOptions {
                starts: 3,
                ..FitOptions::default()
            },
            None,
        )
        .unwrap();
        let sizes = default_sizes(120, 5);
        let pts = bootstrap_q2(&s, &m, &sizes, 50, 10, 6).unwrap();
        for w in pts.windows(2) {
            assert!(w[1].q2_mean >= w[0].q2_mean - 2.0 * w[1].q2_std.max(w[0].q2_std));
        }
    }

    proptest! {
        #[test]
        fn q2_affine_invariance(
            obs in proptest::collection::vec(-10.0f64..10.0, 3..30),
            noise in proptest::collection::vec(-1.0f64..1.0, 30),
            a in prop_oneof![-5.0f64..-0.1, 0.1f64..5.0],
            b in -10.0f64..10.0,
        ) {
            let pred: Vec<f64> = obs.iter().zip(&noise).map(|(o, e)| o + e).collect();
            prop_assume!(obs.iter().any(|&v| (v - obs[0]).abs() > 1e-3));
            let base = q2(&obs, &pred).unwrap();
            let o2: Vec<f64> = obs.iter().map(|v| a * v + b).collect();
            let p2: Vec<f64> = pred.iter().map(|v| a * v + b).collect();
            let mapped = q2(&o2, &p2).unwrap();
            prop_assert!((base - mapped).abs() <= 1e-9 * (1.0 + base.abs()));
            prop_assert!(base <= 1.0);
        }

        #[test]
        fn classification_invariant_under_increasing_maps(
            obs in proptest::collection::vec(-5.0f64..5.0, 1..40),
            pred_shift in proptest::collection::vec(-1.0f64..1.0, 40),
            t in -5.0f64..5.0,
        ) {
            let pred: Vec<f64> = obs.iter().zip(&pred_shift).map(|(o, e)| o + e).collect();
            let f = |v: f64| v.exp() * 3.0 + 1.0;
            let a = exceedance_classification_rate(&obs, &pred, t).unwrap();
            let o2: Vec<f64> = obs.iter().map(|&v| f(v)).collect();
            let p2: Vec<f64> = pred.iter().map(|&v| f(v)).collect();
            let b = exceedance_classification_rate(&o2, &p2, f(t)).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn calibration_monotone_in_level(seed in 0u64..500) {
            let mut rng = rng_from_seed(seed);
            let cv: Vec<CvPrediction> = (0..50).map(|i| CvPrediction {
                index: i,
                observed: rng.random::<f64>(),
                predicted_mean: rng.random::<f64>(),
                predicted_mse: rng.random::<f64>() * 0.2,
                fold: 0,
            }).collect();
            let c = calibration_curve(&cv, &default_levels()).unwrap();
            prop_assert!(c.observed.windows(2).all(|w| w[0] <= w[1]));
        }
    }
}
