use serde::{Deserialize, Serialize};

use super::model::{fit, FitOptions, GpModel};
use super::{GpHyperparams, MaternNu};
use crate::dataset::LearningSample;
use crate::error::{Error, Result};
use crate::rng::derive_indexed;
use crate::validation::{kfold_on, q2_of, FoldRefit};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SequentialOptions {
    pub nu: MaternNu,
    pub folds: usize,
    pub seed: u64,
    pub starts: usize,
    pub max_evals: usize,
    /// Q² values within this distance of the best count as ties; ties go to
    /// the smaller model.
    pub q2_tolerance: f64,
}

impl Default for SequentialOptions {
    fn default() -> Self {
        Self {
            nu: MaternNu::FiveHalves,
            folds: 10,
            seed: 0,
            starts: 10,
            max_evals: 200,
            q2_tolerance: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostic {
    pub step: usize,
    /// Sample columns used at this step, in model order.
    pub inputs: Vec<usize>,
    pub q2: Option<f64>,
    pub log_likelihood: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct SequentialBuild {
    pub model: GpModel,
    pub steps: Vec<StepDiagnostic>,
    /// Index into `steps` of the retained model.
    pub selected_step: usize,
}

/// Order in which inputs enter the model: penalized inputs first (they are
/// always explanatory), then the remaining ranked inputs.
pub fn entry_order(ranking: &[usize], penalize: &[usize]) -> (Vec<usize>, usize) {
    let mut order: Vec<usize> = ranking.iter().copied().filter(|j| penalize.contains(j)).collect();
    for &j in penalize {
        if !order.contains(&j) {
            order.push(j);
        }
    }
    let base = order.len();
    order.extend(ranking.iter().copied().filter(|j| !penalize.contains(j)));
    (order, base)
}

/// Adds ranked inputs one at a time, warm-starting each fit from the
/// previous step, and keeps the step with the best K-fold Q².
///
/// Step Q² uses K-fold conditioning with the step's fitted covariance
/// hyperparameters; [`crate::validation::kfold_predict`] gives the fully
/// re-optimized estimate for the retained model.
pub fn build_sequential(
    sample: &LearningSample,
    ranking: &[usize],
    options: &SequentialOptions,
) -> Result<SequentialBuild> {
    if ranking.is_empty() {
        return Err(Error::InvalidArgument("ranking must not be empty".into()));
    }
    if options.folds < 2 {
        return Err(Error::InvalidArgument("at least 2 folds are required".into()));
    }
    if let Some(&bad) = ranking.iter().find(|&&j| j >= sample.d()) {
        return Err(Error::InvalidArgument(format!(
            "ranked input {bad} is not a sample column"
        )));
    }
    let penalize = sample.penalize_indices();
    let (order, base) = entry_order(ranking, &penalize);
    let first = base.max(1);

    let mut steps = Vec::new();
    let mut models: Vec<Option<GpModel>> = Vec::new();
    let mut last_good: Option<GpHyperparams> = None;
    for (step, size) in (first..=order.len()).enumerate() {
        let inputs = order[..size].to_vec();
        let x = sample.select_columns(&inputs);
        let init = last_good.as_ref().map(|hp| {
            let mut lengths = hp.lengths.clone();
            lengths.resize(size, 1.0);
            GpHyperparams { lengths, ..hp.clone() }
        });
        let fit_opts = FitOptions {
            nu: options.nu,
            starts: options.starts,
            max_evals: options.max_evals,
            seed: derive_indexed(options.seed, step as u64),
        };
        let outcome = fit(&x, sample.output(), inputs.clone(), &fit_opts, init.as_ref()).and_then(|m| {
            let cv = kfold_on(
                &x,
                sample.output(),
                &inputs,
                m.hyperparams(),
                options.folds,
                options.seed,
                FoldRefit::Fixed,
            )?;
            let q = q2_of(&cv)?;
            Ok((m, q))
        });
        match outcome {
            Ok((m, q)) => {
                steps.push(StepDiagnostic {
                    step,
                    inputs,
                    q2: Some(q),
                    log_likelihood: Some(m.log_likelihood()),
                    error: None,
                });
                last_good = Some(m.hyperparams().clone());
                models.push(Some(m));
            }
            Err(e) => {
                eprintln!("warning: sequential step {step} skipped: {e}");
                steps.push(StepDiagnostic {
                    step,
                    inputs,
                    q2: None,
                    log_likelihood: None,
                    error: Some(e.to_string()),
                });
                models.push(None);
            }
        }
    }

    let best_q2 = steps.iter().filter_map(|s| s.q2).fold(f64::NEG_INFINITY, f64::max);
    if !best_q2.is_finite() {
        return Err(Error::FitFailure("every sequential step failed".into()));
    }
    let selected_step = steps
        .iter()
        .position(|s| s.q2.is_some_and(|q| q >= best_q2 - options.q2_tolerance))
        .expect("best step exists");
    let model = models[selected_step].take().expect("selected step has a model");
    Ok(SequentialBuild {
        model,
        steps,
        selected_step,
    })
}
