//! Pipeline stages. Each stage reads its inputs from the study directory,
//! writes its reports there and records file hashes in the manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use critmap_core::exceedance::{exceedance_map, worst_case, PenGrid};
use critmap_core::gp::{GpModelDoc, StepDiagnostic, TrainingReference};
use critmap_core::rng::derive_seed;
use critmap_core::screening::{screen, ScreeningOptions, ScreeningReport};
use critmap_core::validation::{default_levels, kfold_predict, q2_of, FoldRefit};
use critmap_core::{
    build_sequential, calibration_curve, exceedance_classification_rate, load_sample, write_sample, GpModel,
    LearningSample, Relaxation, Role, SequentialOptions, TargetConfig, Threshold, VariableSpec,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::StudyConfig;

pub const SAMPLE_FILE: &str = "sample.csv";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.json";
pub const SCREENING_FILE: &str = "screening.json";
pub const PVALUES_FILE: &str = "screening_pvalues.csv";
pub const MODEL_FILE: &str = "model.json";
pub const STEPS_FILE: &str = "sequential_steps.csv";
pub const FIT_FILE: &str = "fit.json";
pub const VALIDATION_FILE: &str = "validation.json";
pub const CALIBRATION_FILE: &str = "calibration.csv";
pub const CV_FILE: &str = "cv_predictions.csv";
pub const MAP_FILE: &str = "exceedance_map.csv";
pub const MAP_SUMMARY_FILE: &str = "exceedance_summary.json";
pub const MANIFEST_FILE: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn hash_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub seed: u64,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_sha256: String,
    pub seed: u64,
    pub stages: BTreeMap<String, StageRecord>,
}

/// A configured study bound to an output directory.
pub struct Study {
    pub config: StudyConfig,
    config_hash: String,
    base_dir: PathBuf,
    pub out_dir: PathBuf,
    pub seed: u64,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path, hint: &str) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {} ({hint})", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("malformed {}", path.display()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub selected_step: usize,
    pub inputs: Vec<String>,
    pub log_likelihood: f64,
    pub steps: Vec<StepDiagnostic>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    pub q2: f64,
    pub classification_rate: f64,
    pub threshold: Threshold,
    pub folds: usize,
    pub calibration_levels: Vec<f64>,
    pub calibration_observed: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WorstCaseReport {
    pub inputs: [String; 2],
    pub location: [f64; 2],
    pub indices: [usize; 2],
    pub probability: f64,
    pub stderr: f64,
    pub plugin_probability: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MapSummary {
    pub worst_case: WorstCaseReport,
    pub threshold: Threshold,
    pub mc_samples: usize,
    pub seed: u64,
    pub resolution: [usize; 2],
    pub max_stderr: f64,
}

impl Study {
    pub fn open(config_path: &Path, out_dir: &Path, seed_override: Option<u64>) -> Result<Self> {
        let text = fs::read(config_path).with_context(|| format!("cannot read config {}", config_path.display()))?;
        let config = StudyConfig::load(config_path)?;
        let seed = seed_override.unwrap_or(config.seed);
        fs::create_dir_all(out_dir).with_context(|| format!("cannot create output directory {}", out_dir.display()))?;
        Ok(Self {
            config,
            config_hash: sha256_hex(&text),
            base_dir: config_path.parent().map(Path::to_path_buf).unwrap_or_default(),
            out_dir: out_dir.to_path_buf(),
            seed,
        })
    }

    fn out(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    pub fn stage_seed(&self, stage: &str) -> u64 {
        derive_seed(self.seed, stage)
    }

    /// Sample path and the name it is recorded under.
    fn sample_location(&self) -> (PathBuf, String) {
        match &self.config.sample_path {
            Some(p) => (self.base_dir.join(p), p.display().to_string()),
            None => (self.out(SAMPLE_FILE), SAMPLE_FILE.to_string()),
        }
    }

    fn variable_specs(&self) -> Result<Vec<VariableSpec>> {
        match &self.config.synthetic {
            Some(s) => Ok(s.spec(self.stage_seed("synth")).variables()),
            None => self.config.variable_specs(),
        }
    }

    pub fn sample(&self) -> Result<LearningSample> {
        let (path, _) = self.sample_location();
        if self.config.synthetic.is_some() && !path.exists() {
            bail!("synthetic sample {} not found; run `synth` first", path.display());
        }
        let specs = self.variable_specs()?;
        load_sample(&path, &specs, &self.config.output_column)
            .with_context(|| format!("loading learning sample {}", path.display()))
    }

    pub fn threshold(&self, sample: &LearningSample) -> Result<Threshold> {
        Ok(Threshold::from_sample(sample.output(), self.config.quantile_level)?)
    }

    fn record(&self, stage: &str, inputs: &[&str], outputs: &[&str]) -> Result<()> {
        let path = self.out(MANIFEST_FILE);
        let mut manifest: Manifest = if path.exists() {
            read_json(&path, "manifest")?
        } else {
            Manifest::default()
        };
        manifest.config_sha256 = self.config_hash.clone();
        manifest.seed = self.seed;
        let mut rec = StageRecord {
            seed: self.stage_seed(stage),
            ..StageRecord::default()
        };
        for name in inputs {
            let p = if *name == self.sample_location().1 {
                self.sample_location().0
            } else {
                self.out(name)
            };
            rec.inputs.insert(name.to_string(), hash_file(&p)?);
        }
        for name in outputs {
            rec.outputs.insert(name.to_string(), hash_file(&self.out(name))?);
        }
        manifest.stages.insert(stage.to_string(), rec);
        write_json(&path, &manifest)
    }

    pub fn synth(&self) -> Result<()> {
        let Some(section) = &self.config.synthetic else {
            bail!("the config has no [synthetic] section");
        };
        let spec = section.spec(self.stage_seed("synth"));
        let (sample, truth) = spec.generate()?;
        write_sample(self.out(SAMPLE_FILE), &sample)?;
        write_json(&self.out(GROUND_TRUTH_FILE), &truth)?;
        self.record("synth", &[], &[SAMPLE_FILE, GROUND_TRUTH_FILE])
    }

    pub fn screen(&self) -> Result<ScreeningReport> {
        let sample = self.sample()?;
        let threshold = self.threshold(&sample)?;
        let target = match self.config.target.relaxation {
            Relaxation::Hard => TargetConfig::hard(threshold.value),
            Relaxation::Exponential => match self.config.target.scale {
                Some(s) => TargetConfig::exponential(threshold.value, s),
                None => TargetConfig::exponential_default(threshold.value, sample.output()),
            },
        };
        let options = ScreeningOptions {
            kernel: self.config.kernel,
            output_kernel: self.config.output_kernel,
            alpha: self.config.alpha,
            permutations: self.config.permutations,
            seed: self.stage_seed("screen"),
        };
        let result = screen(&sample, &target, &options).context("screening")?;
        let report = result.report(&sample, threshold.value);
        write_json(&self.out(SCREENING_FILE), &report)?;
        fs::write(self.out(PVALUES_FILE), report.pvalues_csv())?;
        let sample_name = self.sample_location().1;
        self.record("screen", &[&sample_name], &[SCREENING_FILE, PVALUES_FILE])?;
        Ok(report)
    }

    pub fn fit(&self) -> Result<GpModel> {
        let sample = self.sample()?;
        let report: ScreeningReport = read_json(&self.out(SCREENING_FILE), "run `screen` first")?;
        if report.selected_indices.is_empty() {
            bail!("screening selected no inputs and no input is penalized; nothing to fit");
        }
        let options = SequentialOptions {
            nu: self.config.nu,
            folds: self.config.folds,
            seed: self.stage_seed("fit"),
            starts: self.config.fit.starts,
            max_evals: self.config.fit.max_evals,
            q2_tolerance: self.config.fit.q2_tolerance,
        };
        let built =
            build_sequential(&sample, &report.selected_indices, &options).context("sequential metamodel building")?;
        let names =
            |idx: &[usize]| -> Vec<String> { idx.iter().map(|&j| sample.variables()[j].name.clone()).collect() };
        let (sample_path, sample_name) = self.sample_location();
        let doc = built.model.to_doc(
            names(built.model.input_indices()),
            Some(TrainingReference {
                path: sample_name.clone(),
                sha256: hash_file(&sample_path)?,
                rows: sample.n(),
            }),
        );
        write_json(&self.out(MODEL_FILE), &doc)?;
        let mut steps = String::from("step,inputs,q2,log_likelihood,error\n");
        let opt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
        for s in &built.steps {
            steps.push_str(&format!(
                "{},{},{},{},{}\n",
                s.step,
                names(&s.inputs).join(";"),
                opt(s.q2),
                opt(s.log_likelihood),
                s.error.as_deref().unwrap_or("").replace([',', '\n'], " ")
            ));
        }
        fs::write(self.out(STEPS_FILE), steps)?;
        write_json(
            &self.out(FIT_FILE),
            &FitReport {
                selected_step: built.selected_step,
                inputs: names(built.model.input_indices()),
                log_likelihood: built.model.log_likelihood(),
                steps: built.steps.clone(),
            },
        )?;
        self.record(
            "fit",
            &[&sample_name, SCREENING_FILE],
            &[MODEL_FILE, STEPS_FILE, FIT_FILE],
        )?;
        Ok(built.model)
    }

    pub fn load_model(&self, sample: &LearningSample) -> Result<GpModel> {
        let doc: GpModelDoc = read_json(&self.out(MODEL_FILE), "run `fit` first")?;
        if let Some(training) = &doc.training {
            let current = hash_file(&self.sample_location().0)?;
            if current != training.sha256 {
                bail!("learning sample {} changed since the model was fitted", training.path);
            }
        }
        Ok(GpModel::from_doc(&doc, sample)?)
    }

    pub fn validate(&self) -> Result<ValidationReport> {
        let sample = self.sample()?;
        let model = self.load_model(&sample)?;
        let threshold = self.threshold(&sample)?;
        let cv = kfold_predict(
            &sample,
            &model,
            self.config.folds,
            self.stage_seed("validate"),
            FoldRefit::Reoptimize {
                max_evals: self.config.fit.fold_max_evals,
            },
        )
        .context("cross-validation")?;
        let q2 = q2_of(&cv)?;
        let observed: Vec<f64> = cv.iter().map(|c| c.observed).collect();
        let predicted: Vec<f64> = cv.iter().map(|c| c.predicted_mean).collect();
        let rate = exceedance_classification_rate(&observed, &predicted, threshold.value)?;
        let curve = calibration_curve(&cv, &default_levels())?;

        let mut cal = String::from("level,observed\n");
        for (l, o) in curve.levels.iter().zip(&curve.observed) {
            cal.push_str(&format!("{l},{o}\n"));
        }
        fs::write(self.out(CALIBRATION_FILE), cal)?;
        let mut preds = String::from("index,fold,observed,predicted_mean,predicted_mse\n");
        for c in &cv {
            preds.push_str(&format!(
                "{},{},{},{},{}\n",
                c.index, c.fold, c.observed, c.predicted_mean, c.predicted_mse
            ));
        }
        fs::write(self.out(CV_FILE), preds)?;
        let report = ValidationReport {
            q2,
            classification_rate: rate,
            threshold,
            folds: self.config.folds,
            calibration_levels: curve.levels,
            calibration_observed: curve.observed,
        };
        write_json(&self.out(VALIDATION_FILE), &report)?;
        let sample_name = self.sample_location().1;
        self.record(
            "validate",
            &[&sample_name, MODEL_FILE],
            &[VALIDATION_FILE, CALIBRATION_FILE, CV_FILE],
        )?;
        Ok(report)
    }

    pub fn map(&self) -> Result<MapSummary> {
        let sample = self.sample()?;
        let pen = sample.penalize_indices();
        if pen.len() != 2 {
            bail!(
                "the exceedance map needs exactly two penalize-role variables, found {}",
                pen.len()
            );
        }
        let model = self.load_model(&sample)?;
        let threshold = self.threshold(&sample)?;
        let vars = sample.variables();
        let grid = PenGrid::over_support(
            [&vars[pen[0]], &vars[pen[1]]],
            (self.config.grid[0], self.config.grid[1]),
        )?;
        let tilde: Vec<VariableSpec> = vars.iter().filter(|v| v.role != Role::Penalize).cloned().collect();
        let seed = self.stage_seed("map");
        let map = exceedance_map(&model, &grid, &tilde, threshold.value, self.config.mc_samples, seed)
            .context("exceedance map")?;
        let worst = worst_case(&map);
        let [i, j] = worst.indices;
        let summary = MapSummary {
            worst_case: WorstCaseReport {
                inputs: [vars[pen[0]].name.clone(), vars[pen[1]].name.clone()],
                location: worst.location,
                indices: worst.indices,
                probability: worst.probability,
                stderr: map.mc_stderr[i][j],
                plugin_probability: map.plugin[i][j],
            },
            threshold,
            mc_samples: map.mc_samples,
            seed,
            resolution: self.config.grid,
            max_stderr: map.max_stderr(),
        };
        fs::write(self.out(MAP_FILE), map.to_csv())?;
        write_json(&self.out(MAP_SUMMARY_FILE), &summary)?;
        let sample_name = self.sample_location().1;
        self.record("map", &[&sample_name, MODEL_FILE], &[MAP_FILE, MAP_SUMMARY_FILE])?;
        Ok(summary)
    }

    /// Every stage in order; `synth` runs first for synthetic studies.
    pub fn run_all(&self) -> Result<()> {
        if self.config.synthetic.is_some() {
            self.synth().context("stage synth")?;
        }
        self.screen().context("stage screen")?;
        self.fit().context("stage fit")?;
        self.validate().context("stage validate")?;
        self.map().context("stage map")?;
        Ok(())
    }
}
