//! Screening, metamodeling and conditional exceedance mapping for expensive
//! simulators with many uncertain inputs.
//!
//! The pipeline runs in four stages, each backed by one module:
//!
//! | Stage | Module | Output |
//! |-------|--------|--------|
//! | screening | [`screening`] (built on [`hsic`]) | ranked influential inputs |
//! | metamodel | [`gp`] | sequentially built Gaussian process |
//! | validation | [`validation`] | Q², exceedance classification rate, CI calibration |
//! | mapping | [`exceedance`] | conditional exceedance probability over two scenario inputs |
//!
//! [`dataset`] holds the input model (roles, marginals) and the learning
//! sample; [`synth`] generates analytic benchmark studies with known ground
//! truth.

// `!(a < b)` is deliberate: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod dataset;
pub mod error;
pub mod exceedance;
pub mod gp;
pub mod hsic;
pub mod rng;
pub mod screening;
pub mod synth;
pub mod validation;

pub use dataset::{
    empirical_quantile, load_sample, sample_inputs, write_sample, Distribution, LearningSample, Role, Threshold,
    VariableSpec,
};
pub use error::{Error, Result};
pub use exceedance::{conditional_exceedance, exceedance_map, worst_case, ExceedanceMap, PenGrid, WorstCase};
pub use gp::{
    build_sequential, FitOptions, GpHyperparams, GpModel, MaternNu, Prediction, SequentialBuild, SequentialOptions,
};
pub use hsic::{BandwidthRule, KernelConfig, Relaxation, TargetConfig};
pub use screening::{screen, HsicTestResult, ScreeningOptions, ScreeningResult};
pub use validation::{
    calibration_curve, exceedance_classification_rate, kfold_predict, q2, CalibrationCurve, CvPrediction,
};
