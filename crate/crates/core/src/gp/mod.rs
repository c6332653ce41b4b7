//! Gaussian-process metamodel with constant trend, anisotropic Matérn
//! covariance and a homoscedastic nugget.
//!
//! Inputs are standardized with learning-sample statistics stored in the
//! model; outputs stay in their own units. The trend is profiled out by
//! generalized least squares inside every likelihood evaluation.

mod likelihood;
mod model;
mod optimize;
mod sequential;

use serde::{Deserialize, Serialize};

pub use likelihood::{log_marginal_likelihood, LikelihoodProblem};
pub use model::{fit, FitOptions, GpModel, GpModelDoc, Prediction, TrainingReference};
pub use optimize::{minimize_bounded, OptimResult};
pub use sequential::{build_sequential, SequentialBuild, SequentialOptions, StepDiagnostic};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum MaternNu {
    #[serde(rename = "3/2")]
    ThreeHalves,
    #[default]
    #[serde(rename = "5/2")]
    FiveHalves,
}

/// Matérn correlation at distance `h` for length `length`.
pub fn matern(h: f64, length: f64, nu: MaternNu) -> f64 {
    matern_with_log_derivative(h.abs() / length, nu).0
}

/// Correlation at scaled distance `u = h/ℓ` together with
/// `∂ log r / ∂ log ℓ`.
#[inline]
pub(crate) fn matern_with_log_derivative(u: f64, nu: MaternNu) -> (f64, f64) {
    match nu {
        MaternNu::FiveHalves => {
            let a = 5f64.sqrt() * u;
            let poly = 1.0 + a + a * a / 3.0;
            (poly * (-a).exp(), a * a * (1.0 + a) / (3.0 * poly))
        }
        MaternNu::ThreeHalves => {
            let a = 3f64.sqrt() * u;
            ((1.0 + a) * (-a).exp(), a * a / (1.0 + a))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpHyperparams {
    /// One correlation length per explanatory input, standardized units.
    pub lengths: Vec<f64>,
    pub process_variance: f64,
    pub nugget: f64,
    pub trend: f64,
    pub matern_nu: MaternNu,
}

impl GpHyperparams {
    pub fn new(lengths: Vec<f64>, process_variance: f64, nugget: f64, nu: MaternNu) -> Self {
        Self {
            lengths,
            process_variance,
            nugget,
            trend: 0.0,
            matern_nu: nu,
        }
    }

    pub fn validate(&self) -> crate::Result<()> {
        use crate::Error;
        if self.lengths.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::InvalidArgument("correlation lengths must be positive".into()));
        }
        if !(self.process_variance > 0.0 && self.process_variance.is_finite()) {
            return Err(Error::InvalidArgument("process variance must be positive".into()));
        }
        if !(self.nugget >= 0.0 && self.nugget.is_finite()) {
            return Err(Error::InvalidArgument("nugget must be nonnegative".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matern_examples() {
        assert_eq!(matern(0.0, 1.3, MaternNu::FiveHalves), 1.0);
        assert_eq!(matern(0.0, 0.2, MaternNu::ThreeHalves), 1.0);
        assert!(matern(100.0, 1.0, MaternNu::FiveHalves) < 1e-30);
        assert!(matern(100.0, 1.0, MaternNu::ThreeHalves) < 1e-30);
        let s5 = 5f64.sqrt();
        let oracle = (1.0 + s5 + 5.0 / 3.0) * (-s5).exp();
        assert!((matern(1.0, 1.0, MaternNu::FiveHalves) - oracle).abs() < 1e-15);
        assert!((oracle - 0.523_994_6).abs() < 1e-6);
        let s3 = 3f64.sqrt();
        assert!((matern(0.5, 0.25, MaternNu::ThreeHalves) - (1.0 + 2.0 * s3) * (-2.0 * s3).exp()).abs() < 1e-15);
    }

    #[test]
    fn matern_decreases_monotonically() {
        for nu in [MaternNu::ThreeHalves, MaternNu::FiveHalves] {
            let mut prev = 1.0;
            for k in 1..400 {
                let v = matern(k as f64 * 0.05, 0.7, nu);
                assert!(v < prev && v > 0.0);
                prev = v;
            }
        }
    }

    #[test]
    fn log_derivative_matches_finite_difference() {
        for nu in [MaternNu::ThreeHalves, MaternNu::FiveHalves] {
            for &h in &[0.1, 0.7, 2.5] {
                let l: f64 = 0.8;
                let eps = 1e-6;
                let up = matern(h, (l.ln() + eps).exp(), nu).ln();
                let dn = matern(h, (l.ln() - eps).exp(), nu).ln();
                let fd = (up - dn) / (2.0 * eps);
                let (_, an) = matern_with_log_derivative(h / l, nu);
                assert!((fd - an).abs() < 1e-6 * an.abs().max(1.0), "{fd} vs {an}");
            }
        }
    }
}
