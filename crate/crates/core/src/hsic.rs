//! HSIC dependence measures and the two independence tests built on them.
//!
//! All estimators use the biased V-statistic
//! `HSIC = trace(HKH · HLH) / n²` with `H = I − 11ᵀ/n`. The target variant
//! replaces the output Gram matrix with `w wᵀ`, where `w` are weights that
//! are one inside the critical region `{y > threshold}`.
//!
//! The Gamma test matches the first two moments of `n·HSIC` under
//! independence using the closed-form estimates computed from the Gram
//! matrices (no pilot permutations are drawn).

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Gamma};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    #[default]
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BandwidthRule {
    /// Sample standard deviation of the variable.
    #[default]
    EmpiricalStd,
    /// Median of pairwise absolute differences divided by √2.
    MedianHeuristic,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    #[serde(default)]
    pub kind: KernelKind,
    #[serde(default)]
    pub bandwidth_rule: BandwidthRule,
    #[serde(default)]
    pub bandwidth_override: Option<f64>,
}

impl KernelConfig {
    pub fn with_bandwidth(sigma: f64) -> Self {
        Self {
            bandwidth_override: Some(sigma),
            ..Self::default()
        }
    }

    pub fn median_heuristic() -> Self {
        Self {
            bandwidth_rule: BandwidthRule::MedianHeuristic,
            ..Self::default()
        }
    }

    pub fn bandwidth(&self, values: &[f64]) -> Result<f64> {
        let sigma = match self.bandwidth_override {
            Some(s) => s,
            None => match self.bandwidth_rule {
                BandwidthRule::EmpiricalStd => sample_std(values),
                BandwidthRule::MedianHeuristic => median_pairwise_distance(values) / 2f64.sqrt(),
            },
        };
        if sigma > 0.0 && sigma.is_finite() {
            Ok(sigma)
        } else {
            Err(Error::ZeroBandwidth(sigma))
        }
    }
}

pub(crate) fn sample_std(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (ss / (n - 1) as f64).sqrt()
}

fn median_pairwise_distance(values: &[f64]) -> f64 {
    let n = values.len();
    let mut d = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            d.push((values[i] - values[j]).abs());
        }
    }
    if d.is_empty() {
        return 0.0;
    }
    d.sort_by(|a, b| a.total_cmp(b));
    let m = d.len();
    if m % 2 == 1 {
        d[m / 2]
    } else {
        0.5 * (d[m / 2 - 1] + d[m / 2])
    }
}

/// Gaussian Gram matrix `k(v_i, v_j) = exp(−(v_i − v_j)² / (2σ²))`.
pub fn gram_matrix(values: &[f64], kernel: &KernelConfig) -> Result<DMatrix<f64>> {
    if values.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "a Gram matrix needs at least 2 values, got {}",
            values.len()
        )));
    }
    let sigma = kernel.bandwidth(values)?;
    let n = values.len();
    let inv = 1.0 / (2.0 * sigma * sigma);
    let mut k = DMatrix::from_element(n, n, 1.0);
    for j in 0..n {
        for i in (j + 1)..n {
            let v = (-(values[i] - values[j]).powi(2) * inv).exp();
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}

/// `HKH`: removes row, column and grand means.
pub fn center(k: &DMatrix<f64>) -> DMatrix<f64> {
    let n = k.nrows();
    let nf = n as f64;
    let row_means: Vec<f64> = (0..n).map(|i| k.row(i).sum() / nf).collect();
    let col_means: Vec<f64> = (0..n).map(|j| k.column(j).sum() / nf).collect();
    let grand = row_means.iter().sum::<f64>() / nf;
    DMatrix::from_fn(n, n, |i, j| k[(i, j)] - row_means[i] - col_means[j] + grand)
}

/// `trace(K̃ L̃) / n²` for centered symmetric matrices.
pub fn hsic_from_centered(kc: &DMatrix<f64>, lc: &DMatrix<f64>) -> f64 {
    let n = kc.nrows() as f64;
    kc.component_mul(lc).sum() / (n * n)
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::InvalidArgument("HSIC needs at least 2 observations".into()));
    }
    Ok(())
}

pub fn estimate_hsic(x: &[f64], y: &[f64], kx: &KernelConfig, ky: &KernelConfig) -> Result<f64> {
    check_pair(x, y)?;
    let kc = center(&gram_matrix(x, kx)?);
    let lc = center(&gram_matrix(y, ky)?);
    Ok(hsic_from_centered(&kc, &lc))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relaxation {
    /// Indicator of the critical region.
    #[default]
    Hard,
    /// `exp(−max(0, threshold − y) / scale)`.
    Exponential,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetConfig {
    pub threshold: f64,
    pub relaxation: Relaxation,
    pub relaxation_scale: f64,
}

impl TargetConfig {
    pub fn hard(threshold: f64) -> Self {
        Self {
            threshold,
            relaxation: Relaxation::Hard,
            relaxation_scale: 1.0,
        }
    }

    pub fn exponential(threshold: f64, scale: f64) -> Self {
        Self {
            threshold,
            relaxation: Relaxation::Exponential,
            relaxation_scale: scale,
        }
    }

    /// Exponential relaxation with the default scale `std(y) / 5`.
    pub fn exponential_default(threshold: f64, y: &[f64]) -> Self {
        Self::exponential(threshold, sample_std(y) / 5.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.threshold.is_finite() {
            return Err(Error::InvalidArgument("target threshold must be finite".into()));
        }
        if self.relaxation == Relaxation::Exponential
            && !(self.relaxation_scale > 0.0 && self.relaxation_scale.is_finite())
        {
            return Err(Error::InvalidArgument(format!(
                "relaxation scale must be positive, got {}",
                self.relaxation_scale
            )));
        }
        Ok(())
    }
}

pub fn target_weights(y: &[f64], target: &TargetConfig) -> Vec<f64> {
    match target.relaxation {
        Relaxation::Hard => y
            .iter()
            .map(|&v| if v > target.threshold { 1.0 } else { 0.0 })
            .collect(),
        Relaxation::Exponential => y
            .iter()
            .map(|&v| (-(target.threshold - v).max(0.0) / target.relaxation_scale).exp())
            .collect(),
    }
}

/// Output Gram matrix of the target kernel, `w wᵀ`.
pub fn target_gram(y: &[f64], target: &TargetConfig) -> Result<DMatrix<f64>> {
    target.validate()?;
    let w = target_weights(y, target);
    if w.iter().all(|&v| v == 0.0) {
        return Err(Error::DegenerateTarget);
    }
    let n = w.len();
    Ok(DMatrix::from_fn(n, n, |i, j| w[i] * w[j]))
}

pub fn estimate_target_hsic(x: &[f64], y: &[f64], kx: &KernelConfig, target: &TargetConfig) -> Result<f64> {
    check_pair(x, y)?;
    let kc = center(&gram_matrix(x, kx)?);
    let lc = center(&target_gram(y, target)?);
    Ok(hsic_from_centered(&kc, &lc))
}

/// HSIC between a fixed input and permuted outputs, reusing centered Gram
/// matrices. Permuting outputs commutes with centering, so only the output
/// matrix is re-indexed.
pub struct PermutationKernel {
    kc: Vec<f64>,
    lc: Vec<f64>,
    n: usize,
}

impl PermutationKernel {
    pub fn new(kc: &DMatrix<f64>, lc: &DMatrix<f64>) -> Self {
        let n = kc.nrows();
        // row-major copies; both matrices are symmetric so the transpose is free
        Self {
            kc: kc.as_slice().to_vec(),
            lc: lc.as_slice().to_vec(),
            n,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn observed(&self) -> f64 {
        let s: f64 = self.kc.iter().zip(&self.lc).map(|(a, b)| a * b).sum();
        s / (self.n * self.n) as f64
    }

    pub fn permuted(&self, perm: &[usize]) -> f64 {
        let n = self.n;
        let mut total = 0.0;
        for i in 0..n {
            let krow = &self.kc[i * n..(i + 1) * n];
            let lrow = &self.lc[perm[i] * n..(perm[i] + 1) * n];
            let mut acc = 0.0;
            for j in 0..n {
                acc += krow[j] * lrow[perm[j]];
            }
            total += acc;
        }
        total / (n * n) as f64
    }
}

/// `B` seeded permutations of `0..n`.
pub fn draw_permutations(n: usize, permutations: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = rng_from_seed(seed);
    let mut base: Vec<usize> = (0..n).collect();
    (0..permutations)
        .map(|_| {
            base.shuffle(&mut rng);
            base.clone()
        })
        .collect()
}

/// `(1 + #{b : stat_b ≥ observed}) / (B + 1)`.
pub fn pvalue_from_null(observed: f64, null: impl IntoIterator<Item = f64>) -> f64 {
    // rounding noise must not turn an exact tie into a strict win
    let tol = 1e-12 * observed.abs().max(f64::MIN_POSITIVE);
    let mut count = 0usize;
    let mut b = 0usize;
    for s in null {
        b += 1;
        if s >= observed - tol {
            count += 1;
        }
    }
    (1 + count) as f64 / (b + 1) as f64
}

/// Permutation p-value of `observed` against `statistic_fn` evaluated on
/// `permutations` seeded permutations of the output indices.
pub fn permutation_pvalue(
    n: usize,
    observed: f64,
    permutations: usize,
    seed: u64,
    mut statistic_fn: impl FnMut(&[usize]) -> f64,
) -> Result<f64> {
    if permutations == 0 {
        return Err(Error::InvalidArgument("at least one permutation is required".into()));
    }
    let perms = draw_permutations(n, permutations, seed);
    Ok(pvalue_from_null(observed, perms.iter().map(|p| statistic_fn(p))))
}

/// Parameters of the Gamma law fitted to `n·HSIC` under independence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaNull {
    pub shape: f64,
    pub scale: f64,
    pub mean: f64,
    pub variance: f64,
}

pub const GAMMA_MIN_N: usize = 20;

/// Moment-matched Gamma null from raw (`k`, `l`) and centered (`kc`, `lc`)
/// Gram matrices. The mean generalizes the unit-diagonal closed form to
/// arbitrary diagonals, which the target kernel requires.
pub fn gamma_null(k: &DMatrix<f64>, l: &DMatrix<f64>, kc: &DMatrix<f64>, lc: &DMatrix<f64>) -> Result<GammaNull> {
    let n = k.nrows();
    if n < GAMMA_MIN_N {
        return Err(Error::GammaApproximation(format!(
            "needs at least {GAMMA_MIN_N} observations, got {n}"
        )));
    }
    let nf = n as f64;
    let off_mean = |m: &DMatrix<f64>| (m.sum() - m.trace()) / (nf * (nf - 1.0));
    let mu_x = off_mean(k);
    let mu_y = off_mean(l);
    let diag_x = k.trace() / nf;
    let diag_y = l.trace() / nf;
    let mean = (diag_x - mu_x) * (diag_y - mu_y) / nf;

    let mut off = 0.0;
    for j in 0..n {
        for i in 0..n {
            if i != j {
                off += (kc[(i, j)] * lc[(i, j)] / 6.0).powi(2);
            }
        }
    }
    let var_core = off / (nf * (nf - 1.0));
    let variance = 72.0 * (nf - 4.0) * (nf - 5.0) / (nf * (nf - 1.0) * (nf - 2.0) * (nf - 3.0)) * var_core;
    if !(variance > 0.0 && variance.is_finite()) {
        return Err(Error::GammaApproximation(format!(
            "nonpositive estimated null variance ({variance})"
        )));
    }
    if !(mean > 0.0 && mean.is_finite()) {
        return Err(Error::GammaApproximation(format!(
            "nonpositive estimated null mean ({mean})"
        )));
    }
    // moments of HSIC; the law is fitted to n·HSIC
    let shape = mean * mean / variance;
    let scale = variance * nf / mean;
    Ok(GammaNull {
        shape,
        scale,
        mean,
        variance,
    })
}

impl GammaNull {
    /// Upper-tail probability of `n·hsic`.
    pub fn pvalue(&self, n: usize, hsic: f64) -> f64 {
        let stat = n as f64 * hsic;
        if stat <= 0.0 {
            return 1.0;
        }
        let law = Gamma::new(self.shape, 1.0 / self.scale).expect("validated gamma parameters");
        law.sf(stat).clamp(0.0, 1.0)
    }
}

/// Gamma-approximation p-value of the global HSIC test.
pub fn gamma_pvalue(x: &[f64], y: &[f64], kx: &KernelConfig, ky: &KernelConfig) -> Result<f64> {
    check_pair(x, y)?;
    let k = gram_matrix(x, kx)?;
    let l = gram_matrix(y, ky)?;
    let (kc, lc) = (center(&k), center(&l));
    let null = gamma_null(&k, &l, &kc, &lc)?;
    Ok(null.pvalue(x.len(), hsic_from_centered(&kc, &lc)))
}

/// Gamma-approximation p-value of the target HSIC test.
pub fn gamma_pvalue_target(x: &[f64], y: &[f64], kx: &KernelConfig, target: &TargetConfig) -> Result<f64> {
    check_pair(x, y)?;
    let k = gram_matrix(x, kx)?;
    let l = target_gram(y, target)?;
    let (kc, lc) = (center(&k), center(&l));
    let null = gamma_null(&k, &l, &kc, &lc)?;
    Ok(null.pvalue(x.len(), hsic_from_centered(&kc, &lc)))
}
