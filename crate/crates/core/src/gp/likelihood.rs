use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::{matern_with_log_derivative, GpHyperparams, MaternNu};
use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Likelihood of a fixed (standardized) design and output vector as a
/// function of `θ = [log ℓ₁..log ℓ_p, log σ², log τ]`.
pub struct LikelihoodProblem {
    n: usize,
    p: usize,
    nu: MaternNu,
    floor: f64,
    y: DVector<f64>,
    /// |x_ik − x_jk| for i > j, pair-major: `diffs[pair * p + k]`.
    diffs: Vec<f64>,
}

/// Conditioned quantities at one hyperparameter point.
pub(crate) struct Evaluation {
    pub lml: f64,
    pub trend: f64,
    pub chol: Cholesky<f64, Dyn>,
    pub alpha: DVector<f64>,
}

impl LikelihoodProblem {
    pub fn new(x: &DMatrix<f64>, y: &[f64], nu: MaternNu, floor: f64) -> Self {
        let (n, p) = x.shape();
        let mut diffs = Vec::with_capacity(n * n.saturating_sub(1) / 2 * p);
        for i in 0..n {
            for j in 0..i {
                for k in 0..p {
                    diffs.push((x[(i, k)] - x[(j, k)]).abs());
                }
            }
        }
        Self {
            n,
            p,
            nu,
            floor,
            y: DVector::from_column_slice(y),
            diffs,
        }
    }

    pub fn dim(&self) -> usize {
        self.p + 2
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Correlation matrix entries for pairs (and optionally the per-pair
    /// log-derivatives with respect to each log length).
    fn correlations(&self, lengths: &[f64], with_grad: bool) -> (Vec<f64>, Vec<f64>) {
        let p = self.p;
        let pairs = self.diffs.len() / p.max(1);
        let mut r = Vec::with_capacity(pairs);
        let mut g = if with_grad {
            Vec::with_capacity(pairs * p)
        } else {
            Vec::new()
        };
        let inv: Vec<f64> = lengths.iter().map(|l| 1.0 / l).collect();
        for pair in 0..pairs {
            let d = &self.diffs[pair * p..(pair + 1) * p];
            let mut prod = 1.0;
            for k in 0..p {
                let (rk, gk) = matern_with_log_derivative(d[k] * inv[k], self.nu);
                prod *= rk;
                if with_grad {
                    g.push(gk);
                }
            }
            r.push(prod);
        }
        (r, g)
    }

    fn covariance(&self, r: &[f64], variance: f64, nugget: f64) -> DMatrix<f64> {
        let n = self.n;
        let mut k = DMatrix::zeros(n, n);
        let mut pair = 0;
        for i in 0..n {
            for j in 0..i {
                let v = variance * r[pair];
                k[(i, j)] = v;
                k[(j, i)] = v;
                pair += 1;
            }
            k[(i, i)] = variance + nugget + self.floor;
        }
        k
    }

    fn condition(&self, k: DMatrix<f64>) -> Option<Evaluation> {
        let n = self.n;
        let chol = Cholesky::new(k)?;
        let ones = DVector::from_element(n, 1.0);
        let kinv_one = chol.solve(&ones);
        let kinv_y = chol.solve(&self.y);
        let denom = kinv_one.sum();
        if !(denom > 0.0) {
            return None;
        }
        let trend = kinv_y.sum() / denom;
        let alpha = &kinv_y - &kinv_one * trend;
        let resid = self.y.add_scalar(-trend);
        let quad = resid.dot(&alpha);
        let logdet: f64 = chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>() * 2.0;
        let lml = -0.5 * quad - 0.5 * logdet - 0.5 * n as f64 * LN_2PI;
        if !lml.is_finite() {
            return None;
        }
        Some(Evaluation {
            lml,
            trend,
            chol,
            alpha,
        })
    }

    pub(crate) fn evaluate(&self, hp: &GpHyperparams) -> Option<Evaluation> {
        let (r, _) = self.correlations(&hp.lengths, false);
        self.condition(self.covariance(&r, hp.process_variance, hp.nugget))
    }

    /// Log marginal likelihood at `θ`, `None` when the covariance is not
    /// positive definite.
    pub fn value(&self, theta: &[f64]) -> Option<f64> {
        let (lengths, variance, nugget) = self.unpack(theta);
        let (r, _) = self.correlations(&lengths, false);
        self.condition(self.covariance(&r, variance, nugget)).map(|e| e.lml)
    }

    /// Log marginal likelihood and its gradient with respect to `θ`.
    ///
    /// Uses `∂L/∂θ = ½ tr((ααᵀ − K⁻¹) ∂K/∂θ)`; the trend is the GLS optimum
    /// so it contributes nothing to the gradient.
    pub fn value_and_gradient(&self, theta: &[f64]) -> Option<(f64, Vec<f64>)> {
        let (lengths, variance, nugget) = self.unpack(theta);
        let (r, g) = self.correlations(&lengths, true);
        let eval = self.condition(self.covariance(&r, variance, nugget))?;
        let kinv = eval.chol.inverse();
        let a = &eval.alpha;
        let n = self.n;
        let p = self.p;

        let mut grad = vec![0.0; p + 2];
        let mut off_var = 0.0;
        let mut pair = 0;
        for i in 0..n {
            for j in 0..i {
                let w = a[i] * a[j] - kinv[(i, j)];
                let wr = w * r[pair];
                off_var += wr;
                let gp = &g[pair * p..(pair + 1) * p];
                for k in 0..p {
                    grad[k] += wr * gp[k];
                }
                pair += 1;
            }
        }
        let diag_w: f64 = (0..n).map(|i| a[i] * a[i] - kinv[(i, i)]).sum();
        // off-diagonal sums cover both triangles: ½·2 = 1
        for gk in grad.iter_mut().take(p) {
            *gk *= variance;
        }
        grad[p] = variance * (off_var + 0.5 * diag_w);
        grad[p + 1] = 0.5 * nugget * diag_w;
        Some((eval.lml, grad))
    }

    pub(crate) fn unpack(&self, theta: &[f64]) -> (Vec<f64>, f64, f64) {
        let lengths = theta[..self.p].iter().map(|t| t.exp()).collect();
        (lengths, theta[self.p].exp(), theta[self.p + 1].exp())
    }
}

/// Log marginal likelihood of `y` on standardized inputs `x`, with the trend
/// profiled by generalized least squares. The trend stored in `hp` is
/// ignored.
pub fn log_marginal_likelihood(hp: &GpHyperparams, x: &DMatrix<f64>, y: &[f64]) -> Result<f64> {
    hp.validate()?;
    if x.nrows() != y.len() {
        return Err(Error::LengthMismatch {
            expected: x.nrows(),
            got: y.len(),
        });
    }
    if x.ncols() != hp.lengths.len() {
        return Err(Error::LengthMismatch {
            expected: hp.lengths.len(),
            got: x.ncols(),
        });
    }
    let problem = LikelihoodProblem::new(x, y, hp.matern_nu, 0.0);
    problem.evaluate(hp).map(|e| e.lml).ok_or(Error::IndefiniteCovariance)
}
