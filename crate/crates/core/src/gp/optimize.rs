//! Box-constrained limited-memory BFGS with a projected backtracking line
//! search. Failed evaluations (non-positive-definite covariance) are treated
//! as +∞ and trigger step shrinking.

use std::collections::VecDeque;

#[derive(Debug, Clone)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

const MEMORY: usize = 8;
const ARMIJO: f64 = 1e-4;

/// Minimizes `f` (returning value and gradient) inside `[lower, upper]`.
/// Returns `None` when the starting point cannot be evaluated.
pub fn minimize_bounded<F>(mut f: F, x0: &[f64], lower: &[f64], upper: &[f64], max_evals: usize) -> Option<OptimResult>
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let dim = x0.len();
    let project = |x: &mut [f64]| {
        for i in 0..dim {
            x[i] = x[i].clamp(lower[i], upper[i]);
        }
    };
    let mut x = x0.to_vec();
    project(&mut x);
    let (mut fx, mut g) = f(&x)?;
    let mut evals = 1;
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut converged = false;

    while evals < max_evals {
        // variables pinned at a bound with the gradient pushing outward
        let free: Vec<bool> = (0..dim)
            .map(|i| !((x[i] <= lower[i] && g[i] > 0.0) || (x[i] >= upper[i] && g[i] < 0.0)))
            .collect();
        let pg_norm = (0..dim).filter(|&i| free[i]).map(|i| g[i].abs()).fold(0.0, f64::max);
        if pg_norm < 1e-6 * (1.0 + fx.abs()) {
            converged = true;
            break;
        }

        let mut d = two_loop(&g, &history, &free);
        let mut slope: f64 = (0..dim).map(|i| d[i] * g[i]).sum();
        if !(slope < 0.0) {
            history.clear();
            d = (0..dim).map(|i| if free[i] { -g[i] } else { 0.0 }).collect();
            slope = (0..dim).map(|i| d[i] * g[i]).sum();
        }
        let dnorm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        // first iteration and restarts: cap the step in θ-space
        let mut t = if history.is_empty() {
            (1.0 / dnorm).min(1.0)
        } else {
            1.0
        };

        let mut accepted = None;
        for _ in 0..30 {
            if evals >= max_evals {
                break;
            }
            let mut trial: Vec<f64> = (0..dim).map(|i| x[i] + t * d[i]).collect();
            project(&mut trial);
            evals += 1;
            if let Some((ft, gt)) = f(&trial) {
                let decrease: f64 = (0..dim).map(|i| g[i] * (trial[i] - x[i])).sum();
                if ft <= fx + ARMIJO * decrease.min(0.0) && ft <= fx {
                    accepted = Some((trial, ft, gt));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((xn, fnew, gn)) = accepted else {
            if history.is_empty() {
                break;
            }
            history.clear();
            continue;
        };

        let s: Vec<f64> = (0..dim).map(|i| xn[i] - x[i]).collect();
        let yv: Vec<f64> = (0..dim).map(|i| gn[i] - g[i]).collect();
        let sy: f64 = s.iter().zip(&yv).map(|(a, b)| a * b).sum();
        if sy > 1e-12 {
            if history.len() == MEMORY {
                history.pop_front();
            }
            history.push_back((s, yv, 1.0 / sy));
        }
        let rel = (fx - fnew).abs() / (1.0 + fx.abs());
        x = xn;
        fx = fnew;
        g = gn;
        if rel < 1e-10 {
            converged = true;
            break;
        }
    }
    Some(OptimResult {
        x,
        value: fx,
        evaluations: evals,
        converged,
    })
}

fn two_loop(g: &[f64], history: &VecDeque<(Vec<f64>, Vec<f64>, f64)>, free: &[bool]) -> Vec<f64> {
    let dim = g.len();
    let mut q: Vec<f64> = (0..dim).map(|i| if free[i] { g[i] } else { 0.0 }).collect();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = rho * dot_free(s, &q, free);
        for i in 0..dim {
            if free[i] {
                q[i] -= a * y[i];
            }
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = history.back() {
        let yy = dot_free(y, y, free);
        let sy = dot_free(s, y, free);
        if yy > 0.0 && sy > 0.0 {
            let gamma = sy / yy;
            q.iter_mut().for_each(|v| *v *= gamma);
        }
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.into_iter().rev()) {
        let b = rho * dot_free(y, &q, free);
        for i in 0..dim {
            if free[i] {
                q[i] += (a - b) * s[i];
            }
        }
    }
    q.iter().map(|v| -v).collect()
}

fn dot_free(a: &[f64], b: &[f64], free: &[bool]) -> f64 {
    (0..a.len()).filter(|&i| free[i]).map(|i| a[i] * b[i]).sum()
}
