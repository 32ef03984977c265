use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::ProbeDataset;
use crate::error::domain;
use crate::lexical::SparseVector;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRegConfig {
    /// L2 strength on the weights; the bias is not penalized.
    pub lambda: f64,
    /// Stop once the full gradient norm falls below this.
    pub tolerance: f64,
    pub max_iters: usize,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        Self { lambda: 1.0, tolerance: 1e-6, max_iters: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub lambda: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub converged: bool,
    pub initial_loss: f64,
    pub final_loss: f64,
    /// Objective value after every accepted step, starting at the initial point.
    #[serde(skip)]
    pub loss_trace: Vec<f64>,
}

impl LogisticModel {
    pub fn decision(&self, x: &SparseVector) -> f64 {
        x.dot_dense(&self.weights) + self.bias
    }

    pub fn predict_proba(&self, x: &SparseVector) -> f64 {
        sigmoid(self.decision(x))
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + libm::log1p(libm::exp(-z.abs()))
}

/// Mean log-loss plus `(lambda / 2) * ||w||^2`.
///
/// Parameters are packed as `[w_0, ..., w_{d-1}, bias]`.
pub struct LogisticObjective<'a> {
    features: &'a [SparseVector],
    targets: &'a [bool],
    dim: usize,
    lambda: f64,
}

impl<'a> LogisticObjective<'a> {
    pub fn new(dataset: &'a ProbeDataset, lambda: f64) -> Self {
        Self { features: &dataset.features, targets: &dataset.targets, dim: dataset.n_features, lambda }
    }

    pub fn n_params(&self) -> usize {
        self.dim + 1
    }

    pub fn loss(&self, params: &[f64]) -> f64 {
        self.evaluate(params, false).0
    }

    pub fn gradient(&self, params: &[f64]) -> Vec<f64> {
        self.evaluate(params, true).1
    }

    fn evaluate(&self, params: &[f64], with_grad: bool) -> (f64, Vec<f64>) {
        let (w, b) = params.split_at(self.dim);
        let bias = b[0];
        let n = self.features.len() as f64;
        let mut loss = 0.0;
        let mut grad = if with_grad { vec![0.0; self.dim + 1] } else { Vec::new() };
        for (x, &y) in self.features.iter().zip(self.targets) {
            let z = x.dot_dense(w) + bias;
            let y = f64::from(u8::from(y));
            loss += softplus(z) - y * z;
            if with_grad {
                let r = sigmoid(z) - y;
                for (i, v) in x.iter() {
                    grad[i as usize] += r * v;
                }
                grad[self.dim] += r;
            }
        }
        loss /= n;
        let sq: f64 = w.iter().map(|v| v * v).sum();
        loss += 0.5 * self.lambda * sq;
        if with_grad {
            for g in &mut grad {
                *g /= n;
            }
            for (g, wi) in grad.iter_mut().zip(w) {
                *g += self.lambda * wi;
            }
        }
        (loss, grad)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

const HISTORY: usize = 10;
const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;

/// Trains from the zero vector. See [`train_logreg_from`].
pub fn train_logreg(dataset: &ProbeDataset, config: &LogRegConfig) -> Result<LogisticModel> {
    train_logreg_from(dataset, config, &vec![0.0; dataset.n_features + 1])
}

/// Minimizes [`LogisticObjective`] with L-BFGS and an Armijo backtracking
/// line search, starting from `init` (`[w.., bias]`). Every accepted step
/// strictly lowers the objective. Hitting `max_iters`, or a line search that
/// cannot make progress, leaves `converged = false`.
pub fn train_logreg_from(dataset: &ProbeDataset, config: &LogRegConfig, init: &[f64]) -> Result<LogisticModel> {
    let (neg, pos) = dataset.class_counts();
    if neg == 0 || pos == 0 {
        return Err(domain!("logistic regression needs both classes (got {neg} negative, {pos} positive)"));
    }
    if !(config.lambda >= 0.0 && config.lambda.is_finite()) {
        return Err(domain!("lambda must be finite and non-negative"));
    }
    if init.len() != dataset.n_features + 1 {
        return Err(domain!("initial point has {} parameters, expected {}", init.len(), dataset.n_features + 1));
    }

    let objective = LogisticObjective::new(dataset, config.lambda);
    let mut x = init.to_vec();
    let (mut f, mut g) = objective.evaluate(&x, true);
    let initial_loss = f;
    let mut trace = vec![f];
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(HISTORY);
    let mut iterations = 0;
    let mut converged = norm(&g) < config.tolerance;

    while !converged && iterations < config.max_iters {
        let mut d = lbfgs_direction(&g, &history);
        let mut slope = dot(&g, &d);
        if slope.is_nan() || slope >= 0.0 {
            history.clear();
            d = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
        }
        let mut step = if history.is_empty() { 1.0 / norm(&g).max(1.0) } else { 1.0 };

        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let candidate: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + step * di).collect();
            let f_new = objective.loss(&candidate);
            if f_new <= f + ARMIJO_C1 * step * slope && f_new < f {
                accepted = Some((candidate, f_new));
                break;
            }
            step *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else {
            break;
        };
        let g_new = objective.gradient(&x_new);
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) {
            if history.len() == HISTORY {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        x = x_new;
        f = f_new;
        g = g_new;
        trace.push(f);
        iterations += 1;
        converged = norm(&g) < config.tolerance;
    }

    let gradient_norm = norm(&g);
    let bias = x.pop().expect("bias parameter");
    Ok(LogisticModel {
        weights: x,
        bias,
        lambda: config.lambda,
        iterations,
        gradient_norm,
        converged,
        initial_loss,
        final_loss: f,
        loss_trace: trace,
    })
}

/// Two-loop recursion: approximately `-H^{-1} g`.
fn lbfgs_direction(g: &[f64], history: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = history.back() {
        let gamma = dot(s, y) / dot(y, y);
        for qi in &mut q {
            *qi *= gamma;
        }
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    for qi in &mut q {
        *qi = -*qi;
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dataset(rows: &[(&[(u32, f64)], bool)], dim: usize) -> ProbeDataset {
        let features = rows.iter().map(|(p, _)| SparseVector::from_pairs(p.to_vec()).unwrap()).collect();
        let targets = rows.iter().map(|&(_, t)| t).collect();
        ProbeDataset::new(features, targets, dim).unwrap()
    }

    #[test]
    fn separable_pair_is_fit() {
        let d = dataset(&[(&[(0, 1.0)], true), (&[(1, 1.0)], false)], 2);
        let m = train_logreg(&d, &LogRegConfig::default()).unwrap();
        assert!(m.converged);
        assert!(m.predict_proba(&d.features[0]) > 0.5);
        assert!(m.predict_proba(&d.features[1]) < 0.5);
    }

    #[test]
    fn heavy_regularization_shrinks_to_half() {
        let d = dataset(&[(&[(0, 1.0)], true), (&[(1, 1.0)], false), (&[(0, 0.5)], true), (&[(1, 0.3)], false)], 2);
        let cfg = LogRegConfig { lambda: 1e8, ..Default::default() };
        let m = train_logreg(&d, &cfg).unwrap();
        assert!(m.weights.iter().all(|w| w.abs() < 1e-7));
        for x in &d.features {
            assert!((m.predict_proba(x) - 0.5).abs() < 1e-6);
        }
    }

    #[test]
    fn single_class_is_rejected() {
        let d = dataset(&[(&[(0, 1.0)], true), (&[(1, 1.0)], true)], 2);
        assert!(train_logreg(&d, &LogRegConfig::default()).is_err());
    }

    #[test]
    fn loss_never_increases() {
        let d = dataset(
            &[(&[(0, 0.9), (2, 0.1)], true), (&[(1, 1.0)], false), (&[(0, 0.4), (1, 0.6)], true), (&[(2, 1.0)], false)],
            3,
        );
        let m = train_logreg(&d, &LogRegConfig { lambda: 0.01, ..Default::default() }).unwrap();
        assert!(m.loss_trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(m.final_loss <= m.initial_loss);
    }

    #[test]
    fn non_convergence_is_reported() {
        let d = dataset(&[(&[(0, 1.0)], true), (&[(1, 1.0)], false)], 2);
        let m = train_logreg(&d, &LogRegConfig { lambda: 0.0, tolerance: 1e-12, max_iters: 3 }).unwrap();
        assert!(!m.converged);
        assert_eq!(m.iterations, 3);
    }
}
