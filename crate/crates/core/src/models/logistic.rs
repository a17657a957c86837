use serde::{Deserialize, Serialize};

use super::{check_trainable, Hyperparameters, ProbabilityModel};
use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Multinomial logistic regression with an L2 penalty on the weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub n_features: usize,
    pub n_classes: usize,
    /// `weights[k]` holds class `k`'s coefficients.
    pub weights: Vec<Vec<f64>>,
    pub intercepts: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

struct Params {
    w: Vec<Vec<f64>>,
    b: Vec<f64>,
}

impl Params {
    fn logits(&self, x: &[f64]) -> Vec<f64> {
        self.w
            .iter()
            .zip(&self.b)
            .map(|(w, b)| b + w.iter().zip(x).map(|(a, c)| a * c).sum::<f64>())
            .collect()
    }
}

/// Mean cross-entropy plus `l2/2 * ||W||^2`.
fn loss(params: &Params, train: &Dataset, l2: f64) -> f64 {
    let n = train.n_samples() as f64;
    let mut total = 0.0;
    for (x, &y) in train.features.iter().zip(&train.labels) {
        let z = params.logits(x);
        let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        total += lse - z[y];
    }
    let penalty: f64 = params.w.iter().flatten().map(|w| w * w).sum();
    total / n + 0.5 * l2 * penalty
}

fn gradient(params: &Params, train: &Dataset, l2: f64) -> Params {
    let k = params.b.len();
    let d = train.n_features();
    let n = train.n_samples() as f64;
    let mut gw = vec![vec![0.0; d]; k];
    let mut gb = vec![0.0; k];
    for (x, &y) in train.features.iter().zip(&train.labels) {
        let mut p = params.logits(x);
        softmax_in_place(&mut p);
        for c in 0..k {
            let r = p[c] - (c == y) as u8 as f64;
            gb[c] += r / n;
            for (g, xv) in gw[c].iter_mut().zip(x) {
                *g += r * xv / n;
            }
        }
    }
    for (g, w) in gw.iter_mut().flatten().zip(params.w.iter().flatten()) {
        *g += l2 * w;
    }
    Params { w: gw, b: gb }
}

/// Batch gradient descent with step halving whenever a step would raise
/// the loss and growth by 1.5 after each accepted step. Stops when the gradient's max-norm drops below `hp.tol` or
/// after `hp.max_iter` iterations.
pub fn fit_logistic(train: &Dataset, hp: &Hyperparameters, _seed: u64) -> Result<LogisticModel> {
    hp.validate()?;
    check_trainable(train)?;
    let k = train.n_classes();
    let d = train.n_features();
    let mut params = Params {
        w: vec![vec![0.0; d]; k],
        b: vec![0.0; k],
    };
    let mut current = loss(&params, train, hp.l2);
    if !current.is_finite() {
        return Err(Error::NonFiniteLoss { iteration: 0 });
    }
    let mut step = hp.step_size;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < hp.max_iter {
        let g = gradient(&params, train, hp.l2);
        let gmax = g
            .w
            .iter()
            .flatten()
            .chain(&g.b)
            .fold(0.0f64, |m, v| m.max(v.abs()));
        if gmax.is_nan() {
            return Err(Error::NonFiniteLoss {
                iteration: iterations,
            });
        }
        if gmax < hp.tol {
            converged = true;
            break;
        }
        iterations += 1;
        loop {
            let candidate = Params {
                w: params
                    .w
                    .iter()
                    .zip(&g.w)
                    .map(|(w, gw)| w.iter().zip(gw).map(|(a, b)| a - step * b).collect())
                    .collect(),
                b: params.b.iter().zip(&g.b).map(|(a, b)| a - step * b).collect(),
            };
            let l = loss(&candidate, train, hp.l2);
            if l.is_nan() {
                return Err(Error::NonFiniteLoss {
                    iteration: iterations,
                });
            }
            if l <= current {
                params = candidate;
                current = l;
                step *= 1.5;
                break;
            }
            step /= 2.0;
            if step < 1e-30 {
                // No descent possible at machine precision.
                converged = gmax < hp.tol.sqrt();
                return Ok(finish(params, d, k, converged, iterations));
            }
        }
    }
    Ok(finish(params, d, k, converged, iterations))
}

fn finish(params: Params, d: usize, k: usize, converged: bool, iterations: usize) -> LogisticModel {
    LogisticModel {
        n_features: d,
        n_classes: k,
        weights: params.w,
        intercepts: params.b,
        converged,
        iterations,
    }
}

impl ProbabilityModel for LogisticModel {
    fn n_features(&self) -> usize {
        self.n_features
    }
    fn n_classes(&self) -> usize {
        self.n_classes
    }
    fn predict_proba_row(&self, x: &[f64]) -> Vec<f64> {
        let mut z: Vec<f64> = self
            .weights
            .iter()
            .zip(&self.intercepts)
            .map(|(w, b)| b + w.iter().zip(x).map(|(a, c)| a * c).sum::<f64>())
            .collect();
        softmax_in_place(&mut z);
        z
    }
    fn kind(&self) -> &str {
        "logistic"
    }
}
