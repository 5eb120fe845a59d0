//! Penalized logistic regression by (proximal) gradient descent.

use serde::{Deserialize, Serialize};

use super::{g17, log1pexp, sigmoid};
use crate::data::Matrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Penalty {
    L1,
    L2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogisticRegressionSpec {
    pub penalty: Penalty,
    /// λ in mean-logloss + λ/2·‖w‖² (L2) or + λ·‖w‖₁ (L1); intercept unpenalized.
    pub strength: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for LogisticRegressionSpec {
    fn default() -> Self {
        LogisticRegressionSpec {
            penalty: Penalty::L2,
            strength: 0.01,
            max_iter: 2000,
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    #[serde(with = "g17::vec")]
    pub weights: Vec<f64>,
    #[serde(with = "g17")]
    pub intercept: f64,
}

impl LinearModel {
    pub fn margin(&self, x: &[f64]) -> f64 {
        self.intercept + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }

    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        sigmoid(self.margin(x))
    }
}

/// Smooth part of the objective and its gradient at `theta = [w.., b]`.
/// The L2 term is included; the L1 term is not (it is handled by the prox).
pub fn logreg_loss_and_grad(spec: &LogisticRegressionSpec, theta: &[f64], x: &Matrix, y: &[u8]) -> (f64, Vec<f64>) {
    let (n, p) = (x.rows(), x.cols());
    let mut grad = vec![0.0; p + 1];
    let mut loss = 0.0;
    for i in 0..n {
        let row = x.row(i);
        let z = theta[p] + row.iter().zip(theta).map(|(a, b)| a * b).sum::<f64>();
        let yi = y[i] as f64;
        loss += log1pexp(z) - yi * z;
        let r = sigmoid(z) - yi;
        for (g, v) in grad.iter_mut().zip(row) {
            *g += r * v;
        }
        grad[p] += r;
    }
    let nf = n as f64;
    loss /= nf;
    grad.iter_mut().for_each(|g| *g /= nf);
    if spec.penalty == Penalty::L2 {
        for j in 0..p {
            loss += 0.5 * spec.strength * theta[j] * theta[j];
            grad[j] += spec.strength * theta[j];
        }
    }
    (loss, grad)
}

pub fn fit_logreg(x: &Matrix, y: &[u8], spec: &LogisticRegressionSpec) -> Result<LinearModel> {
    if !(spec.strength >= 0.0) || spec.max_iter == 0 {
        return Err(Error::InvalidInput(format!("invalid logistic regression settings: {spec:?}")));
    }
    let (n, p) = (x.rows(), x.cols());
    // Lipschitz bound of the mean logloss gradient: ¼·mean‖[x, 1]‖²
    let sq: f64 = (0..n).map(|i| 1.0 + x.row(i).iter().map(|v| v * v).sum::<f64>()).sum::<f64>() / n as f64;
    let l2 = if spec.penalty == Penalty::L2 { spec.strength } else { 0.0 };
    let step = 1.0 / (0.25 * sq + l2);
    let mut theta = vec![0.0; p + 1];
    for _ in 0..spec.max_iter {
        let (_, grad) = logreg_loss_and_grad(spec, &theta, x, y);
        let mut moved = 0.0f64;
        for j in 0..=p {
            let mut next = theta[j] - step * grad[j];
            if spec.penalty == Penalty::L1 && j < p {
                let t = step * spec.strength;
                next = if next > t {
                    next - t
                } else if next < -t {
                    next + t
                } else {
                    0.0
                };
            }
            moved = moved.max((next - theta[j]).abs());
            theta[j] = next;
        }
        if moved < spec.tol {
            break;
        }
    }
    let intercept = theta.pop().unwrap_or(0.0);
    Ok(LinearModel {
        weights: theta,
        intercept,
    })
}
