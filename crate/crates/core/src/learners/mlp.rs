//! One-hidden-layer ReLU network with a sigmoid output, trained by
//! full-batch gradient descent on mean logloss.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{g17, log1pexp, sigmoid};
use crate::data::Matrix;
use crate::error::{Error, Result};
use crate::seed::Seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NeuralNetSpec {
    pub hidden_width: usize,
    pub epochs: usize,
    pub step_size: f64,
}

impl Default for NeuralNetSpec {
    fn default() -> Self {
        NeuralNetSpec {
            hidden_width: 32,
            epochs: 500,
            step_size: 0.1,
        }
    }
}

/// Parameters flattened as `[W1 (width×p, row-major), b1 (width), w2 (width), b2]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub inputs: usize,
    pub width: usize,
    #[serde(with = "g17::vec")]
    pub theta: Vec<f64>,
}

pub fn mlp_param_count(inputs: usize, width: usize) -> usize {
    width * inputs + 2 * width + 1
}

fn forward(theta: &[f64], p: usize, width: usize, x: &[f64], hidden: &mut [f64]) -> f64 {
    let (w1, rest) = theta.split_at(width * p);
    let (b1, rest) = rest.split_at(width);
    let (w2, b2) = rest.split_at(width);
    let mut z = b2[0];
    for k in 0..width {
        let a = b1[k] + w1[k * p..(k + 1) * p].iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        hidden[k] = a;
        z += w2[k] * a.max(0.0);
    }
    z
}

impl Mlp {
    pub fn margin(&self, x: &[f64]) -> f64 {
        let mut hidden = vec![0.0; self.width];
        forward(&self.theta, self.inputs, self.width, x, &mut hidden)
    }

    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        sigmoid(self.margin(x))
    }
}

/// Mean logloss and its gradient by backpropagation.
pub fn mlp_loss_and_grad(theta: &[f64], width: usize, x: &Matrix, y: &[u8]) -> (f64, Vec<f64>) {
    let (n, p) = (x.rows(), x.cols());
    assert_eq!(theta.len(), mlp_param_count(p, width));
    let mut grad = vec![0.0; theta.len()];
    let mut hidden = vec![0.0; width];
    let mut loss = 0.0;
    let (o_b1, o_w2, o_b2) = (width * p, width * p + width, width * p + 2 * width);
    for i in 0..n {
        let row = x.row(i);
        let z = forward(theta, p, width, row, &mut hidden);
        let yi = y[i] as f64;
        loss += log1pexp(z) - yi * z;
        let dz = sigmoid(z) - yi;
        grad[o_b2] += dz;
        for k in 0..width {
            let a = hidden[k];
            grad[o_w2 + k] += dz * a.max(0.0);
            if a > 0.0 {
                let da = dz * theta[o_w2 + k];
                grad[o_b1 + k] += da;
                for (g, v) in grad[k * p..(k + 1) * p].iter_mut().zip(row) {
                    *g += da * v;
                }
            }
        }
    }
    let nf = n as f64;
    grad.iter_mut().for_each(|g| *g /= nf);
    (loss / nf, grad)
}

/// He-uniform initial weights from `seed`.
pub fn mlp_init(inputs: usize, width: usize, seed: Seed) -> Vec<f64> {
    let mut rng = seed.rng();
    let bound = (6.0 / inputs.max(1) as f64).sqrt();
    let out_bound = (6.0 / width as f64).sqrt();
    let mut theta = vec![0.0; mlp_param_count(inputs, width)];
    for v in &mut theta[..width * inputs] {
        *v = rng.gen_range(-bound..bound);
    }
    let o_w2 = width * inputs + width;
    for v in &mut theta[o_w2..o_w2 + width] {
        *v = rng.gen_range(-out_bound..out_bound) * 0.5;
    }
    theta
}

pub fn fit_mlp(x: &Matrix, y: &[u8], spec: &NeuralNetSpec, seed: Seed) -> Result<Mlp> {
    if spec.hidden_width == 0 || !(spec.step_size > 0.0) {
        return Err(Error::InvalidInput(format!("invalid network settings: {spec:?}")));
    }
    let mut theta = mlp_init(x.cols(), spec.hidden_width, seed);
    for _ in 0..spec.epochs {
        let (_, g) = mlp_loss_and_grad(&theta, spec.hidden_width, x, y);
        for (t, gi) in theta.iter_mut().zip(&g) {
            *t -= spec.step_size * gi;
        }
    }
    Ok(Mlp {
        inputs: x.cols(),
        width: spec.hidden_width,
        theta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn training_reduces_loss() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![(i as f64 - 20.0) / 10.0, ((i * 3) % 7) as f64 / 7.0]).collect();
        let y: Vec<u8> = rows.iter().map(|r| u8::from(r[0] > 0.0)).collect();
        let x = Matrix::from_rows(&rows);
        let spec = NeuralNetSpec {
            hidden_width: 8,
            ..Default::default()
        };
        let init = mlp_init(2, 8, Seed(4));
        let before = mlp_loss_and_grad(&init, 8, &x, &y).0;
        let m = fit_mlp(&x, &y, &spec, Seed(4)).unwrap();
        let after = mlp_loss_and_grad(&m.theta, 8, &x, &y).0;
        assert!(after < before);
    }
}
