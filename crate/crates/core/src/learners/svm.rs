//! Linear SVM (L2-regularized hinge loss, subgradient descent) with a
//! logistic calibration of the margin.

use serde::{Deserialize, Serialize};

use super::logreg::LinearModel;
use super::{g17, sigmoid};
use crate::data::Matrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinearSvmSpec {
    /// C in ½‖w‖² + C·Σ hinge.
    pub regularization: f64,
    pub epochs: usize,
}

impl Default for LinearSvmSpec {
    fn default() -> Self {
        LinearSvmSpec {
            regularization: 1.0,
            epochs: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub linear: LinearModel,
    /// Probability = sigmoid(a·margin + b).
    #[serde(with = "g17")]
    pub platt_a: f64,
    #[serde(with = "g17")]
    pub platt_b: f64,
}

impl SvmModel {
    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        sigmoid(self.platt_a * self.linear.margin(x) + self.platt_b)
    }
}

/// Fits sigmoid(a·m + b) to labels by Newton's method with step halving.
pub fn platt_fit(margins: &[f64], y: &[u8]) -> (f64, f64) {
    let nll = |a: f64, b: f64| -> f64 {
        margins
            .iter()
            .zip(y)
            .map(|(&m, &yi)| {
                let z = a * m + b;
                super::log1pexp(z) - yi as f64 * z
            })
            .sum()
    };
    let (mut a, mut b) = (1.0, 0.0);
    let mut cur = nll(a, b);
    for _ in 0..100 {
        let (mut ga, mut gb, mut haa, mut hab, mut hbb) = (0.0, 0.0, 1e-12, 0.0, 1e-12);
        for (&m, &yi) in margins.iter().zip(y) {
            let p = sigmoid(a * m + b);
            let r = p - yi as f64;
            let s = p * (1.0 - p);
            ga += r * m;
            gb += r;
            haa += s * m * m;
            hab += s * m;
            hbb += s;
        }
        let det = haa * hbb - hab * hab;
        if det.abs() < 1e-300 {
            break;
        }
        let da = (hbb * ga - hab * gb) / det;
        let db = (haa * gb - hab * ga) / det;
        let mut t = 1.0;
        let mut improved = false;
        while t > 1e-10 {
            let (na, nb) = (a - t * da, b - t * db);
            let v = nll(na, nb);
            if v < cur {
                a = na;
                b = nb;
                improved = cur - v > 1e-12 * cur.abs().max(1.0);
                cur = v;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    (a, b)
}

pub fn fit_svm(x: &Matrix, y: &[u8], spec: &LinearSvmSpec) -> Result<SvmModel> {
    if !(spec.regularization > 0.0) || spec.epochs == 0 {
        return Err(Error::InvalidInput(format!("invalid SVM settings: {spec:?}")));
    }
    let (n, p) = (x.rows(), x.cols());
    // per-sample form: λ/2‖w‖² + mean hinge, λ = 1/(C·n)
    let lambda = 1.0 / (spec.regularization * n as f64);
    let sign: Vec<f64> = y.iter().map(|&v| if v == 1 { 1.0 } else { -1.0 }).collect();
    let mut w = vec![0.0; p];
    let mut b = 0.0;
    let (mut avg_w, mut avg_b, mut averaged) = (vec![0.0; p], 0.0, 0.0);
    for t in 1..=spec.epochs {
        let mut gw: Vec<f64> = w.iter().map(|wj| lambda * wj).collect();
        let mut gb = 0.0;
        for i in 0..n {
            let row = x.row(i);
            let m = b + row.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>();
            if sign[i] * m < 1.0 {
                for (g, v) in gw.iter_mut().zip(row) {
                    *g -= sign[i] * v / n as f64;
                }
                gb -= sign[i] / n as f64;
            }
        }
        let eta = 0.5 / (t as f64).sqrt();
        for (wj, g) in w.iter_mut().zip(&gw) {
            *wj -= eta * g;
        }
        b -= eta * gb;
        if 2 * t > spec.epochs {
            for (a, wj) in avg_w.iter_mut().zip(&w) {
                *a += wj;
            }
            avg_b += b;
            averaged += 1.0;
        }
    }
    let linear = LinearModel {
        weights: avg_w.iter().map(|v| v / averaged).collect(),
        intercept: avg_b / averaged,
    };
    let margins: Vec<f64> = (0..n).map(|i| linear.margin(x.row(i))).collect();
    let (platt_a, platt_b) = platt_fit(&margins, y);
    Ok(SvmModel {
        linear,
        platt_a,
        platt_b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn platt_recovers_a_known_link() {
        let m: Vec<f64> = (0..400).map(|i| (i as f64 - 200.0) / 50.0).collect();
        // deterministic labels with P(y=1) = sigmoid(2m - 1), by quantile thinning
        let y: Vec<u8> = m
            .iter()
            .enumerate()
            .map(|(i, &v)| u8::from(((i * 37) % 100) as f64 / 100.0 + 0.005 < sigmoid(2.0 * v - 1.0)))
            .collect();
        let (a, b) = platt_fit(&m, &y);
        assert!((a - 2.0).abs() < 0.5, "a = {a}");
        assert!((b + 1.0).abs() < 0.5, "b = {b}");
    }
}
