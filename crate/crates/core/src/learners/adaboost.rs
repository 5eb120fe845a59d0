//! Discrete two-class AdaBoost over shallow CART trees.

use serde::{Deserialize, Serialize};

use super::tree::{fit_cart, CartParams, MaxFeatures, Node};
use super::{g17, sigmoid};
use crate::data::Matrix;
use crate::error::{Error, Result};
use crate::seed::Seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaBoostSpec {
    pub n_learners: usize,
    pub learning_rate: f64,
    pub base_depth: usize,
}

impl Default for AdaBoostSpec {
    fn default() -> Self {
        AdaBoostSpec {
            n_learners: 100,
            learning_rate: 0.5,
            base_depth: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaModel {
    pub learners: Vec<Node>,
    #[serde(with = "g17::vec")]
    pub alphas: Vec<f64>,
    /// Weighted training error of each accepted round.
    #[serde(with = "g17::vec")]
    pub errors: Vec<f64>,
}

fn vote(tree: &Node, x: &[f64]) -> f64 {
    if tree.predict(x) > 0.5 {
        1.0
    } else {
        -1.0
    }
}

impl AdaModel {
    pub fn margin(&self, x: &[f64]) -> f64 {
        self.learners.iter().zip(&self.alphas).map(|(t, a)| a * vote(t, x)).sum()
    }

    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        sigmoid(self.margin(x))
    }
}

/// Stops early when a round's weighted error reaches 1/2; a perfect round is
/// kept with its error floored at 1e-10 and ends training.
pub fn fit_adaboost(x: &Matrix, y: &[u8], spec: &AdaBoostSpec, seed: Seed) -> Result<AdaModel> {
    if spec.n_learners == 0 || spec.base_depth == 0 || !(spec.learning_rate > 0.0) {
        return Err(Error::InvalidInput(format!("invalid AdaBoost settings: {spec:?}")));
    }
    let n = x.rows();
    let mut w = vec![1.0 / n as f64; n];
    let params = CartParams {
        max_depth: spec.base_depth,
        max_features: MaxFeatures::All,
        min_samples_split: 2,
    };
    let mut model = AdaModel {
        learners: Vec::new(),
        alphas: Vec::new(),
        errors: Vec::new(),
    };
    let mut rng = seed.rng();
    for _ in 0..spec.n_learners {
        let tree = fit_cart(x, y, &w, params, &mut rng);
        let wrong: Vec<bool> = (0..n)
            .map(|i| (vote(&tree, x.row(i)) > 0.0) != (y[i] == 1))
            .collect();
        let err: f64 = w.iter().zip(&wrong).filter(|(_, &m)| m).map(|(wi, _)| wi).sum::<f64>() / w.iter().sum::<f64>();
        if err >= 0.5 {
            break;
        }
        let e = err.max(1e-10);
        let alpha = spec.learning_rate * ((1.0 - e) / e).ln();
        model.learners.push(tree);
        model.alphas.push(alpha);
        model.errors.push(err);
        if err == 0.0 {
            break;
        }
        for (wi, &m) in w.iter_mut().zip(&wrong) {
            if m {
                *wi *= alpha.exp();
            }
        }
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|wi| *wi /= s);
    }
    Ok(model)
}
