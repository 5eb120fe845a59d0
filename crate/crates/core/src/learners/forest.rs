//! Random forest of weighted Gini CART trees.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::tree::{fit_cart, CartParams, MaxFeatures, Node};
use crate::data::Matrix;
use crate::error::{Error, Result};
use crate::seed::Seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    #[default]
    Gini,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomForestSpec {
    pub n_trees: usize,
    pub max_depth: usize,
    pub criterion: Criterion,
    pub feature_subsample: MaxFeatures,
    pub bootstrap: bool,
    pub min_samples_split: usize,
}

impl Default for RandomForestSpec {
    fn default() -> Self {
        RandomForestSpec {
            n_trees: 200,
            max_depth: 8,
            criterion: Criterion::Gini,
            feature_subsample: MaxFeatures::Sqrt,
            bootstrap: true,
            min_samples_split: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Node>,
}

impl Forest {
    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        if self.trees.is_empty() {
            return 0.5;
        }
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }
}

pub fn cart_params(spec: &RandomForestSpec) -> CartParams {
    CartParams {
        max_depth: spec.max_depth,
        max_features: spec.feature_subsample,
        min_samples_split: spec.min_samples_split,
    }
}

/// Tree `t` uses `seed.derive(t)` for its bootstrap and feature draws.
pub fn fit_forest(x: &Matrix, y: &[u8], spec: &RandomForestSpec, seed: Seed) -> Result<Forest> {
    if spec.n_trees == 0 || spec.max_depth == 0 {
        return Err(Error::InvalidInput("n_trees and max_depth must be positive".into()));
    }
    let n = x.rows();
    let fit_one = |t: usize| {
        let mut rng = seed.derive(t as u64).rng();
        let mut w = vec![0.0; n];
        if spec.bootstrap {
            for _ in 0..n {
                w[rng.gen_range(0..n)] += 1.0;
            }
        } else {
            w.fill(1.0);
        }
        fit_cart(x, y, &w, cart_params(spec), &mut rng)
    };
    #[cfg(feature = "parallel")]
    let trees = {
        use rayon::prelude::*;
        (0..spec.n_trees).into_par_iter().map(fit_one).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let trees = (0..spec.n_trees).map(fit_one).collect();
    Ok(Forest { trees })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_tree_without_bootstrap_is_cart() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![(i % 9) as f64, (i * 5 % 13) as f64, (i % 4) as f64]).collect();
        let y: Vec<u8> = rows.iter().map(|r| u8::from(r[0] * r[2] > 6.0 || r[1] > 10.0)).collect();
        let x = Matrix::from_rows(&rows);
        let spec = RandomForestSpec {
            n_trees: 1,
            bootstrap: false,
            feature_subsample: MaxFeatures::All,
            ..RandomForestSpec::default()
        };
        let f = fit_forest(&x, &y, &spec, Seed(5)).unwrap();
        let cart = fit_cart(&x, &y, &vec![1.0; 40], cart_params(&spec), &mut Seed(99).rng());
        for r in &rows {
            assert_eq!(f.predict_proba(r), cart.predict(r));
        }
    }
}
