//! Second-order gradient boosting on weighted logistic loss.

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::tree::{midpoint, Node};
use super::{g17, sigmoid};
use crate::data::Matrix;
use crate::error::{Error, Result};
use crate::seed::Seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbtParams {
    pub colsample_bytree: f64,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_child_weight: f64,
    pub n_estimators: usize,
    pub reg_alpha: f64,
    pub reg_lambda: f64,
    pub scale_pos_weight: f64,
    pub subsample: f64,
}

impl Default for GbtParams {
    fn default() -> Self {
        GbtParams {
            colsample_bytree: 0.7,
            learning_rate: 0.01,
            max_depth: 5,
            min_child_weight: 5.0,
            n_estimators: 300,
            reg_alpha: 0.1,
            reg_lambda: 2.0,
            scale_pos_weight: 2.0,
            subsample: 0.7,
        }
    }
}

impl GbtParams {
    pub fn validate(&self) -> Result<()> {
        let frac = |v: f64| v > 0.0 && v <= 1.0;
        let ok = frac(self.colsample_bytree)
            && frac(self.subsample)
            && self.learning_rate > 0.0
            && self.max_depth > 0
            && self.min_child_weight >= 0.0
            && self.reg_alpha >= 0.0
            && self.reg_lambda >= 0.0
            && self.scale_pos_weight > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid boosting parameters: {self:?}")))
        }
    }
}

fn soft(g: f64, alpha: f64) -> f64 {
    if g > alpha {
        g - alpha
    } else if g < -alpha {
        g + alpha
    } else {
        0.0
    }
}

/// −soft(G, α) / (H + λ).
pub fn gbt_leaf_weight(g: f64, h: f64, reg_alpha: f64, reg_lambda: f64) -> f64 {
    let w = -soft(g, reg_alpha) / (h + reg_lambda);
    if w == 0.0 {
        0.0
    } else {
        w
    }
}

fn structure_score(g: f64, h: f64, p: &GbtParams) -> f64 {
    let s = soft(g, p.reg_alpha);
    s * s / (h + p.reg_lambda)
}

/// Split gain, or `None` when a child is too light or the gain is not positive.
pub fn gbt_split_gain(gl: f64, hl: f64, gr: f64, hr: f64, params: &GbtParams) -> Option<f64> {
    if hl < params.min_child_weight || hr < params.min_child_weight {
        return None;
    }
    let gain = 0.5
        * (structure_score(gl, hl, params) + structure_score(gr, hr, params)
            - structure_score(gl + gr, hl + hr, params));
    (gain > 0.0).then_some(gain)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedEnsemble {
    #[serde(with = "g17")]
    pub base_score: f64,
    #[serde(with = "g17")]
    pub learning_rate: f64,
    pub trees: Vec<Node>,
    /// Weighted mean logloss on the training rows: before any tree, then
    /// after each tree.
    #[serde(with = "g17::vec")]
    pub train_logloss: Vec<f64>,
}

impl BoostedEnsemble {
    pub fn margin(&self, x: &[f64]) -> f64 {
        self.base_score + self.learning_rate * self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }

    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        sigmoid(self.margin(x))
    }
}

fn weighted_logloss(margin: &[f64], y: &[u8], w: &[f64]) -> f64 {
    let mut num = 0.0;
    for ((&f, &yi), &wi) in margin.iter().zip(y).zip(w) {
        // log(1 + e^{-f}) for y=1, log(1 + e^{f}) for y=0
        let z = if yi == 1 { -f } else { f };
        num += wi * (z.max(0.0) + (-z.abs()).exp().ln_1p());
    }
    num / w.iter().sum::<f64>()
}

/// Per-tree working set: for each sampled feature, the sampled rows in
/// value order (ties by row index). Every node owns the same contiguous
/// range in each list.
struct Workspace<'a> {
    lists: Vec<Vec<(f64, u32)>>,
    features: &'a [usize],
    gh: &'a [(f64, f64)],
    goes_left: Vec<bool>,
    scratch: Vec<(f64, u32)>,
    params: &'a GbtParams,
}

impl Workspace<'_> {
    fn grow(&mut self, start: usize, end: usize, depth: usize) -> Node {
        let p = self.params;
        let (mut gs, mut hs) = (0.0, 0.0);
        for &(_, i) in &self.lists[0][start..end] {
            let (g, h) = self.gh[i as usize];
            gs += g;
            hs += h;
        }
        let leaf = Node::leaf(gbt_leaf_weight(gs, hs, p.reg_alpha, p.reg_lambda), hs);
        if depth >= p.max_depth || end - start < 2 {
            return leaf;
        }
        let parent = structure_score(gs, hs, p);
        let mcw = p.min_child_weight;
        let mut best: Option<(f64, usize, usize, f64)> = None;
        for (slot, list) in self.lists.iter().enumerate() {
            let seg = &list[start..end];
            let (mut gl, mut hl) = (0.0, 0.0);
            for w in seg.windows(2) {
                let (a, i) = w[0];
                let b = w[1].0;
                let (g, h) = self.gh[i as usize];
                gl += g;
                hl += h;
                let hr = hs - hl;
                if a == b || !(hl >= mcw && hr >= mcw && hl > 0.0 && hr > 0.0) {
                    continue;
                }
                let gain = 0.5 * (structure_score(gl, hl, p) + structure_score(gs - gl, hr, p) - parent);
                if gain > 0.0 && best.is_none_or(|(bg, ..)| gain > bg) {
                    best = Some((gain, slot, self.features[slot], midpoint(a, b)));
                }
            }
        }
        let Some((gain, slot, f, threshold)) = best else {
            return leaf;
        };
        for &(v, i) in &self.lists[slot][start..end] {
            self.goes_left[i as usize] = v < threshold;
        }
        let mut mid = start;
        for list in self.lists.iter_mut() {
            // stable partition keeps each side in value order
            self.scratch.clear();
            let mut w = start;
            for k in start..end {
                let e = list[k];
                if self.goes_left[e.1 as usize] {
                    list[w] = e;
                    w += 1;
                } else {
                    self.scratch.push(e);
                }
            }
            list[w..end].copy_from_slice(&self.scratch);
            mid = w;
        }
        let left = self.grow(start, mid, depth + 1);
        let right = self.grow(mid, end, depth + 1);
        Node::split(f, threshold, gain, left, right)
    }
}

/// Boosts `params.n_estimators` trees. Tree `t` draws its row and column
/// subsamples from `seed.derive(t)`.
pub fn fit_gbt(x: &Matrix, y: &[u8], params: &GbtParams, seed: Seed) -> Result<BoostedEnsemble> {
    params.validate()?;
    let (n, p) = (x.rows(), x.cols());
    let w: Vec<f64> = y
        .iter()
        .map(|&yi| if yi == 1 { params.scale_pos_weight } else { 1.0 })
        .collect();
    let wpos: f64 = y.iter().zip(&w).filter(|(&yi, _)| yi == 1).map(|(_, wi)| wi).sum();
    let wtot: f64 = w.iter().sum();
    let rate = wpos / wtot;
    if rate <= 0.0 || rate >= 1.0 {
        return Err(Error::SingleClass);
    }
    let base_score = (rate / (1.0 - rate)).ln();
    let mut margin = vec![base_score; n];
    let mut train_logloss = vec![weighted_logloss(&margin, y, &w)];
    let mut trees = Vec::with_capacity(params.n_estimators);
    let mut gh = vec![(0.0, 0.0); n];
    let n_rows = ((params.subsample * n as f64).round() as usize).clamp(1, n);
    let n_cols = ((params.colsample_bytree * p as f64).round() as usize).clamp(1, p.max(1));
    let sorted: Vec<Vec<usize>> = (0..p)
        .map(|f| {
            let mut o: Vec<usize> = (0..n).collect();
            o.sort_by(|&a, &b| x.get(a, f).total_cmp(&x.get(b, f)));
            o
        })
        .collect();

    for t in 0..params.n_estimators {
        for i in 0..n {
            let pi = sigmoid(margin[i]);
            gh[i] = (w[i] * (pi - y[i] as f64), w[i] * pi * (1.0 - pi));
        }
        let mut rng = seed.derive(t as u64).rng();
        let mut in_sample = vec![n_rows == n; n];
        if n_rows < n {
            for i in sample(&mut rng, n, n_rows) {
                in_sample[i] = true;
            }
        }
        let mut features: Vec<usize> = if n_cols == p {
            (0..p).collect()
        } else {
            sample(&mut rng, p, n_cols).into_vec()
        };
        features.sort_unstable();
        let lists = features
            .iter()
            .map(|&f| {
                sorted[f]
                    .iter()
                    .filter(|&&i| in_sample[i])
                    .map(|&i| (x.get(i, f), i as u32))
                    .collect()
            })
            .collect();
        let mut ws = Workspace {
            lists,
            features: &features,
            gh: &gh,
            goes_left: vec![false; n],
            scratch: Vec::with_capacity(n_rows),
            params,
        };
        let tree = ws.grow(0, n_rows, 0);
        for (i, m) in margin.iter_mut().enumerate() {
            *m += params.learning_rate * tree.predict(x.row(i));
        }
        train_logloss.push(weighted_logloss(&margin, y, &w));
        trees.push(tree);
    }
    Ok(BoostedEnsemble {
        base_score,
        learning_rate: params.learning_rate,
        trees,
        train_logloss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leaf_weight_examples() {
        assert_eq!(gbt_leaf_weight(4.0, 3.0, 0.0, 1.0), -1.0);
        assert_eq!(gbt_leaf_weight(0.05, 3.0, 0.1, 1.0), 0.0);
        assert!((gbt_leaf_weight(2.1, 1.0, 0.1, 2.0) + 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn split_gain_examples() {
        let p = GbtParams {
            reg_alpha: 0.0,
            reg_lambda: 1.0,
            min_child_weight: 0.0,
            ..GbtParams::default()
        };
        assert_eq!(gbt_split_gain(-2.0, 1.0, 2.0, 1.0, &p), Some(2.0));
        assert_eq!(gbt_split_gain(1.0, 2.0, 1.0, 2.0, &p), None);
        assert_eq!(gbt_split_gain(-50.0, 0.4, 50.0, 10.0, &GbtParams::default()), None);
    }

    fn toy() -> (Matrix, Vec<u8>) {
        let rows: Vec<Vec<f64>> = (0..60).map(|i| vec![(i % 20) as f64, (i * 7 % 11) as f64]).collect();
        let y = rows.iter().map(|r| u8::from(r[0] + 0.3 * r[1] > 11.0)).collect();
        (Matrix::from_rows(&rows), y)
    }

    #[test]
    fn no_trees_predicts_base_rate() {
        let (x, y) = toy();
        let p = GbtParams {
            n_estimators: 0,
            scale_pos_weight: 1.0,
            ..GbtParams::default()
        };
        let m = fit_gbt(&x, &y, &p, Seed(1)).unwrap();
        let rate = y.iter().filter(|&&v| v == 1).count() as f64 / y.len() as f64;
        assert!((m.predict_proba(x.row(0)) - rate).abs() < 1e-12);
    }

    #[test]
    fn logloss_non_increasing_without_subsampling() {
        let (x, y) = toy();
        let p = GbtParams {
            subsample: 1.0,
            colsample_bytree: 1.0,
            min_child_weight: 0.5,
            n_estimators: 50,
            learning_rate: 0.3,
            ..GbtParams::default()
        };
        let m = fit_gbt(&x, &y, &p, Seed(2)).unwrap();
        assert!(m.train_logloss.windows(2).all(|w| w[1] <= w[0]));
        assert!(m.trees.iter().all(|t| t.depth() <= 5));
    }
}
