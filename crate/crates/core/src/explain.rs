//! Path-dependent TreeSHAP, an exhaustive Shapley oracle, and summary export.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::data::{fmt_g17, Dataset, Matrix};
use crate::error::{Error, Result};
use crate::learners::{Model, Node, TrainedClassifier};

pub const MAX_EXHAUSTIVE_FEATURES: usize = 12;

/// Margin = offset + scale · Σ tree outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeEnsemble {
    pub trees: Vec<Node>,
    pub scale: f64,
    pub offset: f64,
}

impl TreeEnsemble {
    pub fn from_model(m: &TrainedClassifier) -> Result<TreeEnsemble> {
        match &m.model {
            Model::Gbt(e) => Ok(TreeEnsemble {
                trees: e.trees.clone(),
                scale: e.learning_rate,
                offset: e.base_score,
            }),
            Model::Rf(f) => Ok(TreeEnsemble {
                trees: f.trees.clone(),
                scale: if f.trees.is_empty() { 0.0 } else { 1.0 / f.trees.len() as f64 },
                offset: if f.trees.is_empty() { 0.5 } else { 0.0 },
            }),
            _ => Err(Error::NotTreeModel(m.spec.name().into())),
        }
    }

    pub fn margin(&self, x: &[f64]) -> f64 {
        self.offset + self.scale * self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }

    /// Expected margin under cover weights.
    pub fn base_value(&self) -> f64 {
        self.offset + self.scale * self.trees.iter().map(Node::expected_value).sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapMatrix {
    pub base_value: f64,
    /// n × p attributions on the margin scale.
    pub values: Matrix,
    /// The explained rows.
    pub inputs: Matrix,
    pub feature_names: Vec<String>,
}

#[derive(Clone, Copy)]
struct PathElem {
    feature: Option<usize>,
    zero: f64,
    one: f64,
    weight: f64,
}

fn extend(path: &mut Vec<PathElem>, zero: f64, one: f64, feature: Option<usize>) {
    let depth = path.len();
    path.push(PathElem {
        feature,
        zero,
        one,
        weight: if depth == 0 { 1.0 } else { 0.0 },
    });
    let d1 = (depth + 1) as f64;
    for i in (0..depth).rev() {
        path[i + 1].weight += one * path[i].weight * (i + 1) as f64 / d1;
        path[i].weight = zero * path[i].weight * (depth - i) as f64 / d1;
    }
}

fn unwind(path: &mut Vec<PathElem>, idx: usize) {
    let depth = path.len() - 1;
    let PathElem { one, zero, .. } = path[idx];
    let d1 = (depth + 1) as f64;
    let mut next = path[depth].weight;
    for i in (0..depth).rev() {
        if one != 0.0 {
            let tmp = path[i].weight;
            path[i].weight = next * d1 / ((i + 1) as f64 * one);
            next = tmp - path[i].weight * zero * (depth - i) as f64 / d1;
        } else {
            path[i].weight = path[i].weight * d1 / (zero * (depth - i) as f64);
        }
    }
    for i in idx..depth {
        path[i].feature = path[i + 1].feature;
        path[i].zero = path[i + 1].zero;
        path[i].one = path[i + 1].one;
    }
    path.pop();
}

fn unwound_sum(path: &[PathElem], idx: usize) -> f64 {
    let depth = path.len() - 1;
    let PathElem { one, zero, .. } = path[idx];
    let d1 = (depth + 1) as f64;
    let mut next = path[depth].weight;
    let mut total = 0.0;
    for i in (0..depth).rev() {
        if one != 0.0 {
            let tmp = next * d1 / ((i + 1) as f64 * one);
            total += tmp;
            next = path[i].weight - tmp * zero * (depth - i) as f64 / d1;
        } else if zero != 0.0 {
            total += path[i].weight / zero / ((depth - i) as f64 / d1);
        }
    }
    total
}

fn recurse(node: &Node, x: &[f64], phi: &mut [f64], mut path: Vec<PathElem>, zero: f64, one: f64, feature: Option<usize>) {
    extend(&mut path, zero, one, feature);
    match node {
        Node::Leaf { value, .. } => {
            for i in 1..path.len() {
                let w = unwound_sum(&path, i);
                let e = path[i];
                if let Some(f) = e.feature {
                    phi[f] += w * (e.one - e.zero) * value;
                }
            }
        }
        Node::Split {
            feature: f,
            threshold,
            left,
            right,
            cover,
            ..
        } => {
            let (hot, cold) = if x[*f] < *threshold { (left, right) } else { (right, left) };
            let (mut in_zero, mut in_one) = (1.0, 1.0);
            if let Some(k) = (1..path.len()).find(|&k| path[k].feature == Some(*f)) {
                in_zero = path[k].zero;
                in_one = path[k].one;
                unwind(&mut path, k);
            }
            let hot_zero = if *cover > 0.0 { hot.cover() / cover } else { 0.0 };
            let cold_zero = if *cover > 0.0 { cold.cover() / cover } else { 0.0 };
            recurse(hot, x, phi, path.clone(), hot_zero * in_zero, in_one, Some(*f));
            recurse(cold, x, phi, path, cold_zero * in_zero, 0.0, Some(*f));
        }
    }
}

/// Attributions of one tree's output for row `x`, added into `phi`.
pub fn tree_shap_tree(tree: &Node, x: &[f64], phi: &mut [f64]) {
    recurse(tree, x, phi, Vec::new(), 1.0, 1.0, None);
}

pub fn tree_shap_row(ens: &TreeEnsemble, x: &[f64], p: usize) -> Vec<f64> {
    let mut phi = vec![0.0; p];
    for t in &ens.trees {
        tree_shap_tree(t, x, &mut phi);
    }
    phi.iter_mut().for_each(|v| *v *= ens.scale);
    phi
}

pub fn tree_shap_matrix(ens: &TreeEnsemble, rows: &Matrix, feature_names: Vec<String>) -> ShapMatrix {
    let p = rows.cols();
    let one = |i: usize| tree_shap_row(ens, rows.row(i), p);
    #[cfg(feature = "parallel")]
    let per_row: Vec<Vec<f64>> = {
        use rayon::prelude::*;
        (0..rows.rows()).into_par_iter().map(one).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let per_row: Vec<Vec<f64>> = (0..rows.rows()).map(one).collect();
    ShapMatrix {
        base_value: ens.base_value(),
        values: Matrix::new(rows.rows(), p, per_row.concat()),
        inputs: rows.clone(),
        feature_names,
    }
}

/// TreeSHAP for a boosted or random-forest model.
pub fn tree_shap(m: &TrainedClassifier, rows: &Dataset) -> Result<ShapMatrix> {
    let ens = TreeEnsemble::from_model(m)?;
    m.check_schema(rows)?;
    Ok(tree_shap_matrix(&ens, &rows.to_matrix()?, m.features.clone()))
}

/// Value of coalition `in_set`: features outside it are integrated out by
/// cover-weighted descent.
fn coalition_value(node: &Node, x: &[f64], in_set: &[bool]) -> f64 {
    match node {
        Node::Leaf { value, .. } => *value,
        Node::Split {
            feature,
            threshold,
            left,
            right,
            cover,
            ..
        } => {
            if in_set[*feature] {
                let next = if x[*feature] < *threshold { left } else { right };
                coalition_value(next, x, in_set)
            } else if *cover > 0.0 {
                (left.cover() * coalition_value(left, x, in_set) + right.cover() * coalition_value(right, x, in_set)) / cover
            } else {
                0.0
            }
        }
    }
}

/// Shapley values by enumerating all 2^p coalitions.
pub fn exhaustive_shap_ensemble(ens: &TreeEnsemble, x: &[f64]) -> Result<Vec<f64>> {
    let p = x.len();
    if p > MAX_EXHAUSTIVE_FEATURES {
        return Err(Error::TooManyFeatures(p));
    }
    let v = |mask: usize| -> f64 {
        let in_set: Vec<bool> = (0..p).map(|j| mask >> j & 1 == 1).collect();
        ens.scale * ens.trees.iter().map(|t| coalition_value(t, x, &in_set)).sum::<f64>()
    };
    let values: Vec<f64> = (0..1usize << p).map(v).collect();
    let mut fact = vec![1.0f64; p + 1];
    for i in 1..=p {
        fact[i] = fact[i - 1] * i as f64;
    }
    let mut phi = vec![0.0; p];
    for (j, out) in phi.iter_mut().enumerate() {
        for mask in 0..1usize << p {
            if mask >> j & 1 == 1 {
                continue;
            }
            let s = mask.count_ones() as usize;
            let w = fact[s] * fact[p - s - 1] / fact[p];
            *out += w * (values[mask | 1 << j] - values[mask]);
        }
    }
    Ok(phi)
}

pub fn exhaustive_shap(m: &TrainedClassifier, row: &[f64]) -> Result<Vec<f64>> {
    let ens = TreeEnsemble::from_model(m)?;
    if row.len() != m.features.len() {
        return Err(Error::Schema(format!("row has {} values, model expects {}", row.len(), m.features.len())));
    }
    exhaustive_shap_ensemble(&ens, row)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub rank: usize,
    pub feature: String,
    pub mean_abs_shap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapPoint {
    pub row_id: usize,
    pub feature: String,
    pub shap_value: f64,
    pub feature_value: f64,
    /// Feature value standardized over the explained rows (0 for constants).
    pub standardized_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapSummary {
    pub base_value: f64,
    pub ranking: Vec<RankEntry>,
    pub points: Vec<ShapPoint>,
}

/// Mean-|SHAP| ranking (ties by column order) plus long-format triples.
pub fn shap_summary(s: &ShapMatrix) -> Result<ShapSummary> {
    let (n, p) = (s.values.rows(), s.values.cols());
    if n == 0 || p == 0 {
        return Err(Error::InvalidInput("empty SHAP matrix".into()));
    }
    let mean_abs: Vec<f64> = (0..p)
        .map(|j| (0..n).map(|i| s.values.get(i, j).abs()).sum::<f64>() / n as f64)
        .collect();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| mean_abs[b].total_cmp(&mean_abs[a]).then(a.cmp(&b)));
    let ranking = order
        .iter()
        .enumerate()
        .map(|(r, &j)| RankEntry {
            rank: r + 1,
            feature: s.feature_names[j].clone(),
            mean_abs_shap: mean_abs[j],
        })
        .collect();
    let stats: Vec<(f64, f64)> = (0..p)
        .map(|j| {
            let col = s.inputs.column(j);
            let m = col.iter().sum::<f64>() / n as f64;
            let sd = (col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n as f64).sqrt();
            (m, sd)
        })
        .collect();
    let mut points = Vec::with_capacity(n * p);
    for i in 0..n {
        for j in 0..p {
            let v = s.inputs.get(i, j);
            let (m, sd) = stats[j];
            points.push(ShapPoint {
                row_id: i,
                feature: s.feature_names[j].clone(),
                shap_value: s.values.get(i, j),
                feature_value: v,
                standardized_value: if sd > 0.0 { (v - m) / sd } else { 0.0 },
            });
        }
    }
    Ok(ShapSummary {
        base_value: s.base_value,
        ranking,
        points,
    })
}

/// `row_id,feature,shap_value,feature_value`.
pub fn write_shap_csv<W: Write>(summary: &ShapSummary, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["row_id", "feature", "shap_value", "feature_value"])?;
    for pt in &summary.points {
        w.write_record([
            pt.row_id.to_string(),
            pt.feature.clone(),
            fmt_g17(pt.shap_value),
            fmt_g17(pt.feature_value),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

/// Beeswarm-style scatter: one row per feature in rank order, points
/// colored from blue (low value) to red (high value).
pub fn shap_summary_svg(summary: &ShapSummary) -> String {
    const W: f64 = 640.0;
    const ROW: f64 = 24.0;
    const LEFT: f64 = 190.0;
    const RIGHT: f64 = 20.0;
    let rows = summary.ranking.len();
    let h = ROW * rows as f64 + 50.0;
    let max_abs = summary
        .points
        .iter()
        .map(|p| p.shap_value.abs())
        .fold(0.0f64, f64::max)
        .max(1e-12);
    let x_of = |v: f64| LEFT + (v / max_abs + 1.0) / 2.0 * (W - LEFT - RIGHT);
    let mut s = format!("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{h}\" viewBox=\"0 0 {W} {h}\">\n");
    s += &format!(
        "<line x1=\"{0:.2}\" y1=\"10\" x2=\"{0:.2}\" y2=\"{1:.2}\" stroke=\"#999\"/>\n",
        x_of(0.0),
        h - 30.0
    );
    for (r, entry) in summary.ranking.iter().enumerate() {
        let y = 20.0 + ROW * r as f64;
        s += &format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"end\">{}</text>\n",
            LEFT - 8.0,
            y + 4.0,
            entry.feature
        );
        for (k, pt) in summary.points.iter().filter(|p| p.feature == entry.feature).enumerate() {
            let t = (pt.standardized_value.clamp(-2.0, 2.0) + 2.0) / 4.0;
            let (red, blue) = ((255.0 * t) as u8, (255.0 * (1.0 - t)) as u8);
            let jitter = ((k * 7919) % 11) as f64 - 5.0;
            s += &format!(
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2\" fill=\"rgb({red},40,{blue})\" fill-opacity=\"0.7\"/>\n",
                x_of(pt.shap_value),
                y + jitter
            );
        }
    }
    s += &format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\">SHAP value (log-odds)</text>\n",
        x_of(0.0),
        h - 10.0
    );
    s += "</svg>\n";
    s
}
