//! Binary decision trees shared by the tree ensembles, plus weighted CART.

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::g17;
use crate::data::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    #[default]
    Left,
    Right,
}

/// `x[feature] < threshold` goes left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "lowercase")]
pub enum Node {
    Leaf {
        #[serde(with = "g17")]
        value: f64,
        #[serde(with = "g17")]
        cover: f64,
    },
    Split {
        feature: usize,
        #[serde(with = "g17")]
        threshold: f64,
        #[serde(with = "g17")]
        gain: f64,
        #[serde(with = "g17")]
        cover: f64,
        #[serde(default)]
        missing_goes: Direction,
        left: Box<Node>,
        right: Box<Node>,
    },
}

impl Node {
    pub fn leaf(value: f64, cover: f64) -> Node {
        Node::Leaf { value, cover }
    }

    pub fn split(feature: usize, threshold: f64, gain: f64, left: Node, right: Node) -> Node {
        let cover = left.cover() + right.cover();
        Node::Split {
            feature,
            threshold,
            gain,
            cover,
            missing_goes: Direction::Left,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    pub fn cover(&self) -> f64 {
        match self {
            Node::Leaf { cover, .. } | Node::Split { cover, .. } => *cover,
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            Node::Leaf { .. } => 1,
            Node::Split { left, right, .. } => left.leaf_count() + right.leaf_count(),
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                Node::Leaf { value, .. } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    node = if x[*feature] < *threshold { left } else { right };
                }
            }
        }
    }

    /// Adds each split's gain to `out[feature]`.
    pub fn accumulate_gain(&self, out: &mut [f64]) {
        if let Node::Split {
            feature, gain, left, right, ..
        } = self
        {
            out[*feature] += gain;
            left.accumulate_gain(out);
            right.accumulate_gain(out);
        }
    }

    pub fn visit_leaves(&self, f: &mut impl FnMut(f64, f64)) {
        match self {
            Node::Leaf { value, cover } => f(*value, *cover),
            Node::Split { left, right, .. } => {
                left.visit_leaves(f);
                right.visit_leaves(f);
            }
        }
    }

    /// Cover-weighted mean leaf value.
    pub fn expected_value(&self) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        self.visit_leaves(&mut |v, c| {
            num += v * c;
            den += c;
        });
        if den > 0.0 {
            num / den
        } else {
            0.0
        }
    }
}

/// Threshold strictly above `lo` and at most `hi`, for sorted distinct values.
pub(crate) fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid > lo && mid <= hi {
        mid
    } else {
        hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaxFeatures {
    Sqrt,
    All,
}

impl MaxFeatures {
    pub fn count(self, p: usize) -> usize {
        match self {
            MaxFeatures::All => p,
            MaxFeatures::Sqrt => ((p as f64).sqrt().floor() as usize).clamp(1, p.max(1)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartParams {
    pub max_depth: usize,
    pub max_features: MaxFeatures,
    pub min_samples_split: usize,
}

fn gini(pos: f64, total: f64) -> f64 {
    if total <= 0.0 {
        return 0.0;
    }
    let p = pos / total;
    2.0 * p * (1.0 - p)
}

struct CartCtx<'a> {
    x: &'a Matrix,
    y: &'a [u8],
    w: &'a [f64],
    params: CartParams,
}

/// Weighted CART with Gini impurity. Rows with zero weight are ignored.
/// Leaves hold the weighted positive fraction; covers are weight sums.
pub fn fit_cart(x: &Matrix, y: &[u8], w: &[f64], params: CartParams, rng: &mut crate::seed::Rng) -> Node {
    let rows: Vec<usize> = (0..x.rows()).filter(|&i| w[i] > 0.0).collect();
    let ctx = CartCtx { x, y, w, params };
    grow_cart(&ctx, rows, 0, rng)
}

fn grow_cart(ctx: &CartCtx, rows: Vec<usize>, depth: usize, rng: &mut crate::seed::Rng) -> Node {
    let total: f64 = rows.iter().map(|&i| ctx.w[i]).sum();
    let pos: f64 = rows.iter().filter(|&&i| ctx.y[i] == 1).map(|&i| ctx.w[i]).sum();
    let value = if total > 0.0 { pos / total } else { 0.0 };
    let leaf = Node::leaf(value, total);
    if depth >= ctx.params.max_depth || rows.len() < ctx.params.min_samples_split.max(2) || pos == 0.0 || pos == total {
        return leaf;
    }
    let p = ctx.x.cols();
    let m = ctx.params.max_features.count(p);
    let mut features: Vec<usize> = if m >= p {
        (0..p).collect()
    } else {
        sample(rng, p, m).into_vec()
    };
    features.sort_unstable();

    let parent = total * gini(pos, total);
    let mut best: Option<(f64, usize, f64)> = None;
    let mut order = rows.clone();
    for &f in &features {
        order.sort_by(|&a, &b| ctx.x.get(a, f).total_cmp(&ctx.x.get(b, f)));
        let (mut wl, mut pl) = (0.0, 0.0);
        for k in 0..order.len() - 1 {
            let i = order[k];
            wl += ctx.w[i];
            if ctx.y[i] == 1 {
                pl += ctx.w[i];
            }
            let (a, b) = (ctx.x.get(i, f), ctx.x.get(order[k + 1], f));
            if a == b {
                continue;
            }
            let (wr, pr) = (total - wl, pos - pl);
            let gain = parent - wl * gini(pl, wl) - wr * gini(pr, wr);
            if gain > 1e-12 && best.is_none_or(|(g, _, _)| gain > g) {
                best = Some((gain, f, midpoint(a, b)));
            }
        }
    }
    let Some((gain, f, threshold)) = best else {
        return leaf;
    };
    let (l, r): (Vec<usize>, Vec<usize>) = rows.into_iter().partition(|&i| ctx.x.get(i, f) < threshold);
    let left = grow_cart(ctx, l, depth + 1, rng);
    let right = grow_cart(ctx, r, depth + 1, rng);
    Node::split(f, threshold, gain, left, right)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::Seed;

    #[test]
    fn midpoint_stays_between() {
        assert_eq!(midpoint(1.0, 2.0), 1.5);
        let a = 1.0f64;
        let b = f64::from_bits(a.to_bits() + 1);
        let m = midpoint(a, b);
        assert!(a < m && m <= b);
    }

    #[test]
    fn cart_separates_a_threshold() {
        let x = Matrix::from_rows(&(0..10).map(|i| vec![i as f64, 0.0]).collect::<Vec<_>>());
        let y: Vec<u8> = (0..10).map(|i| u8::from(i >= 6)).collect();
        let params = CartParams {
            max_depth: 3,
            max_features: MaxFeatures::All,
            min_samples_split: 2,
        };
        let t = fit_cart(&x, &y, &[1.0; 10], params, &mut Seed(0).rng());
        assert_eq!(t.depth(), 1);
        assert_eq!(t.predict(&[5.0, 0.0]), 0.0);
        assert_eq!(t.predict(&[6.0, 0.0]), 1.0);
        assert_eq!(t.cover(), 10.0);
        let mut g = [0.0; 2];
        t.accumulate_gain(&mut g);
        assert!(g[0] > 0.0 && g[1] == 0.0);
    }

    #[test]
    fn node_json_uses_strings() {
        let t = Node::split(0, 0.5, 1.0, Node::leaf(-1.0, 2.0), Node::leaf(1.0, 3.0));
        let s = serde_json::to_string(&t).unwrap();
        assert!(s.contains("\"threshold\":\"0.5\""));
        let back: Node = serde_json::from_str(&s).unwrap();
        assert_eq!(back, t);
        assert_eq!(t.expected_value(), 0.2);
    }
}
