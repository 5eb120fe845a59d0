use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn class_counts(scores: &[f64], labels: &[u8]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidInput(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidInput("NaN score".into()));
    }
    let pos = labels.iter().filter(|&&y| y == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    Ok((pos, neg))
}

/// Area under the ROC curve from the Mann–Whitney rank statistic, with
/// midranks for tied scores (a tied positive/negative pair counts one half).
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let (pos, neg) = class_counts(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 share their mean
        let midrank = (i + j + 2) as f64 / 2.0;
        let pos_in_group = order[i..=j].iter().filter(|&&k| labels[k] == 1).count();
        rank_sum_pos += midrank * pos_in_group as f64;
        i = j + 1;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum_pos - p * (p + 1.0) / 2.0) / (p * n))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    /// Scores `>= threshold` are called positive. The first point uses +∞.
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// One ROC point per distinct score, from (0, 0) to (1, 1).
pub fn roc_points(scores: &[f64], labels: &[u8]) -> Result<Vec<RocPoint>> {
    let (pos, neg) = class_counts(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            threshold: s,
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
        });
    }
    Ok(points)
}

/// Trapezoidal area under a point list.
pub fn trapezoid_area(points: &[RocPoint]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perfect_and_tied() {
        assert_eq!(roc_auc(&[0.1, 0.2, 0.8, 0.9], &[0, 0, 1, 1]).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.5; 6], &[0, 1, 0, 1, 1, 0]).unwrap(), 0.5);
        assert!(matches!(roc_auc(&[0.1, 0.2], &[1, 1]), Err(Error::SingleClass)));
    }

    #[test]
    fn roc_point_shapes() {
        let pts = roc_points(&[0.1, 0.2, 0.8, 0.9], &[0, 0, 1, 1]).unwrap();
        assert!(pts.iter().any(|p| p.fpr == 0.0 && p.tpr == 1.0));
        assert_eq!(pts.last().map(|p| (p.fpr, p.tpr)), Some((1.0, 1.0)));
        let pts = roc_points(&[0.3; 5], &[0, 1, 0, 1, 1]).unwrap();
        assert_eq!(pts.len(), 2);
        assert_eq!((pts[0].fpr, pts[0].tpr), (0.0, 0.0));
        assert_eq!((pts[1].fpr, pts[1].tpr), (1.0, 1.0));
    }

    fn scored() -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
        proptest::collection::vec((0u8..20, 0u8..2), 2..80)
            .prop_filter("both classes", |v| {
                v.iter().any(|x| x.1 == 0) && v.iter().any(|x| x.1 == 1)
            })
            .prop_map(|v| v.into_iter().map(|(s, y)| (s as f64 / 7.0, y)).unzip())
    }

    proptest! {
        #[test]
        fn auc_complement_and_monotone_invariance((s, y) in scored()) {
            let a = roc_auc(&s, &y).unwrap();
            let neg: Vec<f64> = s.iter().map(|v| -v).collect();
            // ties credit 1/2 in both directions, so the identity holds with ties too
            prop_assert!((a + roc_auc(&neg, &y).unwrap() - 1.0).abs() < 1e-12);
            let warped: Vec<f64> = s.iter().map(|v| (3.0 * v).exp() + 1.0).collect();
            prop_assert_eq!(roc_auc(&warped, &y).unwrap(), a);
            let pts = roc_points(&s, &y).unwrap();
            prop_assert!(pts.windows(2).all(|w| w[1].fpr >= w[0].fpr && w[1].tpr >= w[0].tpr));
            prop_assert!((trapezoid_area(&pts) - a).abs() < 1e-12);
        }
    }
}
