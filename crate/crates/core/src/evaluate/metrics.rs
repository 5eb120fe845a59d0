//! Threshold metrics with percentile-bootstrap confidence intervals.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::roc::roc_auc;
use crate::error::{Error, Result};
use crate::seed::Seed;

pub const DEFAULT_THRESHOLD: f64 = 0.5;
pub const DEFAULT_BOOTSTRAP_REPLICATES: usize = 2000;
const CI_LEVEL: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl Confusion {
    /// Scores `>= threshold` are called positive.
    pub fn at_threshold(scores: &[f64], labels: &[u8], threshold: f64) -> Self {
        let mut c = Confusion::default();
        for (&s, &y) in scores.iter().zip(labels) {
            match (s >= threshold, y == 1) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn n(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn sensitivity(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn specificity(&self) -> Option<f64> {
        ratio(self.tn, self.tn + self.fp)
    }

    pub fn ppv(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn npv(&self) -> Option<f64> {
        ratio(self.tn, self.tn + self.fn_)
    }

    pub fn accuracy(&self) -> Option<f64> {
        ratio(self.tp + self.tn, self.n())
    }

    /// Harmonic mean of PPV and sensitivity, written as 2TP / (2TP + FP + FN).
    pub fn f1(&self) -> Option<f64> {
        ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn_)
    }
}

/// Point estimate and 95% interval. `None` marks an undefined metric
/// (for example PPV with no predicted positives).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricEstimate {
    pub point: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
}

impl MetricEstimate {
    /// "0.940 (0.935–0.954)", or "undefined".
    pub fn render(&self) -> String {
        match (self.point, self.ci_low, self.ci_high) {
            (Some(p), Some(lo), Some(hi)) => format!("{p:.3} ({lo:.3}–{hi:.3})"),
            (Some(p), _, _) => format!("{p:.3}"),
            _ => "undefined".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub auc: MetricEstimate,
    pub accuracy: MetricEstimate,
    pub f1: MetricEstimate,
    pub sensitivity: MetricEstimate,
    pub specificity: MetricEstimate,
    pub ppv: MetricEstimate,
    pub npv: MetricEstimate,
}

pub const METRIC_NAMES: [&str; 7] = [
    "auc",
    "accuracy",
    "f1",
    "sensitivity",
    "specificity",
    "ppv",
    "npv",
];

impl Metrics {
    pub fn get(&self, name: &str) -> Option<&MetricEstimate> {
        Some(match name {
            "auc" => &self.auc,
            "accuracy" => &self.accuracy,
            "f1" => &self.f1,
            "sensitivity" => &self.sensitivity,
            "specificity" => &self.specificity,
            "ppv" => &self.ppv,
            "npv" => &self.npv,
            _ => return None,
        })
    }

    fn from_array(m: [MetricEstimate; 7]) -> Self {
        let [auc, accuracy, f1, sensitivity, specificity, ppv, npv] = m;
        Metrics {
            auc,
            accuracy,
            f1,
            sensitivity,
            specificity,
            ppv,
            npv,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub seed: Seed,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            replicates: DEFAULT_BOOTSTRAP_REPLICATES,
            seed: Seed(0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metrics: Metrics,
    pub confusion: Confusion,
    pub threshold: f64,
    pub n: usize,
    pub bootstrap_replicates: usize,
}

impl MetricReport {
    /// One table row: name followed by the seven rendered metrics.
    pub fn table_row(&self, model: &str) -> String {
        let cells: Vec<String> = METRIC_NAMES
            .iter()
            .map(|m| self.metrics.get(m).expect("known metric").render())
            .collect();
        format!("{model} | {}", cells.join(" | "))
    }
}

fn all_metrics(scores: &[f64], labels: &[u8], threshold: f64) -> [Option<f64>; 7] {
    let c = Confusion::at_threshold(scores, labels, threshold);
    [
        roc_auc(scores, labels).ok(),
        c.accuracy(),
        c.f1(),
        c.sensitivity(),
        c.specificity(),
        c.ppv(),
        c.npv(),
    ]
}

/// Linear-interpolated quantile of sorted values.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

const RESAMPLE_TRIES: usize = 10;

/// One bootstrap replicate from its own stream; `None` when no two-class
/// resample turned up within the retry budget.
fn replicate(scores: &[f64], labels: &[u8], threshold: f64, seed: Seed) -> Option<[Option<f64>; 7]> {
    let n = scores.len();
    let mut rng = seed.rng();
    let mut s = vec![0.0; n];
    let mut y = vec![0u8; n];
    for _ in 0..RESAMPLE_TRIES {
        for k in 0..n {
            let i = rng.gen_range(0..n);
            s[k] = scores[i];
            y[k] = labels[i];
        }
        let pos = y.iter().filter(|&&v| v == 1).count();
        if pos > 0 && pos < n {
            return Some(all_metrics(&s, &y, threshold));
        }
    }
    None
}

#[cfg(feature = "parallel")]
fn replicates(scores: &[f64], labels: &[u8], threshold: f64, seed: Seed, range: std::ops::Range<usize>) -> Vec<Option<[Option<f64>; 7]>> {
    use rayon::prelude::*;
    range
        .into_par_iter()
        .map(|r| replicate(scores, labels, threshold, seed.derive(r as u64)))
        .collect()
}

#[cfg(not(feature = "parallel"))]
fn replicates(scores: &[f64], labels: &[u8], threshold: f64, seed: Seed, range: std::ops::Range<usize>) -> Vec<Option<[Option<f64>; 7]>> {
    range
        .map(|r| replicate(scores, labels, threshold, seed.derive(r as u64)))
        .collect()
}

/// The seven-metric suite at `threshold`, each with a percentile-bootstrap
/// interval over `boot.replicates` row resamples. Resamples missing a class
/// are redrawn; metrics with an empty denominator in a resample are skipped
/// for that resample and topped up from further replicates, up to
/// 10·B replicates in total.
pub fn metric_report(scores: &[f64], labels: &[u8], threshold: f64, boot: BootstrapConfig) -> Result<MetricReport> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidInput(format!("threshold {threshold} outside (0, 1)")));
    }
    roc_auc(scores, labels)?;
    let point = all_metrics(scores, labels, threshold);
    let b = boot.replicates;

    let mut samples: Vec<Vec<f64>> = vec![Vec::with_capacity(b); 7];
    let absorb = |reps: Vec<Option<[Option<f64>; 7]>>, samples: &mut Vec<Vec<f64>>| {
        for rep in reps.into_iter().flatten() {
            for (m, v) in rep.into_iter().enumerate() {
                if let Some(v) = v {
                    if samples[m].len() < b {
                        samples[m].push(v);
                    }
                }
            }
        }
    };
    absorb(replicates(scores, labels, threshold, boot.seed, 0..b), &mut samples);
    let short = |samples: &Vec<Vec<f64>>| {
        (0..7).any(|m| point[m].is_some() && samples[m].len() < b)
    };
    let mut next = b;
    while short(&samples) && next < 10 * b {
        let end = (next + b).min(10 * b);
        absorb(replicates(scores, labels, threshold, boot.seed, next..end), &mut samples);
        next = end;
    }

    let alpha = (1.0 - CI_LEVEL) / 2.0;
    let mut estimates = [MetricEstimate {
        point: None,
        ci_low: None,
        ci_high: None,
    }; 7];
    for m in 0..7 {
        let Some(p) = point[m] else { continue };
        estimates[m].point = Some(p);
        let vals = &mut samples[m];
        if vals.is_empty() {
            continue;
        }
        vals.sort_by(f64::total_cmp);
        // percentile interval, widened if needed so it always brackets the point
        estimates[m].ci_low = Some(quantile(vals, alpha).min(p));
        estimates[m].ci_high = Some(quantile(vals, 1.0 - alpha).max(p));
    }
    Ok(MetricReport {
        metrics: Metrics::from_array(estimates),
        confusion: Confusion::at_threshold(scores, labels, threshold),
        threshold,
        n: scores.len(),
        bootstrap_replicates: b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn hand_counted_confusion() {
        // TP=2, FP=1, FN=1, TN=6
        let c = Confusion { tp: 2, fp: 1, tn: 6, fn_: 1 };
        assert_abs_diff_eq!(c.sensitivity().unwrap(), 2.0 / 3.0);
        assert_abs_diff_eq!(c.specificity().unwrap(), 6.0 / 7.0);
        assert_abs_diff_eq!(c.ppv().unwrap(), 2.0 / 3.0);
        assert_abs_diff_eq!(c.npv().unwrap(), 6.0 / 7.0);
        assert_abs_diff_eq!(c.accuracy().unwrap(), 0.8);
        assert_abs_diff_eq!(c.f1().unwrap(), 2.0 / 3.0);
        let (ppv, sens) = (c.ppv().unwrap(), c.sensitivity().unwrap());
        assert_abs_diff_eq!(c.f1().unwrap(), 2.0 * ppv * sens / (ppv + sens), epsilon = 1e-15);
    }

    #[test]
    fn confusion_from_scores() {
        let scores = [0.9, 0.8, 0.7, 0.2, 0.1, 0.1, 0.1, 0.1, 0.1, 0.3];
        let labels = [1, 1, 0, 1, 0, 0, 0, 0, 0, 0];
        let c = Confusion::at_threshold(&scores, &labels, 0.5);
        assert_eq!(c, Confusion { tp: 2, fp: 1, tn: 6, fn_: 1 });
    }

    #[test]
    fn perfect_predictions() {
        let scores = [0.9, 0.8, 0.7, 0.2, 0.1, 0.3];
        let labels = [1, 1, 1, 0, 0, 0];
        let r = metric_report(&scores, &labels, 0.5, BootstrapConfig { replicates: 300, seed: Seed(1) }).unwrap();
        for name in METRIC_NAMES {
            let m = r.metrics.get(name).unwrap();
            assert_eq!(m.point, Some(1.0), "{name}");
            assert_eq!(m.ci_low, Some(1.0), "{name}");
            assert_eq!(m.ci_high, Some(1.0), "{name}");
        }
    }

    #[test]
    fn undefined_ppv_is_explicit() {
        let scores = [0.1, 0.2, 0.3, 0.4];
        let labels = [0, 1, 0, 1];
        let r = metric_report(&scores, &labels, 0.5, BootstrapConfig { replicates: 50, seed: Seed(1) }).unwrap();
        assert_eq!(r.metrics.ppv.point, None);
        assert_eq!(r.metrics.ppv.render(), "undefined");
        assert_eq!(r.metrics.sensitivity.point, Some(0.0));
        let json = serde_json::to_value(&r).unwrap();
        assert!(json["metrics"]["ppv"]["point"].is_null());
    }

    #[test]
    fn row_rendering_shape() {
        let e = MetricEstimate { point: Some(0.94), ci_low: Some(0.935), ci_high: Some(0.954) };
        assert_eq!(e.render(), "0.940 (0.935–0.954)");
    }

    #[test]
    fn ci_brackets_point_and_is_deterministic() {
        let scores: Vec<f64> = (0..60).map(|i| ((i * 37) % 61) as f64 / 61.0).collect();
        let labels: Vec<u8> = (0..60).map(|i| u8::from((i * 37) % 61 > 25 || i % 7 == 0)).collect();
        let boot = BootstrapConfig { replicates: 400, seed: Seed(9) };
        let a = metric_report(&scores, &labels, 0.5, boot).unwrap();
        let b = metric_report(&scores, &labels, 0.5, boot).unwrap();
        assert_eq!(a, b);
        for name in METRIC_NAMES {
            let m = a.metrics.get(name).unwrap();
            let p = m.point.unwrap();
            assert!(m.ci_low.unwrap() <= p && p <= m.ci_high.unwrap(), "{name}");
            assert!(m.ci_low.unwrap() >= 0.0 && m.ci_high.unwrap() <= 1.0);
        }
    }

    #[test]
    fn threshold_domain() {
        assert!(metric_report(&[0.1, 0.9], &[0, 1], 1.0, BootstrapConfig::default()).is_err());
    }
}
