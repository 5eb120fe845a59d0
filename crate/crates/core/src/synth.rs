//! Seeded synthetic cohorts calibrated to published marginal statistics.

use std::collections::BTreeMap;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{Cell, Dataset, FeatureSpec, SplitIndices};
use crate::error::{Error, Result};
use crate::pipeline::stratified_split;
use crate::seed::Seed;

const MAX_TRUNCATION_DRAWS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FeatureStat {
    Continuous {
        name: String,
        mean: f64,
        std: f64,
        #[serde(default, skip_serializing_if = "String::is_empty")]
        units: String,
        /// Lower bound enforced by resampling; defaults to 0.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        floor: Option<f64>,
    },
    Binary {
        name: String,
        rate: f64,
    },
}

impl FeatureStat {
    pub fn name(&self) -> &str {
        match self {
            FeatureStat::Continuous { name, .. } | FeatureStat::Binary { name, .. } => name,
        }
    }

    pub fn spec(&self) -> FeatureSpec {
        match self {
            FeatureStat::Continuous { name, units, .. } => FeatureSpec::numeric(name.clone(), units.clone()),
            FeatureStat::Binary { name, .. } => FeatureSpec::binary(name.clone()),
        }
    }

    /// Target mean and standard deviation used to standardize the column.
    fn moments(&self) -> (f64, f64) {
        match *self {
            FeatureStat::Continuous { mean, std, .. } => (mean, std),
            FeatureStat::Binary { rate, .. } => (rate, (rate * (1.0 - rate)).sqrt()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CohortStatistics {
    pub features: Vec<FeatureStat>,
    pub n_train: usize,
    pub n_test: usize,
    pub prevalence: f64,
}

impl CohortStatistics {
    pub fn n(&self) -> usize {
        self.n_train + self.n_test
    }

    pub fn specs(&self) -> Vec<FeatureSpec> {
        self.features.iter().map(FeatureStat::spec).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_train == 0 || self.n_test == 0 {
            return Err(Error::InvalidInput("n_train and n_test must be positive".into()));
        }
        if !(self.prevalence > 0.0 && self.prevalence < 1.0) {
            return Err(Error::InvalidInput(format!(
                "prevalence {} is outside (0, 1)",
                self.prevalence
            )));
        }
        if self.features.is_empty() {
            return Err(Error::InvalidInput("no features".into()));
        }
        for f in &self.features {
            match *f {
                FeatureStat::Continuous { ref name, mean, std, floor, .. } => {
                    if !mean.is_finite() || !(std >= 0.0) || std.is_infinite() {
                        return Err(Error::InvalidInput(format!("`{name}`: bad mean/std")));
                    }
                    if floor.is_some_and(|fl| !fl.is_finite()) {
                        return Err(Error::InvalidInput(format!("`{name}`: bad floor")));
                    }
                }
                FeatureStat::Binary { ref name, rate } => {
                    if !(0.0..=1.0).contains(&rate) {
                        return Err(Error::InvalidInput(format!("`{name}`: rate outside [0, 1]")));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalSpec {
    /// Log-odds per standardized unit.
    pub coefficients: BTreeMap<String, f64>,
    #[serde(default)]
    pub intercept: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCohort {
    pub dataset: Dataset,
    pub split: SplitIndices,
    /// Intercept after adjustment to the target positive count.
    pub intercept: f64,
}

fn draw_continuous(rng: &mut crate::seed::Rng, mean: f64, std: f64, floor: f64, n: usize) -> Vec<f64> {
    if std == 0.0 {
        return vec![mean.max(floor); n];
    }
    let normal = Normal::new(mean, std).expect("std checked finite and positive");
    (0..n)
        .map(|_| {
            let mut v = normal.sample(rng);
            let mut draws = 1;
            while v < floor && draws < MAX_TRUNCATION_DRAWS {
                v = normal.sample(rng);
                draws += 1;
            }
            v.max(floor)
        })
        .collect()
}

fn sigmoid_logit(u: f64) -> f64 {
    (u / (1.0 - u)).ln()
}

/// Smallest-first intercept search: finds `b` such that exactly `target`
/// thresholds lie strictly below it.
fn fit_intercept(thresholds: &[f64], target: usize, start: f64) -> f64 {
    let count = |b: f64| thresholds.iter().filter(|&&t| t < b).count();
    let (mut lo, mut hi) = (start, start);
    let mut step = 1.0;
    while count(lo) > target {
        lo -= step;
        step *= 2.0;
    }
    step = 1.0;
    while count(hi) < target {
        hi += step;
        step *= 2.0;
    }
    for _ in 0..200 {
        let c = count(lo);
        if c == target {
            return lo;
        }
        let c = count(hi);
        if c == target {
            return hi;
        }
        let mid = 0.5 * (lo + hi);
        if count(mid) > target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mut sorted = thresholds.to_vec();
    sorted.sort_by(f64::total_cmp);
    match target {
        0 => sorted[0] - 1.0,
        t if t >= sorted.len() => sorted[sorted.len() - 1] + 1.0,
        t => 0.5 * (sorted[t - 1] + sorted[t]),
    }
}

/// Draws a labeled cohort whose marginals follow `stats` and whose labels
/// follow a logistic link on the standardized features.
pub fn generate_cohort(stats: &CohortStatistics, signal: &SignalSpec, seed: Seed) -> Result<SyntheticCohort> {
    stats.validate()?;
    for name in signal.coefficients.keys() {
        if !stats.features.iter().any(|f| f.name() == name) {
            return Err(Error::UnknownFeature(name.clone()));
        }
    }
    let n = stats.n();
    let mut rng = seed.derive(0).rng();
    let mut columns = Vec::with_capacity(stats.features.len());
    let mut score = vec![0.0; n];
    for f in &stats.features {
        let values = match *f {
            FeatureStat::Continuous { mean, std, floor, .. } => {
                draw_continuous(&mut rng, mean, std, floor.unwrap_or(0.0), n)
            }
            FeatureStat::Binary { rate, .. } => (0..n)
                .map(|_| if rng.gen::<f64>() < rate { 1.0 } else { 0.0 })
                .collect(),
        };
        if let Some(&coef) = signal.coefficients.get(f.name()) {
            let (mean, std) = f.moments();
            if std > 0.0 {
                for (s, v) in score.iter_mut().zip(&values) {
                    *s += coef * (v - mean) / std;
                }
            }
        }
        columns.push(values.into_iter().map(Cell::Value).collect());
    }

    // y = 1  <=>  u < sigmoid(b + s)  <=>  b > logit(u) - s
    let mut label_rng = seed.derive(1).rng();
    let thresholds: Vec<f64> = score
        .iter()
        .map(|s| {
            let u: f64 = label_rng.gen_range(f64::EPSILON..1.0);
            sigmoid_logit(u) - s
        })
        .collect();
    let target = (stats.prevalence * n as f64).round() as usize;
    let intercept = fit_intercept(&thresholds, target, signal.intercept);
    let labels: Vec<u8> = thresholds.iter().map(|&t| u8::from(t < intercept)).collect();

    let dataset = Dataset::new(stats.specs(), columns, Some(labels))?;
    let fraction = stats.n_train as f64 / n as f64;
    let split = stratified_split(dataset.require_labels()?, fraction, seed.derive(2))?;
    if split.train.len() != stats.n_train {
        return Err(Error::InvalidInput(format!(
            "split produced {} training rows, expected {}",
            split.train.len(),
            stats.n_train
        )));
    }
    Ok(SyntheticCohort { dataset, split, intercept })
}

/// Fixtures shipped with the crate.
pub mod bundled {
    use super::{CohortStatistics, SignalSpec};

    pub const TABLE2_STATS_JSON: &str = include_str!("../data/table2_stats.json");
    pub const DEFAULT_SIGNAL_JSON: &str = include_str!("../data/default_signal.json");
    pub const ALL_SIGNAL_JSON: &str = include_str!("../data/all_signal.json");
    pub const DEFAULT_GRID_JSON: &str = include_str!("../data/default_grid.json");

    pub fn table2_stats() -> CohortStatistics {
        serde_json::from_str(TABLE2_STATS_JSON).expect("bundled stats parse")
    }

    /// Signal on ICU stay, tracheostomy and blood urea nitrogen only.
    pub fn default_signal() -> SignalSpec {
        serde_json::from_str(DEFAULT_SIGNAL_JSON).expect("bundled signal parses")
    }

    /// Nonzero weight on every feature.
    pub fn all_signal() -> SignalSpec {
        serde_json::from_str(ALL_SIGNAL_JSON).expect("bundled signal parses")
    }

    /// Table 2 marginals at 1400/600 rows: enough that every feature's
    /// contribution to CV AUC stands clear of fold noise.
    pub fn ablation_stats() -> CohortStatistics {
        CohortStatistics {
            n_train: 1400,
            n_test: 600,
            ..table2_stats()
        }
    }

    /// Column whose weight is zeroed in [`noise_signal`].
    pub const NOISE_FEATURE: &str = "platelet";

    /// `all_signal` with [`NOISE_FEATURE`] carrying no label information.
    pub fn noise_signal() -> SignalSpec {
        let mut s = all_signal();
        s.coefficients.insert(NOISE_FEATURE.into(), 0.0);
        s
    }
}
