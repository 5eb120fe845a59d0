//! Imputation, one-hot encoding, scaling, correlation pruning and
//! importance-based feature selection.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::{Cell, Dataset, FeatureKind, FeatureSpec};
use crate::error::{Error, Result};
use crate::learners::{self, GbtParams, LearnerSpec};
use crate::seed::Seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalingMode {
    MinMax,
    Standard,
    #[default]
    None,
}

impl std::str::FromStr for ScalingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "minmax" => Ok(ScalingMode::MinMax),
            "standard" => Ok(ScalingMode::Standard),
            "none" => Ok(ScalingMode::None),
            other => Err(Error::InvalidInput(format!("unknown scaling mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Scaler {
    MinMax { min: f64, max: f64 },
    Standard { mean: f64, std: f64, constant: bool },
}

impl Scaler {
    fn fit(mode: ScalingMode, values: &[f64]) -> Option<Scaler> {
        let n = values.len() as f64;
        match mode {
            ScalingMode::None => None,
            ScalingMode::MinMax => {
                let min = values.iter().copied().fold(f64::INFINITY, f64::min);
                let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                Some(Scaler::MinMax { min, max })
            }
            ScalingMode::Standard => {
                let mean = values.iter().sum::<f64>() / n;
                let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                let std = var.sqrt();
                Some(Scaler::Standard {
                    mean,
                    std,
                    constant: std == 0.0,
                })
            }
        }
    }

    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            Scaler::MinMax { min, max } if max > min => (x - min) / (max - min),
            Scaler::MinMax { min, .. } => x - min,
            Scaler::Standard { mean, constant: true, .. } => x - mean,
            Scaler::Standard { mean, std, .. } => (x - mean) / std,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Imputation {
    Median { value: f64 },
    Mode { value: f64 },
    ModeLevel { level: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnState {
    pub spec: FeatureSpec,
    pub imputation: Imputation,
    /// Absent for one-hot columns and when scaling is off.
    pub scaler: Option<Scaler>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessorState {
    pub columns: Vec<ColumnState>,
    pub scaling_mode: ScalingMode,
    pub fitted_on: usize,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Most frequent key; ties go to the key seen first.
fn most_frequent<K: PartialEq + Copy>(values: impl Iterator<Item = K>) -> Option<K> {
    let mut counts: Vec<(K, usize)> = Vec::new();
    for v in values {
        match counts.iter_mut().find(|(k, _)| *k == v) {
            Some(e) => e.1 += 1,
            None => counts.push((v, 1)),
        }
    }
    let best = counts.iter().map(|e| e.1).max()?;
    counts.into_iter().find(|e| e.1 == best).map(|e| e.0)
}

/// Learns imputation values and scaler parameters from `train` only.
pub fn fit_preprocessor(train: &Dataset, mode: ScalingMode) -> Result<PreprocessorState> {
    if train.n_rows() == 0 {
        return Err(Error::InvalidInput("cannot fit on an empty dataset".into()));
    }
    if train.is_scaled() && mode != ScalingMode::None {
        return Err(Error::InvalidInput("dataset is already scaled".into()));
    }
    let mut columns = Vec::with_capacity(train.n_features());
    for (j, spec) in train.specs().iter().enumerate() {
        let col = train.column(j);
        let state = match &spec.kind {
            FeatureKind::Categorical { .. } => {
                let level = most_frequent(col.iter().filter_map(|c| match c {
                    Cell::Level(l) => Some(*l),
                    _ => None,
                }))
                .ok_or_else(|| Error::AllMissing(spec.name.clone()))?;
                ColumnState {
                    spec: spec.clone(),
                    imputation: Imputation::ModeLevel { level },
                    scaler: None,
                }
            }
            kind => {
                let mut observed: Vec<f64> = col.iter().filter_map(|c| c.value()).collect();
                if observed.is_empty() {
                    return Err(Error::AllMissing(spec.name.clone()));
                }
                let imputation = if *kind == FeatureKind::Binary {
                    Imputation::Mode {
                        value: most_frequent(observed.iter().map(|v| v.to_bits())).map(f64::from_bits).unwrap_or(0.0),
                    }
                } else {
                    Imputation::Median {
                        value: median(&mut observed),
                    }
                };
                let fill = match imputation {
                    Imputation::Median { value } | Imputation::Mode { value } => value,
                    Imputation::ModeLevel { .. } => unreachable!(),
                };
                let imputed: Vec<f64> = col.iter().map(|c| c.value().unwrap_or(fill)).collect();
                ColumnState {
                    spec: spec.clone(),
                    imputation,
                    scaler: Scaler::fit(mode, &imputed),
                }
            }
        };
        columns.push(state);
    }
    Ok(PreprocessorState {
        columns,
        scaling_mode: mode,
        fitted_on: train.n_rows(),
    })
}

/// Name of the one-hot column for `level` of `feature`.
pub fn one_hot_name(feature: &str, level: &str) -> String {
    format!("{feature}={level}")
}

/// Imputes, expands categoricals one-hot and scales. The output is fully
/// numeric and every column is declared numeric.
pub fn apply_preprocessor(state: &PreprocessorState, d: &Dataset) -> Result<Dataset> {
    let fit_specs: Vec<&FeatureSpec> = state.columns.iter().map(|c| &c.spec).collect();
    let d_specs: Vec<&FeatureSpec> = d.specs().iter().collect();
    if fit_specs != d_specs {
        return Err(Error::Schema("dataset schema differs from the fitted schema".into()));
    }
    if d.is_scaled() && state.scaling_mode != ScalingMode::None {
        return Err(Error::InvalidInput("dataset is already scaled".into()));
    }
    let mut specs = Vec::new();
    let mut columns = Vec::new();
    for (j, cs) in state.columns.iter().enumerate() {
        let col = d.column(j);
        match (&cs.spec.kind, &cs.imputation) {
            (FeatureKind::Categorical { levels }, Imputation::ModeLevel { level }) => {
                for (l, name) in levels.iter().enumerate() {
                    specs.push(FeatureSpec::numeric(one_hot_name(&cs.spec.name, name), ""));
                    columns.push(
                        col.iter()
                            .map(|c| {
                                let got = match c {
                                    Cell::Level(x) => *x,
                                    _ => *level,
                                };
                                Cell::Value(if got == l { 1.0 } else { 0.0 })
                            })
                            .collect(),
                    );
                }
                if let Some(bad) = col.iter().find_map(|c| match c {
                    Cell::Level(x) if *x >= levels.len() => Some(*x),
                    _ => None,
                }) {
                    return Err(Error::UnseenLevel {
                        feature: cs.spec.name.clone(),
                        level: bad.to_string(),
                    });
                }
            }
            (_, Imputation::Median { value: fill } | Imputation::Mode { value: fill }) => {
                specs.push(FeatureSpec::numeric(cs.spec.name.clone(), cs.spec.units.clone()));
                columns.push(
                    col.iter()
                        .map(|c| {
                            let v = c.value().unwrap_or(*fill);
                            Cell::Value(cs.scaler.map_or(v, |s| s.apply(v)))
                        })
                        .collect(),
                );
            }
            _ => return Err(Error::Schema(format!("state for `{}` is inconsistent", cs.spec.name))),
        }
    }
    let out = Dataset::with_provenance(specs, columns, d.labels().map(<[u8]>::to_vec), d.provenance().to_vec())?;
    Ok(out.mark_scaled(d.is_scaled() || state.scaling_mode != ScalingMode::None))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedPair {
    pub kept: String,
    pub dropped: String,
    pub abs_r: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub dropped_correlated: Vec<DroppedPair>,
    pub importance: BTreeMap<String, f64>,
    pub selected: Vec<String>,
}

/// Pearson r; 0 when either column is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    (sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0)
}

/// Greedy scan in column order: for every surviving pair with
/// |r| >= threshold the later column is dropped.
pub fn prune_correlated(d: &Dataset, threshold: f64) -> Result<(Dataset, SelectionReport)> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidInput(format!("threshold {threshold} is outside (0, 1]")));
    }
    let m = d.to_matrix()?;
    let cols: Vec<Vec<f64>> = (0..m.cols()).map(|j| m.column(j)).collect();
    let names = d.feature_names();
    let mut dropped = vec![false; cols.len()];
    let mut report = SelectionReport::default();
    for j in 0..cols.len() {
        if dropped[j] {
            continue;
        }
        for k in j + 1..cols.len() {
            if dropped[k] {
                continue;
            }
            let r = pearson(&cols[j], &cols[k]).abs();
            if r >= threshold {
                dropped[k] = true;
                report.dropped_correlated.push(DroppedPair {
                    kept: names[j].clone(),
                    dropped: names[k].clone(),
                    abs_r: r,
                });
            }
        }
    }
    let keep: Vec<&String> = names.iter().zip(&dropped).filter(|(_, &x)| !x).map(|(n, _)| n).collect();
    report.selected = keep.iter().map(|s| s.to_string()).collect();
    Ok((d.select_features(&keep)?, report))
}

/// Ranks features by total split gain of a default boosted model fitted on
/// all of `d`; returns the top `k` (ties by column order).
pub fn select_top_k(d: &Dataset, k: usize, seed: Seed) -> Result<SelectionReport> {
    if k == 0 {
        return Err(Error::InvalidInput("k must be positive".into()));
    }
    let model = learners::train(&LearnerSpec::Gbt(GbtParams::default()), d, seed)?;
    let gains = learners::gain_importance(&model)?;
    let mut order: Vec<usize> = (0..gains.len()).collect();
    order.sort_by(|&a, &b| gains[b].1.total_cmp(&gains[a].1).then(a.cmp(&b)));
    Ok(SelectionReport {
        dropped_correlated: Vec::new(),
        selected: order.iter().take(k).map(|&j| gains[j].0.clone()).collect(),
        importance: gains.into_iter().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Matrix;

    fn num(vals: &[Option<f64>]) -> Vec<Cell> {
        vals.iter().map(|v| v.map_or(Cell::Missing, Cell::Value)).collect()
    }

    #[test]
    fn median_and_mode_imputation() {
        let d = Dataset::new(
            vec![
                FeatureSpec::numeric("x", ""),
                FeatureSpec::categorical("c", &["A", "B"]),
            ],
            vec![
                num(&[Some(1.0), Some(2.0), None, Some(4.0)]),
                vec![Cell::Level(0), Cell::Level(0), Cell::Level(1), Cell::Missing],
            ],
            None,
        )
        .unwrap();
        let st = fit_preprocessor(&d, ScalingMode::None).unwrap();
        assert_eq!(st.columns[0].imputation, Imputation::Median { value: 2.0 });
        assert_eq!(st.columns[1].imputation, Imputation::ModeLevel { level: 0 });
        let out = apply_preprocessor(&st, &d).unwrap();
        assert_eq!(out.feature_names(), ["x", "c=A", "c=B"]);
        assert_eq!(out.column(0)[2], Cell::Value(2.0));
        let m = out.to_matrix().unwrap();
        for i in 0..4 {
            assert_eq!(m.get(i, 1) + m.get(i, 2), 1.0);
        }
        assert_eq!(m.get(3, 1), 1.0);
    }

    #[test]
    fn mode_tie_goes_to_first_seen() {
        assert_eq!(most_frequent([2, 1, 1, 2].into_iter()), Some(2));
    }

    #[test]
    fn scaler_examples() {
        let d = Dataset::from_matrix(&["x".into()], &Matrix::from_rows(&[vec![0.0], vec![5.0], vec![10.0]]), None).unwrap();
        let st = fit_preprocessor(&d, ScalingMode::MinMax).unwrap();
        assert_eq!(st.columns[0].scaler, Some(Scaler::MinMax { min: 0.0, max: 10.0 }));
        let s = st.columns[0].scaler.unwrap();
        assert_eq!(s.apply(5.0), 0.5);
        assert_eq!(s.apply(12.0), 1.2);
        let std = Scaler::Standard { mean: 4.0, std: 2.0, constant: false };
        assert_eq!(std.apply(4.0), 0.0);
        let scaled = apply_preprocessor(&st, &d).unwrap();
        assert!(scaled.is_scaled());
        assert!(apply_preprocessor(&st, &scaled).is_err());
    }

    #[test]
    fn all_missing_and_unseen() {
        let d = Dataset::new(vec![FeatureSpec::numeric("x", "")], vec![num(&[None, None])], None).unwrap();
        assert!(matches!(fit_preprocessor(&d, ScalingMode::None), Err(Error::AllMissing(_))));
    }

    #[test]
    fn prune_duplicates() {
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|i| {
                let x = i as f64;
                vec![x, (x * 7.0) % 5.0, x, 2.0 * x + 1.0]
            })
            .collect();
        let names: Vec<String> = ["a", "b", "c", "d"].iter().map(|s| s.to_string()).collect();
        let d = Dataset::from_matrix(&names, &Matrix::from_rows(&rows), None).unwrap();
        let (out, rep) = prune_correlated(&d, 0.9).unwrap();
        assert_eq!(out.feature_names(), ["a", "b"]);
        assert_eq!(rep.dropped_correlated.len(), 2);
        assert!(rep.dropped_correlated.iter().all(|p| p.kept == "a" && (p.abs_r - 1.0).abs() < 1e-12));
    }

    #[test]
    fn pearson_constant_is_zero() {
        assert_eq!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), 0.0);
    }
}
