//! Stratified splitting, cross-validation with in-fold SMOTE, grid search
//! and stepwise feature ablation.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::data::{Dataset, SplitIndices};
use crate::error::{Error, Result};
use crate::evaluate::{metric_report, roc_auc, BootstrapConfig};
use crate::learners::{self, LearnerSpec};
use crate::preprocess::{apply_preprocessor, fit_preprocessor, ScalingMode};
use crate::resample::{smote_oversample, SmoteParams};
use crate::seed::Seed;
use crate::special::student_t_quantile;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

fn class_rows(labels: &[u8]) -> (Vec<usize>, Vec<usize>) {
    (0..labels.len()).partition(|&i| labels[i] == 1)
}

/// Per-class shuffled allocation with `round(train_fraction·n)` training rows.
pub fn stratified_split(labels: &[u8], train_fraction: f64, seed: Seed) -> Result<SplitIndices> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidInput(format!("train fraction {train_fraction} is outside (0, 1)")));
    }
    let (mut pos, mut neg) = class_rows(labels);
    if pos.len() < 2 || neg.len() < 2 {
        return Err(Error::Degenerate(format!(
            "stratified split needs at least 2 rows per class (got {} positive, {} negative)",
            pos.len(),
            neg.len()
        )));
    }
    let n = labels.len();
    let n_train = ((train_fraction * n as f64).round() as usize).clamp(2, n - 2);
    let pos_train = ((train_fraction * pos.len() as f64).round() as usize).clamp(1, pos.len() - 1);
    let neg_train = n_train.saturating_sub(pos_train).clamp(1, neg.len() - 1);
    let pos_train = n_train - neg_train;
    let mut rng = seed.rng();
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let mut train: Vec<usize> = pos[..pos_train].iter().chain(&neg[..neg_train]).copied().collect();
    let mut test: Vec<usize> = pos[pos_train..].iter().chain(&neg[neg_train..]).copied().collect();
    train.sort_unstable();
    test.sort_unstable();
    let split = SplitIndices { train, test };
    split.validate(n)?;
    Ok(split)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    /// Validation row indices per fold, each sorted.
    pub folds: Vec<Vec<usize>>,
}

impl FoldPlan {
    pub fn training_rows(&self, fold: usize) -> Vec<usize> {
        let mut rows: Vec<usize> = self
            .folds
            .iter()
            .enumerate()
            .filter(|(f, _)| *f != fold)
            .flat_map(|(_, v)| v.iter().copied())
            .collect();
        rows.sort_unstable();
        rows
    }
}

/// Shuffles each class and deals rows to folds round-robin, positives first,
/// continuing the deal across classes.
pub fn stratified_kfold(labels: &[u8], k: usize, seed: Seed) -> Result<FoldPlan> {
    let (mut pos, mut neg) = class_rows(labels);
    let minority = pos.len().min(neg.len());
    if k < 2 || k > minority {
        return Err(Error::InvalidInput(format!(
            "k = {k} folds needs 2 <= k <= minority count ({minority})"
        )));
    }
    let mut rng = seed.rng();
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let mut folds = vec![Vec::new(); k];
    for (t, i) in pos.into_iter().chain(neg).enumerate() {
        folds[t % k].push(i);
    }
    folds.iter_mut().for_each(|f| f.sort_unstable());
    Ok(FoldPlan { k, folds })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub mean_auc: f64,
    pub per_fold: Vec<f64>,
    /// Synthetic rows added to each training fold.
    pub synthetic_in_training: Vec<usize>,
    /// Synthetic rows found in validation folds; always 0 on success.
    pub synthetic_in_validation: usize,
}

impl CvResult {
    /// mean ± t(0.975, k−1)·sd/√k, clamped to [0, 1].
    pub fn interval(&self) -> (f64, f64) {
        let k = self.per_fold.len();
        if k < 2 {
            return (self.mean_auc, self.mean_auc);
        }
        let var = self.per_fold.iter().map(|a| (a - self.mean_auc).powi(2)).sum::<f64>() / (k - 1) as f64;
        let half = student_t_quantile(0.975, (k - 1) as f64) * (var / k as f64).sqrt();
        ((self.mean_auc - half).max(0.0), (self.mean_auc + half).min(1.0))
    }
}

/// Fits the learner's scaler on `train` and applies it to both sets.
pub fn scale_for(spec: &LearnerSpec, train: &Dataset, other: &Dataset) -> Result<(Dataset, Dataset)> {
    let mode = spec.scaling_mode();
    if mode == ScalingMode::None || train.is_scaled() {
        return Ok((train.clone(), other.clone()));
    }
    let state = fit_preprocessor(train, mode)?;
    Ok((apply_preprocessor(&state, train)?, apply_preprocessor(&state, other)?))
}

/// Scales, oversamples and fits on `train`; returns the model with the
/// scaled `other` set ready for scoring.
pub fn fit_with_smote(
    spec: &LearnerSpec,
    train: &Dataset,
    other: &Dataset,
    smote: SmoteParams,
    seed: Seed,
) -> Result<(learners::TrainedClassifier, Dataset, usize)> {
    let (tr, ot) = scale_for(spec, train, other)?;
    let augmented = smote_oversample(&tr, smote, seed.derive(0))?;
    let added = augmented.synthetic_count() - tr.synthetic_count();
    let model = learners::train(spec, &augmented, seed.derive(1))?;
    Ok((model, ot, added))
}

/// Per fold: SMOTE the training folds only, fit, score the untouched
/// validation fold. Fold `f` draws from `seed.derive(f)`.
pub fn cv_auc_with_smote(
    spec: &LearnerSpec,
    d: &Dataset,
    plan: &FoldPlan,
    smote: SmoteParams,
    seed: Seed,
) -> Result<CvResult> {
    d.require_labels()?;
    let run = |f: usize| -> Result<(f64, usize, usize)> {
        let val = d.subset_rows(&plan.folds[f]);
        let leaked = val.synthetic_count();
        if leaked > 0 {
            return Err(Error::InvalidInput(format!(
                "validation fold {f} contains {leaked} synthetic rows"
            )));
        }
        let train = d.subset_rows(&plan.training_rows(f));
        let (model, val, added) = fit_with_smote(spec, &train, &val, smote, seed.derive(f as u64))?;
        let scores = model.predict_proba(&val)?;
        let auc = roc_auc(&scores, val.require_labels()?)?;
        Ok((auc, added, val.synthetic_count()))
    };
    #[cfg(feature = "parallel")]
    let results: Vec<Result<_>> = (0..plan.k).into_par_iter().map(run).collect();
    #[cfg(not(feature = "parallel"))]
    let results: Vec<Result<_>> = (0..plan.k).map(run).collect();
    let mut per_fold = Vec::with_capacity(plan.k);
    let mut synthetic_in_training = Vec::with_capacity(plan.k);
    let mut synthetic_in_validation = 0;
    for r in results {
        let (auc, added, leaked) = r?;
        per_fold.push(auc);
        synthetic_in_training.push(added);
        synthetic_in_validation += leaked;
    }
    let mean_auc = per_fold.iter().sum::<f64>() / per_fold.len() as f64;
    Ok(CvResult {
        mean_auc,
        per_fold,
        synthetic_in_training,
        synthetic_in_validation,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridParam {
    pub name: String,
    pub values: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub model: String,
    /// Fixed parameters shared by every point.
    #[serde(default)]
    pub base: Map<String, Value>,
    pub params: Vec<GridParam>,
}

impl GridSpec {
    /// Cartesian product in lexicographic order: the first parameter varies
    /// slowest, values in listed order.
    pub fn points(&self) -> Result<Vec<(Map<String, Value>, LearnerSpec)>> {
        if let Some(p) = self.params.iter().find(|p| p.values.is_empty()) {
            return Err(Error::InvalidInput(format!("grid parameter `{}` has no values", p.name)));
        }
        let mut combos: Vec<Map<String, Value>> = vec![Map::new()];
        for p in &self.params {
            combos = combos
                .into_iter()
                .flat_map(|c| {
                    p.values.iter().map(move |v| {
                        let mut c = c.clone();
                        c.insert(p.name.clone(), v.clone());
                        c
                    })
                })
                .collect();
        }
        combos
            .into_iter()
            .map(|overrides| {
                let mut params = self.base.clone();
                params.extend(overrides.clone());
                let spec = LearnerSpec::from_params(&self.model, &Value::Object(params))?;
                Ok((overrides, spec))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardEntry {
    /// Position in enumeration order.
    pub index: usize,
    pub overrides: Map<String, Value>,
    pub spec: LearnerSpec,
    pub mean_auc: f64,
    pub per_fold: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best: LearnerSpec,
    pub best_index: usize,
    pub best_score: f64,
    /// Descending by mean AUC; ties keep enumeration order.
    pub leaderboard: Vec<LeaderboardEntry>,
}

/// Evaluates every grid point by cross-validation. Point `i` draws from
/// `seed.derive(i)`.
pub fn grid_search(grid: &GridSpec, d: &Dataset, plan: &FoldPlan, smote: SmoteParams, seed: Seed) -> Result<GridResult> {
    let points = grid.points()?;
    let eval = |(i, (overrides, spec)): (usize, &(Map<String, Value>, LearnerSpec))| -> Result<LeaderboardEntry> {
        let cv = cv_auc_with_smote(spec, d, plan, smote, seed.derive(i as u64))?;
        Ok(LeaderboardEntry {
            index: i,
            overrides: overrides.clone(),
            spec: spec.clone(),
            mean_auc: cv.mean_auc,
            per_fold: cv.per_fold,
        })
    };
    #[cfg(feature = "parallel")]
    let results: Vec<Result<_>> = points.par_iter().enumerate().map(eval).collect();
    #[cfg(not(feature = "parallel"))]
    let results: Vec<Result<_>> = points.iter().enumerate().map(eval).collect();
    let mut leaderboard = results.into_iter().collect::<Result<Vec<_>>>()?;
    leaderboard.sort_by(|a, b| b.mean_auc.total_cmp(&a.mean_auc));
    let top = &leaderboard[0];
    Ok(GridResult {
        best: top.spec.clone(),
        best_index: top.index,
        best_score: top.mean_auc,
        leaderboard,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AucEstimate {
    pub auc: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationStep {
    pub pass: usize,
    pub removed: String,
    pub auc_after: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// The removal was accepted.
    pub kept: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTrace {
    pub baseline_auc: f64,
    pub baseline_ci_low: f64,
    pub baseline_ci_high: f64,
    pub steps: Vec<AblationStep>,
    pub final_features: Vec<String>,
    pub final_auc: f64,
    pub probe_count: usize,
}

/// Steepest-ascent backward elimination. Each pass probes every remaining
/// feature in order; the best removal is accepted only if it strictly beats
/// the current AUC.
pub fn ablate<F>(features: &[String], eval: F) -> Result<AblationTrace>
where
    F: Fn(&[String]) -> Result<AucEstimate> + Sync,
{
    if features.len() < 2 {
        return Err(Error::InvalidInput("ablation needs at least 2 features".into()));
    }
    let base = eval(features)?;
    let mut current: Vec<String> = features.to_vec();
    let mut current_auc = base.auc;
    let mut steps = Vec::new();
    let mut pass = 0;
    while current.len() >= 2 {
        pass += 1;
        let probe = |j: usize| -> Result<AucEstimate> {
            let subset: Vec<String> = current.iter().enumerate().filter(|(i, _)| *i != j).map(|(_, f)| f.clone()).collect();
            eval(&subset)
        };
        #[cfg(feature = "parallel")]
        let results: Vec<Result<AucEstimate>> = (0..current.len()).into_par_iter().map(probe).collect();
        #[cfg(not(feature = "parallel"))]
        let results: Vec<Result<AucEstimate>> = (0..current.len()).map(probe).collect();
        let results = results.into_iter().collect::<Result<Vec<_>>>()?;
        let mut best: Option<usize> = None;
        for (j, r) in results.iter().enumerate() {
            if r.auc > current_auc && best.is_none_or(|b| r.auc > results[b].auc) {
                best = Some(j);
            }
        }
        for (j, r) in results.iter().enumerate() {
            steps.push(AblationStep {
                pass,
                removed: current[j].clone(),
                auc_after: r.auc,
                ci_low: r.ci_low,
                ci_high: r.ci_high,
                kept: best == Some(j),
            });
        }
        match best {
            Some(j) => {
                current_auc = results[j].auc;
                current.remove(j);
            }
            None => break,
        }
    }
    Ok(AblationTrace {
        baseline_auc: base.auc,
        baseline_ci_low: base.ci_low,
        baseline_ci_high: base.ci_high,
        probe_count: steps.len(),
        steps,
        final_features: current,
        final_auc: current_auc,
    })
}

/// Ablation scoring by cross-validated mean AUC on `d`.
pub fn cv_evaluator<'a>(
    spec: &'a LearnerSpec,
    d: &'a Dataset,
    plan: &'a FoldPlan,
    smote: SmoteParams,
    seed: Seed,
) -> impl Fn(&[String]) -> Result<AucEstimate> + Sync + 'a {
    move |features: &[String]| {
        let sub = d.select_features(features)?;
        let cv = cv_auc_with_smote(spec, &sub, plan, smote, seed)?;
        let (ci_low, ci_high) = cv.interval();
        Ok(AucEstimate {
            auc: cv.mean_auc,
            ci_low,
            ci_high,
        })
    }
}

/// Ablation scoring by AUC on a held-out set, with a bootstrap interval.
pub fn holdout_evaluator<'a>(
    spec: &'a LearnerSpec,
    train: &'a Dataset,
    test: &'a Dataset,
    smote: SmoteParams,
    boot: BootstrapConfig,
    seed: Seed,
) -> impl Fn(&[String]) -> Result<AucEstimate> + Sync + 'a {
    move |features: &[String]| {
        let tr = train.select_features(features)?;
        let te = test.select_features(features)?;
        let (model, te, _) = fit_with_smote(spec, &tr, &te, smote, seed)?;
        let scores = model.predict_proba(&te)?;
        let rep = metric_report(&scores, te.require_labels()?, 0.5, boot)?;
        let auc = rep.metrics.auc;
        Ok(AucEstimate {
            auc: auc.point.unwrap_or(0.5),
            ci_low: auc.ci_low.unwrap_or(0.0),
            ci_high: auc.ci_high.unwrap_or(1.0),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Matrix;
    use crate::learners::GbtParams;

    #[test]
    fn split_sizes() {
        let labels: Vec<u8> = (0..836).map(|i| u8::from(i < 328)).collect();
        let s = stratified_split(&labels, 0.7, Seed(7)).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (585, 251));
        let pos_train = s.train.iter().filter(|&&i| labels[i] == 1).count();
        assert!((pos_train as f64 - 0.7 * 328.0).abs() <= 1.0);

        let small: Vec<u8> = (0..10).map(|i| u8::from(i % 2 == 0)).collect();
        let s = stratified_split(&small, 0.5, Seed(1)).unwrap();
        for part in [&s.train, &s.test] {
            let pos = part.iter().filter(|&&i| small[i] == 1).count();
            assert!(pos >= 2 && part.len() - pos >= 2);
        }
    }

    #[test]
    fn kfold_partitions() {
        let labels: Vec<u8> = (0..585).map(|i| u8::from(i % 5 < 2)).collect();
        let plan = stratified_kfold(&labels, 5, Seed(3)).unwrap();
        assert!(plan.folds.iter().all(|f| f.len() == 117));
        let mut all: Vec<usize> = plan.folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..585).collect::<Vec<_>>());
        let pos: Vec<usize> = plan.folds.iter().map(|f| f.iter().filter(|&&i| labels[i] == 1).count()).collect();
        assert!(pos.iter().max().unwrap() - pos.iter().min().unwrap() <= 1);
        assert!(stratified_kfold(&[1, 0, 0, 0], 2, Seed(0)).is_err());
    }

    #[test]
    fn grid_order_and_tie_rule() {
        let g: GridSpec = serde_json::from_value(serde_json::json!({
            "model": "gbt",
            "base": {"n_estimators": 5},
            "params": [
                {"name": "max_depth", "values": [2, 3]},
                {"name": "learning_rate", "values": [0.1, 0.1]}
            ]
        }))
        .unwrap();
        let pts = g.points().unwrap();
        assert_eq!(pts.len(), 4);
        let depths: Vec<usize> = pts
            .iter()
            .map(|(_, s)| match s {
                LearnerSpec::Gbt(p) => p.max_depth,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(depths, [2, 2, 3, 3]);
        assert!(matches!(&pts[0].1, LearnerSpec::Gbt(GbtParams { n_estimators: 5, .. })));
    }

    #[test]
    fn ablation_removes_harmful_feature() {
        let names: Vec<String> = ["good", "bad", "meh"].iter().map(|s| s.to_string()).collect();
        let eval = |fs: &[String]| -> Result<AucEstimate> {
            let mut auc = 0.6;
            if fs.iter().any(|f| f == "good") {
                auc += 0.2;
            }
            if fs.iter().any(|f| f == "bad") {
                auc -= 0.1;
            }
            if fs.iter().any(|f| f == "meh") {
                auc += 0.01;
            }
            Ok(AucEstimate { auc, ci_low: auc, ci_high: auc })
        };
        let t = ablate(&names, eval).unwrap();
        assert_eq!(t.final_features, ["good", "meh"]);
        assert!(t.final_auc > t.baseline_auc);
        assert!(t.probe_count <= 6);
        assert_eq!(t.steps.iter().filter(|s| s.kept).count(), 1);
    }

    #[test]
    fn cv_has_no_synthetic_validation_rows() {
        let rows: Vec<Vec<f64>> = (0..60).map(|i| vec![(i % 13) as f64, (i * 7 % 11) as f64]).collect();
        let y: Vec<u8> = rows.iter().map(|r| u8::from(r[0] + r[1] > 14.0)).collect();
        let d = Dataset::from_matrix(&["a".into(), "b".into()], &Matrix::from_rows(&rows), Some(y.clone())).unwrap();
        let plan = stratified_kfold(&y, 5, Seed(1)).unwrap();
        let spec = LearnerSpec::default_for("logreg").unwrap();
        let r1 = cv_auc_with_smote(&spec, &d, &plan, SmoteParams::default(), Seed(4)).unwrap();
        let r2 = cv_auc_with_smote(&spec, &d, &plan, SmoteParams::default(), Seed(4)).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(r1.synthetic_in_validation, 0);
        assert!(r1.synthetic_in_training.iter().all(|&s| s > 0));
        assert!((r1.mean_auc - r1.per_fold.iter().sum::<f64>() / 5.0).abs() < 1e-15);
    }
}
