use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use serde_json::Value;
use vapcast::cohort::{read_evidence_csv, write_labels_csv};
use vapcast::data::{
    infer_schema_csv, load_dataset_csv, read_report_json, write_dataset_csv_to, Dataset, FeatureSpec, SplitIndices,
};
use vapcast::evaluate::{
    cohort_compare, metric_report, roc_points, write_cohort_table_csv, write_roc_csv, BootstrapConfig, TTestKind,
};
use vapcast::explain::{shap_summary, shap_summary_svg, tree_shap, write_shap_csv, RankEntry, ShapSummary};
use vapcast::learners::{train, LearnerSpec, TrainedClassifier};
use vapcast::pipeline::{ablate, cv_evaluator, grid_search, holdout_evaluator, stratified_kfold, GridSpec};
use vapcast::preprocess::{apply_preprocessor, fit_preprocessor, prune_correlated, select_top_k, ScalingMode};
use vapcast::resample::{smote_oversample, SmoteParams};
use vapcast::synth::{bundled, generate_cohort, CohortStatistics, SignalSpec};
use vapcast::Seed;

use crate::args::*;
use crate::output::{CliError, Outputs, StageExt};

pub fn load_stats(src: &str) -> vapcast::Result<CohortStatistics> {
    if src == BUNDLED {
        Ok(bundled::table2_stats())
    } else {
        read_report_json(src)
    }
}

pub fn load_signal(src: &str) -> vapcast::Result<SignalSpec> {
    if src == BUNDLED {
        Ok(bundled::default_signal())
    } else {
        read_report_json(src)
    }
}

pub fn load_grid(src: &str) -> vapcast::Result<GridSpec> {
    if src == BUNDLED {
        Ok(serde_json::from_str(bundled::DEFAULT_GRID_JSON)?)
    } else {
        read_report_json(src)
    }
}

pub fn learner_spec(a: &LearnerArgs) -> vapcast::Result<LearnerSpec> {
    match optional_path(&a.params) {
        None => LearnerSpec::default_for(&a.model),
        Some(_) if a.params.trim_start().starts_with('{') => {
            let v: Value = serde_json::from_str(&a.params)?;
            LearnerSpec::from_params(&a.model, &v)
        }
        Some(path) => {
            let v: Value = read_report_json(path)?;
            LearnerSpec::from_params(&a.model, &v)
        }
    }
}

fn schema_for(schema: &str, data: &Path) -> vapcast::Result<Vec<FeatureSpec>> {
    match optional_path(schema) {
        Some(p) => read_report_json(p),
        None => infer_schema_csv(data),
    }
}

fn load_data(a: &DataArgs) -> Result<Dataset, CliError> {
    let schema = schema_for(&a.schema, &a.data).stage("load")?;
    load_dataset_csv(&a.data, &schema).stage("load")
}

fn kind(welch: bool) -> TTestKind {
    if welch {
        TTestKind::Welch
    } else {
        TTestKind::Pooled
    }
}

#[derive(serde::Serialize)]
pub struct ShapRank<'a> {
    pub base_value: f64,
    pub ranking: &'a [RankEntry],
}

/// shap.csv, shap_rank.json and shap_summary.svg under `dir`.
pub fn write_shap_outputs(out: &mut Outputs, dir: &Path, s: &ShapSummary) -> Result<(), CliError> {
    out.write_with(&dir.join("shap.csv"), "explain", |w| write_shap_csv(s, w))?;
    out.write_json(
        &dir.join("shap_rank.json"),
        "explain",
        &ShapRank {
            base_value: s.base_value,
            ranking: &s.ranking,
        },
    )?;
    out.write_text(&dir.join("shap_summary.svg"), &shap_summary_svg(s))
}

pub fn synth(a: SynthArgs) -> Result<(), CliError> {
    let stats = load_stats(&a.stats).stage("synth")?;
    let signal = load_signal(&a.signal).stage("synth")?;
    let c = generate_cohort(&stats, &signal, Seed(a.seed.seed)).stage("synth")?;
    let mut out = Outputs::new();
    out.write_with(&a.out, "synth", |w| write_dataset_csv_to(&c.dataset, w))?;
    if let Some(p) = optional_path(&a.split_out) {
        out.write_json(&p, "synth", &c.split)?;
    }
    out.commit();
    Ok(())
}

pub fn label(a: LabelArgs) -> Result<(), CliError> {
    let f = File::open(&a.evidence).map_err(|source| CliError::Io {
        path: a.evidence.clone(),
        source,
    })?;
    let rows = read_evidence_csv(BufReader::new(f)).stage("label")?;
    let mut out = Outputs::new();
    out.write_with(&a.out, "label", |w| write_labels_csv(&rows, w))?;
    out.commit();
    Ok(())
}

pub fn prep(a: PrepArgs) -> Result<(), CliError> {
    let d = load_data(&a.input)?;
    let fit_rows = match optional_path(&a.split) {
        Some(p) => {
            let s: SplitIndices = read_report_json(p).stage("prep")?;
            s.validate(d.n_rows()).stage("prep")?;
            s.train
        }
        None => (0..d.n_rows()).collect(),
    };
    let fit = d.subset_rows(&fit_rows);
    let base = fit_preprocessor(&fit, ScalingMode::None).stage("prep")?;
    let all = apply_preprocessor(&base, &d).stage("prep")?;
    let fit = apply_preprocessor(&base, &fit).stage("prep")?;
    let (pruned, mut report) = prune_correlated(&fit, a.corr_threshold).stage("select")?;
    if a.top_k > 0 && a.top_k < pruned.n_features() {
        let top = select_top_k(&pruned, a.top_k, Seed(a.seed.seed)).stage("select")?;
        report.importance = top.importance;
        report.selected = top.selected;
    } else {
        report.selected = pruned.feature_names();
    }
    let keep: Vec<String> = pruned
        .feature_names()
        .into_iter()
        .filter(|n| report.selected.contains(n))
        .collect();
    let all = all.select_features(&keep).stage("select")?;
    let fit = fit.select_features(&keep).stage("select")?;
    let mode: ScalingMode = a.mode.into();
    let result = if mode == ScalingMode::None {
        all
    } else {
        let st = fit_preprocessor(&fit, mode).stage("scale")?;
        apply_preprocessor(&st, &all).stage("scale")?
    };
    let mut out = Outputs::new();
    out.write_with(&a.out, "prep", |w| write_dataset_csv_to(&result, w))?;
    out.write_json(&a.report, "prep", &report)?;
    out.commit();
    Ok(())
}

pub fn resample(a: ResampleArgs) -> Result<(), CliError> {
    let d = load_data(&a.input)?;
    let r = smote_oversample(
        &d,
        SmoteParams {
            k_neighbors: a.k_neighbors,
        },
        Seed(a.seed.seed),
    )
    .stage("resample")?;
    let mut out = Outputs::new();
    out.write_with(&a.out, "resample", |w| write_dataset_csv_to(&r, w))?;
    out.commit();
    Ok(())
}

/// Fits on the data as given; scale it with `prep` first for the
/// distance- and gradient-based models.
pub fn train_cmd(a: TrainArgs) -> Result<(), CliError> {
    let d = load_data(&a.input)?;
    let spec = learner_spec(&a.learner).stage("train")?;
    let seed = Seed(a.seed.seed);
    let d = if a.smote {
        smote_oversample(&d, SmoteParams::default(), seed.derive(0)).stage("resample")?
    } else {
        d
    };
    let m = train(&spec, &d, seed.derive(1)).stage("train")?;
    let json = m.to_json().stage("train")?;
    let mut out = Outputs::new();
    out.write_text(&a.out, &json)?;
    out.commit();
    Ok(())
}

pub fn tune(a: TuneArgs) -> Result<(), CliError> {
    let d = load_data(&a.input)?;
    let grid = load_grid(&a.grid).stage("tune")?;
    let seed = Seed(a.seed.seed);
    let plan = stratified_kfold(d.require_labels().stage("tune")?, a.folds, seed.derive(4)).stage("tune")?;
    let smote = SmoteParams {
        k_neighbors: a.k_neighbors,
    };
    let r = grid_search(&grid, &d, &plan, smote, seed.derive(5)).stage("tune")?;
    let mut out = Outputs::new();
    out.write_json(&a.out, "tune", &r)?;
    out.commit();
    println!("best: {} (mean AUC {:.4})", r.best.params(), r.best_score);
    Ok(())
}

pub fn evaluate(a: EvaluateArgs) -> Result<(), CliError> {
    let m = TrainedClassifier::load(&a.model).stage("load")?;
    let d = load_data(&a.input)?;
    let scores = m.predict_proba(&d).stage("evaluate")?;
    let y = d.require_labels().stage("evaluate")?;
    let boot = BootstrapConfig {
        replicates: a.bootstrap,
        seed: Seed(a.seed.seed).derive(7),
    };
    let rep = metric_report(&scores, y, a.threshold, boot).stage("evaluate")?;
    let mut out = Outputs::new();
    out.write_json(&a.out, "evaluate", &rep)?;
    if let Some(p) = optional_path(&a.roc) {
        let pts = roc_points(&scores, y).stage("evaluate")?;
        out.write_with(&p, "evaluate", |w| write_roc_csv(&pts, w))?;
    }
    out.commit();
    println!("{}", rep.table_row(m.spec.name()));
    Ok(())
}

pub fn ablate_cmd(a: AblateArgs) -> Result<(), CliError> {
    let d = load_data(&a.input)?;
    let spec = learner_spec(&a.learner).stage("ablate")?;
    let seed = Seed(a.seed.seed);
    let smote = SmoteParams {
        k_neighbors: a.k_neighbors,
    };
    let features = d.feature_names();
    let trace = match optional_path(&a.ablate_on_test) {
        Some(p) => {
            let test = load_dataset_csv(&p, d.specs()).stage("load")?;
            let boot = BootstrapConfig {
                replicates: a.bootstrap,
                seed: seed.derive(7),
            };
            ablate(&features, holdout_evaluator(&spec, &d, &test, smote, boot, seed.derive(8)))
        }
        None => {
            let plan =
                stratified_kfold(d.require_labels().stage("ablate")?, a.folds, seed.derive(4)).stage("ablate")?;
            ablate(&features, cv_evaluator(&spec, &d, &plan, smote, seed.derive(8)))
        }
    }
    .stage("ablate")?;
    let mut out = Outputs::new();
    out.write_json(&a.out, "ablate", &trace)?;
    out.commit();
    Ok(())
}

pub fn explain(a: ExplainArgs) -> Result<(), CliError> {
    let m = TrainedClassifier::load(&a.model).stage("load")?;
    let d = load_data(&a.input)?;
    let shap = tree_shap(&m, &d).stage("explain")?;
    let s = shap_summary(&shap).stage("explain")?;
    let mut out = Outputs::new();
    out.ensure_dir(&a.out_dir)?;
    write_shap_outputs(&mut out, &a.out_dir, &s)?;
    out.commit();
    Ok(())
}

pub fn cohort_stats(a: CohortStatsArgs) -> Result<(), CliError> {
    let schema = schema_for(&a.schema, &a.train).stage("load")?;
    let train = load_dataset_csv(&a.train, &schema).stage("load")?;
    let test = load_dataset_csv(&a.test, &schema).stage("load")?;
    let rows = cohort_compare(&train, &test, kind(a.welch)).stage("cohort-stats")?;
    let mut out = Outputs::new();
    out.write_with(&a.out, "cohort-stats", |w| write_cohort_table_csv(&rows, w))?;
    out.commit();
    Ok(())
}

pub fn ttest_kind(welch: bool) -> TTestKind {
    kind(welch)
}
