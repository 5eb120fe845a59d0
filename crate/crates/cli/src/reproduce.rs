use std::collections::BTreeMap;
use std::io::Write;

use clap::parser::ValueSource;
use clap::ArgMatches;
use serde::Serialize;
use vapcast::data::{fmt_g17, write_dataset_csv_to};
use vapcast::evaluate::{
    cohort_compare, metric_report, roc_points, roc_svg, write_cohort_table_csv, write_roc_csv, BootstrapConfig,
    MetricReport, RocPoint, METRIC_NAMES,
};
use vapcast::explain::{shap_summary, tree_shap};
use vapcast::learners::{LearnerSpec, MODEL_NAMES};
use vapcast::pipeline::{ablate, cv_evaluator, fit_with_smote, grid_search, holdout_evaluator, stratified_kfold, stratified_split};
use vapcast::preprocess::{apply_preprocessor, fit_preprocessor, prune_correlated, select_top_k, ScalingMode};
use vapcast::resample::SmoteParams;
use vapcast::synth::generate_cohort;
use vapcast::Seed;

use crate::args::{optional_path, ReproduceArgs, Stage};
use crate::commands::{load_grid, load_signal, load_stats, ttest_kind, write_shap_outputs};
use crate::config::{Resolved, RunConfig};
use crate::output::{CliError, Outputs, StageExt};

// Stream indices under the master seed. 0..=2 are used by the generator;
// the split reuses 2 so `--train-fraction 0.7` matches the generated split.
const SEED_SPLIT: u64 = 2;
const SEED_SELECT: u64 = 3;
const SEED_FOLDS: u64 = 4;
const SEED_GRID: u64 = 5;
const SEED_TRAIN: u64 = 6;
const SEED_BOOT: u64 = 7;
const SEED_ABLATE: u64 = 8;

fn from_cli(m: &ArgMatches, id: &str) -> bool {
    m.value_source(id) == Some(ValueSource::CommandLine)
}

/// Command line beats the config file, which beats env and defaults.
pub fn resolve(a: &ReproduceArgs, m: &ArgMatches) -> Result<(Resolved, Option<usize>), CliError> {
    let cfg = match optional_path(&a.config) {
        Some(p) => RunConfig::load(&p)?,
        None => RunConfig::default(),
    };
    macro_rules! pick {
        ($field:ident, $val:expr) => {
            if from_cli(m, stringify!($field)) {
                $val
            } else {
                cfg.$field.clone().unwrap_or($val)
            }
        };
    }
    let skip: Vec<Stage> = pick!(skip, a.skip.clone()).into_iter().filter(|s| *s != Stage::None).collect();
    let r = Resolved {
        seed: pick!(seed, a.seed.seed),
        out_dir: pick!(out_dir, a.out_dir.clone()),
        stats: pick!(stats, a.stats.clone()),
        signal: pick!(signal, a.signal.clone()),
        train_fraction: pick!(train_fraction, a.train_fraction),
        folds: pick!(folds, a.folds),
        k_neighbors: pick!(k_neighbors, a.k_neighbors),
        grid: pick!(grid, a.grid.clone()),
        threshold: pick!(threshold, a.threshold),
        bootstrap: pick!(bootstrap, a.bootstrap),
        ablate_on_test: pick!(ablate_on_test, a.ablate_on_test),
        welch: pick!(welch, a.welch),
        corr_threshold: pick!(corr_threshold, a.corr_threshold),
        top_k: pick!(top_k, a.top_k),
        skip,
        learner: match cfg.learner {
            Some(l) => l,
            None => LearnerSpec::default_for("gbt").stage("config")?,
        },
    };
    Ok((r, cfg.jobs))
}

#[derive(Serialize)]
struct MetricsFile<'a> {
    primary: &'a str,
    models: &'a BTreeMap<String, MetricReport>,
}

fn roc_all_csv(curves: &[(String, Vec<RocPoint>)]) -> String {
    let mut s = String::from("model,threshold,fpr,tpr\n");
    for (name, pts) in curves {
        for p in pts {
            s += &format!("{name},{},{},{}\n", fmt_g17(p.threshold), fmt_g17(p.fpr), fmt_g17(p.tpr));
        }
    }
    s
}

pub fn run(r: &Resolved) -> Result<(), CliError> {
    let dir = &r.out_dir;
    let seed = Seed(r.seed);
    let smote = SmoteParams {
        k_neighbors: r.k_neighbors,
    };
    let mut out = Outputs::new();
    out.ensure_dir(dir)?;

    let stats = load_stats(&r.stats).stage("synth")?;
    let signal = load_signal(&r.signal).stage("synth")?;
    let cohort = generate_cohort(&stats, &signal, seed).stage("synth")?;
    let data = cohort.dataset;
    let split = stratified_split(data.require_labels().stage("split")?, r.train_fraction, seed.derive(SEED_SPLIT))
        .stage("split")?;
    out.write_with(&dir.join("cohort.csv"), "synth", |w| write_dataset_csv_to(&data, w))?;
    out.write_json(&dir.join("split.json"), "split", &split)?;
    let train_raw = data.subset_rows(&split.train);
    let test_raw = data.subset_rows(&split.test);
    log::info!("split {} / {}", train_raw.n_rows(), test_raw.n_rows());

    let table = cohort_compare(&train_raw, &test_raw, ttest_kind(r.welch)).stage("cohort-stats")?;
    out.write_with(&dir.join("cohort_table.csv"), "cohort-stats", |w| write_cohort_table_csv(&table, w))?;

    // impute and encode on training rows, then prune and rank there too
    let base = fit_preprocessor(&train_raw, ScalingMode::None).stage("preprocess")?;
    let train_p = apply_preprocessor(&base, &train_raw).stage("preprocess")?;
    let test_p = apply_preprocessor(&base, &test_raw).stage("preprocess")?;
    let (pruned, mut report) = prune_correlated(&train_p, r.corr_threshold).stage("select")?;
    let k = r.top_k.min(pruned.n_features());
    let top = select_top_k(&pruned, k, seed.derive(SEED_SELECT)).stage("select")?;
    report.importance = top.importance;
    report.selected = top.selected;
    let keep: Vec<String> = pruned
        .feature_names()
        .into_iter()
        .filter(|n| report.selected.contains(n))
        .collect();
    let train = train_p.select_features(&keep).stage("select")?;
    let test = test_p.select_features(&keep).stage("select")?;
    out.write_json(&dir.join("selection_report.json"), "select", &report)?;

    let plan = stratified_kfold(train.require_labels().stage("tune")?, r.folds, seed.derive(SEED_FOLDS)).stage("tune")?;
    let primary = match optional_path(&r.grid) {
        Some(_) => {
            let grid = load_grid(&r.grid).stage("tune")?;
            let g = grid_search(&grid, &train, &plan, smote, seed.derive(SEED_GRID)).stage("tune")?;
            out.write_json(&dir.join("leaderboard.json"), "tune", &g)?;
            g.best
        }
        None => r.learner.clone(),
    };

    let mut specs = vec![primary.clone()];
    if !r.skips(Stage::Baselines) {
        for name in MODEL_NAMES {
            if name != primary.name() {
                specs.push(LearnerSpec::default_for(name).stage("train")?);
            }
        }
    }
    let boot = BootstrapConfig {
        replicates: r.bootstrap,
        seed: seed.derive(SEED_BOOT),
    };
    let y_test = test.require_labels().stage("evaluate")?;
    let mut reports = BTreeMap::new();
    let mut curves = Vec::new();
    let mut primary_fit = None;
    println!("model | {}", METRIC_NAMES.join(" | "));
    for spec in &specs {
        let (model, te, _) = fit_with_smote(spec, &train, &test, smote, seed.derive(SEED_TRAIN)).stage("train")?;
        let scores = model.predict_proba(&te).stage("evaluate")?;
        let rep = metric_report(&scores, y_test, r.threshold, boot).stage("evaluate")?;
        println!("{}", rep.table_row(spec.display_name()));
        reports.insert(spec.name().to_string(), rep);
        curves.push((spec.name().to_string(), roc_points(&scores, y_test).stage("evaluate")?));
        if primary_fit.is_none() {
            primary_fit = Some((model, te));
        }
    }
    let (model, test_scaled) = primary_fit.expect("primary model fitted");
    out.write_json(
        &dir.join("metrics.json"),
        "evaluate",
        &MetricsFile {
            primary: primary.name(),
            models: &reports,
        },
    )?;
    out.write_with(&dir.join("roc.csv"), "evaluate", |w| write_roc_csv(&curves[0].1, w))?;
    out.write_text(&dir.join("roc_all.csv"), &roc_all_csv(&curves))?;
    let named: Vec<(&str, &[RocPoint])> = curves.iter().map(|(n, p)| (n.as_str(), p.as_slice())).collect();
    out.write_text(&dir.join("roc.svg"), &roc_svg(&named))?;
    out.write_text(&dir.join("model.json"), &model.to_json().stage("train")?)?;

    if !r.skips(Stage::Ablate) {
        let features = train.feature_names();
        let seed_ab = seed.derive(SEED_ABLATE);
        let trace = if r.ablate_on_test {
            ablate(&features, holdout_evaluator(&primary, &train, &test, smote, boot, seed_ab))
        } else {
            ablate(&features, cv_evaluator(&primary, &train, &plan, smote, seed_ab))
        }
        .stage("ablate")?;
        println!(
            "ablation: {} -> {} features, AUC {:.4} -> {:.4}",
            features.len(),
            trace.final_features.len(),
            trace.baseline_auc,
            trace.final_auc
        );
        out.write_json(&dir.join("ablation_trace.json"), "ablate", &trace)?;
    }

    if !r.skips(Stage::Explain) {
        if primary.is_tree_based() {
            let shap = tree_shap(&model, &test_scaled).stage("explain")?;
            let s = shap_summary(&shap).stage("explain")?;
            write_shap_outputs(&mut out, dir, &s)?;
        } else {
            log::warn!("explain skipped: `{}` is not a tree model", primary.name());
        }
    }

    out.write_json(&dir.join("run.json"), "reproduce", r)?;
    out.commit();
    let _ = std::io::stdout().flush();
    Ok(())
}
