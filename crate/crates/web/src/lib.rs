//! Browser bindings: a boosted model trained on a synthetic cohort, with a
//! threshold explorer, a SHAP beeswarm and a two-feature SMOTE preview.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use vapcast::data::{Dataset, Matrix, Provenance};
use vapcast::evaluate::{roc_auc, roc_points, Confusion, RocPoint};
use vapcast::explain::{shap_summary, shap_summary_svg, tree_shap};
use vapcast::learners::{train, GbtParams, LearnerSpec};
use vapcast::resample::{smote_oversample, SmoteParams};
use vapcast::synth::{bundled, generate_cohort};
use vapcast::Seed;

/// Fewer trees than the CLI default keeps the page responsive.
const DEMO_TREES: usize = 120;

pub struct Session {
    train: Dataset,
    scores: Vec<f64>,
    labels: Vec<u8>,
    roc: Vec<RocPoint>,
    auc: f64,
    shap_svg: String,
}

#[derive(Serialize)]
struct ThresholdView {
    threshold: f64,
    confusion: Confusion,
    sensitivity: Option<f64>,
    specificity: Option<f64>,
    ppv: Option<f64>,
    npv: Option<f64>,
    accuracy: Option<f64>,
}

#[derive(Serialize)]
struct PreviewPoint {
    x: f64,
    y: f64,
    label: u8,
    synthetic: bool,
}

impl Session {
    pub fn new(seed: u64) -> vapcast::Result<Session> {
        let cohort = generate_cohort(&bundled::table2_stats(), &bundled::default_signal(), Seed(seed))?;
        let train_set = cohort.dataset.subset_rows(&cohort.split.train);
        let test_set = cohort.dataset.subset_rows(&cohort.split.test);
        let spec = LearnerSpec::Gbt(GbtParams {
            n_estimators: DEMO_TREES,
            learning_rate: 0.05,
            ..GbtParams::default()
        });
        let balanced = smote_oversample(&train_set, SmoteParams::default(), Seed(seed).derive(0))?;
        let model = train(&spec, &balanced, Seed(seed).derive(1))?;
        let scores = model.predict_proba(&test_set)?;
        let labels = test_set.require_labels()?.to_vec();
        let shap = shap_summary(&tree_shap(&model, &test_set)?)?;
        Ok(Session {
            roc: roc_points(&scores, &labels)?,
            auc: roc_auc(&scores, &labels)?,
            shap_svg: shap_summary_svg(&shap),
            train: train_set,
            scores,
            labels,
        })
    }

    pub fn threshold_json(&self, threshold: f64) -> String {
        let c = Confusion::at_threshold(&self.scores, &self.labels, threshold);
        let view = ThresholdView {
            threshold,
            confusion: c,
            sensitivity: c.sensitivity(),
            specificity: c.specificity(),
            ppv: c.ppv(),
            npv: c.npv(),
            accuracy: c.accuracy(),
        };
        serde_json::to_string(&view).expect("plain struct serializes")
    }

    /// Training rows projected on two features and min-max scaled, before
    /// and after oversampling.
    pub fn smote_preview(&self, fx: &str, fy: &str, k: usize, seed: u64) -> vapcast::Result<String> {
        let proj = self.train.select_features(&[fx, fy])?;
        let m = proj.to_matrix()?;
        let scale = |j: usize| {
            let col = m.column(j);
            let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            move |v: f64| if hi > lo { (v - lo) / (hi - lo) } else { 0.5 }
        };
        let (sx, sy) = (scale(0), scale(1));
        let rows: Vec<Vec<f64>> = (0..m.rows()).map(|i| vec![sx(m.get(i, 0)), sy(m.get(i, 1))]).collect();
        let names = vec![fx.to_string(), fy.to_string()];
        let d = Dataset::from_matrix(&names, &Matrix::from_rows(&rows), Some(proj.require_labels()?.to_vec()))?;
        let out = smote_oversample(&d, SmoteParams { k_neighbors: k }, Seed(seed))?;
        let om = out.to_matrix()?;
        let y = out.require_labels()?;
        let points: Vec<PreviewPoint> = (0..out.n_rows())
            .map(|i| PreviewPoint {
                x: om.get(i, 0),
                y: om.get(i, 1),
                label: y[i],
                synthetic: out.provenance()[i] == Provenance::Synthetic,
            })
            .collect();
        Ok(serde_json::to_string(&points)?)
    }
}

fn js_err(e: vapcast::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub struct Demo {
    inner: Session,
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32) -> Result<Demo, JsError> {
        Ok(Demo {
            inner: Session::new(seed as u64).map_err(js_err)?,
        })
    }

    pub fn auc(&self) -> f64 {
        self.inner.auc
    }

    /// `[{threshold, fpr, tpr}]`; the first threshold is null (+inf).
    pub fn roc_json(&self) -> String {
        serde_json::to_string(&self.inner.roc).expect("points serialize")
    }

    pub fn threshold_json(&self, threshold: f64) -> String {
        self.inner.threshold_json(threshold)
    }

    pub fn shap_svg(&self) -> String {
        self.inner.shap_svg.clone()
    }

    pub fn feature_names_json(&self) -> String {
        serde_json::to_string(&self.inner.train.feature_names()).expect("names serialize")
    }

    pub fn smote_preview(&self, fx: &str, fy: &str, k: u32, seed: u32) -> Result<String, JsError> {
        self.inner.smote_preview(fx, fy, k as usize, seed as u64).map_err(js_err)
    }
}
