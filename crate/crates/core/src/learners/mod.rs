//! The six classifiers behind one training and prediction contract.

pub mod adaboost;
pub mod forest;
pub mod gbt;
pub mod logreg;
pub mod mlp;
pub mod svm;
pub mod tree;

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use adaboost::{AdaBoostSpec, AdaModel};
pub use forest::{Forest, RandomForestSpec};
pub use gbt::{gbt_leaf_weight, gbt_split_gain, BoostedEnsemble, GbtParams};
pub use logreg::{logreg_loss_and_grad, LinearModel, LogisticRegressionSpec, Penalty};
pub use mlp::{mlp_loss_and_grad, Mlp, NeuralNetSpec};
pub use svm::{LinearSvmSpec, SvmModel};
pub use tree::{Direction, MaxFeatures, Node};

use crate::data::{Dataset, Matrix};
use crate::error::{Error, Result};
use crate::preprocess::ScalingMode;
use crate::seed::Seed;

pub const MODEL_FORMAT: &str = "vapcast-model";
pub const MODEL_VERSION: u32 = 1;

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^z) without overflow.
pub(crate) fn log1pexp(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Serde adapter writing floats as 17-significant-digit strings.
pub(crate) mod g17 {
    use serde::{de, Deserialize, Deserializer, Serializer};

    use crate::data::fmt_g17;

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Str(String),
        Num(f64),
    }

    fn parse<E: de::Error>(raw: Raw) -> Result<f64, E> {
        match raw {
            Raw::Num(v) => Ok(v),
            Raw::Str(s) => s.parse().map_err(|_| E::custom(format!("`{s}` is not a number"))),
        }
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&fmt_g17(*v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        parse(Raw::deserialize(d)?)
    }

    pub mod vec {
        use super::*;
        use serde::ser::SerializeSeq;

        pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
            let mut seq = s.serialize_seq(Some(v.len()))?;
            for x in v {
                seq.serialize_element(&fmt_g17(*x))?;
            }
            seq.end()
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
            Vec::<Raw>::deserialize(d)?.into_iter().map(parse).collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", content = "params", rename_all = "lowercase")]
pub enum LearnerSpec {
    Gbt(GbtParams),
    LogReg(LogisticRegressionSpec),
    Rf(RandomForestSpec),
    AdaBoost(AdaBoostSpec),
    Ann(NeuralNetSpec),
    Svm(LinearSvmSpec),
}

pub const MODEL_NAMES: [&str; 6] = ["gbt", "logreg", "rf", "adaboost", "ann", "svm"];

impl LearnerSpec {
    /// Default settings for a model name.
    pub fn default_for(name: &str) -> Result<LearnerSpec> {
        LearnerSpec::from_params(name, &Value::Object(Default::default()))
    }

    /// Builds a spec from a model name and a (possibly partial) parameter object.
    pub fn from_params(name: &str, params: &Value) -> Result<LearnerSpec> {
        if !MODEL_NAMES.contains(&name) {
            return Err(Error::InvalidInput(format!(
                "unknown model `{name}` (expected one of {})",
                MODEL_NAMES.join(", ")
            )));
        }
        let v = serde_json::json!({ "model": name, "params": params });
        Ok(serde_json::from_value(v)?)
    }

    pub fn name(&self) -> &'static str {
        match self {
            LearnerSpec::Gbt(_) => "gbt",
            LearnerSpec::LogReg(_) => "logreg",
            LearnerSpec::Rf(_) => "rf",
            LearnerSpec::AdaBoost(_) => "adaboost",
            LearnerSpec::Ann(_) => "ann",
            LearnerSpec::Svm(_) => "svm",
        }
    }

    pub fn display_name(&self) -> &'static str {
        match self {
            LearnerSpec::Gbt(_) => "Gradient boosting",
            LearnerSpec::LogReg(_) => "Logistic regression",
            LearnerSpec::Rf(_) => "Random forest",
            LearnerSpec::AdaBoost(_) => "AdaBoost",
            LearnerSpec::Ann(_) => "Neural network",
            LearnerSpec::Svm(_) => "Linear SVM",
        }
    }

    /// Parameter object as JSON.
    pub fn params(&self) -> Value {
        serde_json::to_value(self)
            .ok()
            .and_then(|v| v.get("params").cloned())
            .unwrap_or(Value::Null)
    }

    /// Scaling used ahead of this learner: min-max for the SVM and network,
    /// standardization for logistic regression, none for tree models.
    pub fn scaling_mode(&self) -> ScalingMode {
        match self {
            LearnerSpec::Svm(_) | LearnerSpec::Ann(_) => ScalingMode::MinMax,
            LearnerSpec::LogReg(_) => ScalingMode::Standard,
            _ => ScalingMode::None,
        }
    }

    pub fn is_tree_based(&self) -> bool {
        matches!(self, LearnerSpec::Gbt(_) | LearnerSpec::Rf(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Model {
    Gbt(BoostedEnsemble),
    LogReg(LinearModel),
    Rf(Forest),
    AdaBoost(AdaModel),
    Ann(Mlp),
    Svm(SvmModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedClassifier {
    pub spec: LearnerSpec,
    pub features: Vec<String>,
    pub model: Model,
}

impl TrainedClassifier {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        match &self.model {
            Model::Gbt(m) => m.predict_proba(x),
            Model::LogReg(m) => m.predict_proba(x),
            Model::Rf(m) => m.predict_proba(x),
            Model::AdaBoost(m) => m.predict_proba(x),
            Model::Ann(m) => m.predict_proba(x),
            Model::Svm(m) => m.predict_proba(x),
        }
    }

    pub fn predict_matrix(&self, x: &Matrix) -> Vec<f64> {
        (0..x.rows()).map(|i| self.predict_row(x.row(i))).collect()
    }

    /// One probability per row; the feature names must match training.
    pub fn predict_proba(&self, rows: &Dataset) -> Result<Vec<f64>> {
        self.check_schema(rows)?;
        Ok(self.predict_matrix(&rows.to_matrix()?))
    }

    pub fn check_schema(&self, rows: &Dataset) -> Result<()> {
        let names = rows.feature_names();
        if names != self.features {
            return Err(Error::Schema(format!(
                "model expects features [{}], got [{}]",
                self.features.join(", "),
                names.join(", ")
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let mut v = serde_json::to_value(self)?;
        if let Value::Object(map) = &mut v {
            map.insert("format".into(), Value::from(MODEL_FORMAT));
            map.insert("version".into(), Value::from(MODEL_VERSION));
        }
        crate::data::report_json_string(&v)
    }

    pub fn from_json(s: &str) -> Result<TrainedClassifier> {
        let mut v: Value = serde_json::from_str(s)?;
        let map = v
            .as_object_mut()
            .ok_or_else(|| Error::Schema("model document is not an object".into()))?;
        if map.remove("format").as_ref().and_then(Value::as_str) != Some(MODEL_FORMAT) {
            return Err(Error::Schema(format!("not a {MODEL_FORMAT} document")));
        }
        match map.remove("version").and_then(|v| v.as_u64()) {
            Some(v) if v == MODEL_VERSION as u64 => {}
            other => return Err(Error::Schema(format!("unsupported model version {other:?}"))),
        }
        Ok(serde_json::from_value(v)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<TrainedClassifier> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        TrainedClassifier::from_json(&s)
    }
}

fn check_training_data(d: &Dataset) -> Result<(Matrix, Vec<u8>)> {
    let y = d.require_labels()?.to_vec();
    let pos = y.iter().filter(|&&v| v == 1).count();
    if pos == 0 || pos == y.len() {
        return Err(Error::SingleClass);
    }
    Ok((d.to_matrix()?, y))
}

/// Fits `spec` on a labeled, fully numeric dataset.
pub fn train(spec: &LearnerSpec, d: &Dataset, seed: Seed) -> Result<TrainedClassifier> {
    let (x, y) = check_training_data(d)?;
    let model = match spec {
        LearnerSpec::Gbt(p) => Model::Gbt(gbt::fit_gbt(&x, &y, p, seed)?),
        LearnerSpec::LogReg(p) => Model::LogReg(logreg::fit_logreg(&x, &y, p)?),
        LearnerSpec::Rf(p) => Model::Rf(forest::fit_forest(&x, &y, p, seed)?),
        LearnerSpec::AdaBoost(p) => Model::AdaBoost(adaboost::fit_adaboost(&x, &y, p, seed)?),
        LearnerSpec::Ann(p) => Model::Ann(mlp::fit_mlp(&x, &y, p, seed)?),
        LearnerSpec::Svm(p) => Model::Svm(svm::fit_svm(&x, &y, p)?),
    };
    Ok(TrainedClassifier {
        spec: spec.clone(),
        features: d.feature_names(),
        model,
    })
}

/// Total realized split gain per feature, in column order.
pub fn gain_importance(m: &TrainedClassifier) -> Result<Vec<(String, f64)>> {
    let trees: &[Node] = match &m.model {
        Model::Gbt(e) => &e.trees,
        Model::Rf(f) => &f.trees,
        _ => return Err(Error::NotTreeModel(m.spec.name().into())),
    };
    let mut gains = vec![0.0; m.features.len()];
    for t in trees {
        t.accumulate_gain(&mut gains);
    }
    Ok(m.features.iter().cloned().zip(gains).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn separable() -> Dataset {
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..200 {
            let t = (i % 100) as f64 / 20.0;
            let side = if i < 100 { 1.0 } else { -1.0 };
            rows.push(vec![t - 2.5, side * (1.0 + (i % 3) as f64 * 0.5)]);
            y.push(u8::from(i < 100));
        }
        Dataset::from_matrix(&["a".into(), "b".into()], &Matrix::from_rows(&rows), Some(y)).unwrap()
    }

    #[test]
    fn every_learner_separates_a_margin_fixture() {
        let d = separable();
        for name in MODEL_NAMES {
            let spec = LearnerSpec::default_for(name).unwrap();
            let m = train(&spec, &d, Seed(1)).unwrap();
            let p = m.predict_proba(&d).unwrap();
            assert!(p.iter().all(|v| (0.0..=1.0).contains(v)), "{name}");
            let auc = crate::evaluate::roc_auc(&p, d.labels().unwrap()).unwrap();
            assert_eq!(auc, 1.0, "{name}");
        }
    }

    #[test]
    fn single_split_probabilities() {
        let m = TrainedClassifier {
            spec: LearnerSpec::Gbt(GbtParams::default()),
            features: vec!["f".into()],
            model: Model::Gbt(BoostedEnsemble {
                base_score: 0.0,
                learning_rate: 1.0,
                trees: vec![Node::split(0, 0.0, 1.0, Node::leaf(-1.0, 1.0), Node::leaf(1.0, 1.0))],
                train_logloss: vec![],
            }),
        };
        assert!((m.predict_row(&[-1.0]) - 0.268_941_421_369_995_1).abs() < 1e-12);
        assert!((m.predict_row(&[1.0]) - 0.731_058_578_630_004_9).abs() < 1e-12);
    }

    #[test]
    fn json_round_trip_and_schema_check() {
        let d = separable();
        for name in MODEL_NAMES {
            let m = train(&LearnerSpec::default_for(name).unwrap(), &d, Seed(2)).unwrap();
            let back = TrainedClassifier::from_json(&m.to_json().unwrap()).unwrap();
            assert_eq!(back, m, "{name}");
        }
        let m = train(&LearnerSpec::default_for("logreg").unwrap(), &d, Seed(2)).unwrap();
        let other = d.select_features(&["b", "a"]).unwrap();
        assert!(m.predict_proba(&other).is_err());
        assert!(gain_importance(&m).is_err());
    }

    #[test]
    fn unknown_param_rejected() {
        let v = serde_json::json!({"max_depht": 3});
        assert!(LearnerSpec::from_params("gbt", &v).is_err());
        assert!(LearnerSpec::from_params("xgb", &Value::Null).is_err());
    }
}
