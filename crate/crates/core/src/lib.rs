//! Ventilator-associated pneumonia risk modelling for TBI cohorts: cohort
//! labeling, synthetic cohorts, preprocessing, SMOTE, six classifiers,
//! cross-validated tuning and ablation, evaluation and TreeSHAP.

pub mod cohort;
pub mod data;
pub mod error;
pub mod evaluate;
pub mod explain;
pub mod learners;
pub mod pipeline;
pub mod preprocess;
pub mod resample;
pub mod seed;
pub mod special;
pub mod synth;

pub use error::{Error, Result};
pub use seed::Seed;
