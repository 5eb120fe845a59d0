use vapcast::learners::gbt::{fit_gbt, gbt_leaf_weight, gbt_split_gain, GbtParams};
use vapcast::learners::{gain_importance, train, LearnerSpec, TrainedClassifier};
use vapcast::synth::{bundled, generate_cohort};
use vapcast::Seed;

#[test]
fn full_sample_logloss_never_rises() {
    let c = generate_cohort(&bundled::table2_stats(), &bundled::default_signal(), Seed(7)).unwrap();
    let x = c.dataset.to_matrix().unwrap();
    let params = GbtParams {
        subsample: 1.0,
        colsample_bytree: 1.0,
        ..GbtParams::default()
    };
    let e = fit_gbt(&x, c.dataset.labels().unwrap(), &params, Seed(7)).unwrap();
    assert_eq!(e.train_logloss.len(), 301);
    for w in e.train_logloss.windows(2) {
        assert!(w[1] <= w[0], "{} then {}", w[0], w[1]);
    }
}

#[test]
fn newton_leaf_and_gain_vectors() {
    assert_eq!(gbt_leaf_weight(4.0, 3.0, 0.0, 1.0), -1.0);
    assert_eq!(gbt_leaf_weight(-4.0, 3.0, 0.0, 1.0), 1.0);
    assert_eq!(gbt_leaf_weight(0.1, 9.0, 0.1, 2.0), 0.0);
    let p = GbtParams {
        reg_alpha: 0.0,
        reg_lambda: 1.0,
        min_child_weight: 5.0,
        ..GbtParams::default()
    };
    // 0.5 * (36/7 + 16/7 - 4/13)
    let expect = 0.5 * (36.0 / 7.0 + 16.0 / 7.0 - 4.0 / 13.0);
    assert_eq!(gbt_split_gain(-6.0, 6.0, 4.0, 6.0, &p), Some(expect));
    assert_eq!(gbt_split_gain(-6.0, 4.9, 4.0, 6.0, &p), None);
    assert_eq!(gbt_split_gain(2.0, 6.0, 2.0, 6.0, &p), None);
}

#[test]
fn noise_column_ranks_below_signal() {
    for seed in 1..=10 {
        let c = generate_cohort(&bundled::table2_stats(), &bundled::default_signal(), Seed(seed)).unwrap();
        let d = c.dataset.subset_rows(&c.split.train);
        let m = train(&LearnerSpec::default_for("gbt").unwrap(), &d, Seed(seed)).unwrap();
        let imp = gain_importance(&m).unwrap();
        let of = |name: &str| imp.iter().find(|e| e.0 == name).unwrap().1;
        // platelet carries no weight in the default signal
        assert!(of("platelet") < of("icu_stay_length"), "seed {seed}");
    }
}

#[test]
fn model_file_round_trip_preserves_predictions() {
    let c = generate_cohort(&bundled::table2_stats(), &bundled::default_signal(), Seed(2)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    for name in vapcast::learners::MODEL_NAMES {
        let m = train(&LearnerSpec::default_for(name).unwrap(), &c.dataset, Seed(2)).unwrap();
        let path = dir.path().join(format!("{name}.json"));
        m.save(&path).unwrap();
        let back = TrainedClassifier::load(&path).unwrap();
        assert_eq!(back.predict_proba(&c.dataset).unwrap(), m.predict_proba(&c.dataset).unwrap(), "{name}");
    }
}
