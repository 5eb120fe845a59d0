use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vapcast::explain::{exhaustive_shap_ensemble, shap_summary, tree_shap, tree_shap_row, TreeEnsemble};
use vapcast::learners::{train, LearnerSpec, Node};
use vapcast::synth::{bundled, generate_cohort};
use vapcast::Seed;

fn random_tree(rng: &mut ChaCha8Rng, p: usize, depth: usize) -> Node {
    if depth == 0 || rng.gen_bool(0.2) {
        return Node::leaf(rng.gen_range(-2.0..2.0), rng.gen_range(0.5..20.0));
    }
    let f = rng.gen_range(0..p);
    let t = rng.gen_range(-1.0..1.0);
    let left = random_tree(rng, p, depth - 1);
    let right = random_tree(rng, p, depth - 1);
    Node::split(f, t, 1.0, left, right)
}

fn random_ensemble(rng: &mut ChaCha8Rng) -> (TreeEnsemble, usize) {
    let p = rng.gen_range(1..=6);
    let trees = (0..rng.gen_range(1..=5))
        .map(|_| {
            let depth = rng.gen_range(1..=3);
            random_tree(rng, p, depth)
        })
        .collect();
    let ens = TreeEnsemble {
        trees,
        scale: rng.gen_range(0.01..1.0),
        offset: rng.gen_range(-1.0..1.0),
    };
    (ens, p)
}

#[test]
fn tree_shap_equals_exhaustive_on_random_ensembles() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..250 {
        let (ens, p) = random_ensemble(&mut rng);
        for _ in 0..6 {
            let x: Vec<f64> = (0..p).map(|_| rng.gen_range(-1.2..1.2)).collect();
            let fast = tree_shap_row(&ens, &x, p);
            let slow = exhaustive_shap_ensemble(&ens, &x).unwrap();
            for j in 0..p {
                assert!((fast[j] - slow[j]).abs() <= 1e-9, "{fast:?} vs {slow:?}");
            }
            let total: f64 = fast.iter().sum();
            assert!((ens.base_value() + total - ens.margin(&x)).abs() <= 1e-9);
        }
    }
}

#[test]
fn unused_feature_gets_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let (ens, p) = random_ensemble(&mut rng);
        let x: Vec<f64> = (0..=p).map(|_| rng.gen_range(-1.0..1.0)).collect();
        // column p never appears in any tree
        assert_eq!(tree_shap_row(&ens, &x, p + 1)[p], 0.0);
    }
}

#[test]
fn symmetric_duplicates_share_credit() {
    let half = |f: usize, g: usize| {
        Node::split(
            f,
            0.0,
            1.0,
            Node::split(g, 0.0, 1.0, Node::leaf(-1.0, 4.0), Node::leaf(0.5, 2.0)),
            Node::split(g, 0.0, 1.0, Node::leaf(0.5, 2.0), Node::leaf(2.0, 4.0)),
        )
    };
    let ens = TreeEnsemble {
        trees: vec![half(0, 1), half(1, 0)],
        scale: 1.0,
        offset: 0.0,
    };
    for v in [-0.7, 0.3] {
        let phi = tree_shap_row(&ens, &[v, v], 2);
        assert!((phi[0] - phi[1]).abs() <= 1e-9, "{phi:?}");
    }
}

#[test]
fn trained_models_are_locally_accurate() {
    let c = generate_cohort(&bundled::table2_stats(), &bundled::default_signal(), Seed(7)).unwrap();
    let train_set = c.dataset.subset_rows(&c.split.train);
    let test_set = c.dataset.subset_rows(&c.split.test);
    for name in ["gbt", "rf"] {
        let m = train(&LearnerSpec::default_for(name).unwrap(), &train_set, Seed(3)).unwrap();
        let s = tree_shap(&m, &test_set).unwrap();
        assert_eq!(s.values.rows(), 251);
        let ens = TreeEnsemble::from_model(&m).unwrap();
        for i in 0..s.values.rows() {
            let total: f64 = s.values.row(i).iter().sum();
            assert!((s.base_value + total - ens.margin(s.inputs.row(i))).abs() <= 1e-6);
        }
        assert_eq!(shap_summary(&s).unwrap().points.len(), 251 * 15);
    }
}

#[test]
fn non_tree_model_is_rejected() {
    let c = generate_cohort(&bundled::table2_stats(), &bundled::default_signal(), Seed(1)).unwrap();
    let m = train(&LearnerSpec::default_for("logreg").unwrap(), &c.dataset, Seed(1)).unwrap();
    assert!(tree_shap(&m, &c.dataset).is_err());
}

#[test]
fn signal_features_lead_the_ranking() {
    let signal = ["icu_stay_length", "tracheostomy", "blood_urea_nitrogen"];
    for seed in 1..=10 {
        let c = generate_cohort(&bundled::table2_stats(), &bundled::default_signal(), Seed(seed)).unwrap();
        let train_set = c.dataset.subset_rows(&c.split.train);
        let test_set = c.dataset.subset_rows(&c.split.test);
        let m = train(&LearnerSpec::default_for("gbt").unwrap(), &train_set, Seed(seed)).unwrap();
        let summary = shap_summary(&tree_shap(&m, &test_set).unwrap()).unwrap();
        let top: Vec<&str> = summary.ranking[..4].iter().map(|r| r.feature.as_str()).collect();
        for f in signal {
            assert!(top.contains(&f), "seed {seed}: {top:?}");
        }
    }
}
