use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vapcast::data::{Dataset, Matrix, Provenance};
use vapcast::learners::LearnerSpec;
use vapcast::pipeline::{cv_auc_with_smote, stratified_kfold};
use vapcast::resample::{smote_oversample, SmoteParams};
use vapcast::Seed;

fn random_labeled(rng: &mut ChaCha8Rng) -> Dataset {
    let n = rng.gen_range(12..60);
    let p = rng.gen_range(1..5);
    let minority = rng.gen_range(2..n / 2);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..p).map(|_| rng.gen_range(-3.0..3.0)).collect())
        .collect();
    let mut y = vec![0u8; n];
    for v in y.iter_mut().take(minority) {
        *v = 1;
    }
    let names: Vec<String> = (0..p).map(|j| format!("f{j}")).collect();
    Dataset::from_matrix(&names, &Matrix::from_rows(&rows), Some(y)).unwrap()
}

fn brute_neighbors(pts: &[&[f64]], i: usize, k: usize) -> Vec<usize> {
    let mut d: Vec<(f64, usize)> = (0..pts.len())
        .filter(|&j| j != i)
        .map(|j| (pts[i].iter().zip(pts[j]).map(|(a, b)| (a - b) * (a - b)).sum(), j))
        .collect();
    d.sort_by(|a, b| a.partial_cmp(b).unwrap());
    d.into_iter().take(k).map(|e| e.1).collect()
}

fn on_segment(x: &[f64], a: &[f64], b: &[f64]) -> bool {
    // best u by projection, then check every coordinate
    let ab: f64 = a.iter().zip(b).map(|(p, q)| (q - p) * (q - p)).sum();
    let u = if ab == 0.0 {
        0.0
    } else {
        (x.iter().zip(a).zip(b).map(|((v, p), q)| (v - p) * (q - p)).sum::<f64>() / ab).clamp(0.0, 1.0)
    };
    x.iter().zip(a).zip(b).all(|((v, p), q)| (v - (p + u * (q - p))).abs() <= 1e-9)
}

#[test]
fn synthetic_rows_lie_on_neighbor_segments() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for case in 0..50 {
        let d = random_labeled(&mut rng);
        let k = rng.gen_range(1..7);
        let out = smote_oversample(&d, SmoteParams { k_neighbors: k }, Seed(case)).unwrap();
        let y = out.labels().unwrap();
        let pos = y.iter().filter(|&&v| v == 1).count();
        assert_eq!(2 * pos, y.len(), "case {case}");

        let m = d.to_matrix().unwrap();
        let minority: Vec<usize> = (0..d.n_rows()).filter(|&i| d.labels().unwrap()[i] == 1).collect();
        let pts: Vec<&[f64]> = minority.iter().map(|&i| m.row(i)).collect();
        let k_eff = k.min(pts.len() - 1);
        let om = out.to_matrix().unwrap();
        for i in d.n_rows()..out.n_rows() {
            assert_eq!(out.provenance()[i], Provenance::Synthetic);
            let x = om.row(i);
            let found = (0..pts.len())
                .any(|a| brute_neighbors(&pts, a, k_eff).into_iter().any(|b| on_segment(x, pts[a], pts[b])));
            assert!(found, "case {case}, row {i}");
        }
    }
}

#[test]
fn validation_folds_never_see_synthetic_rows() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for case in 0..10 {
        let n = 80;
        let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)]).collect();
        let y: Vec<u8> = rows.iter().map(|r| u8::from(r[0] + 0.3 * r[1] > 0.95)).collect();
        let d = Dataset::from_matrix(&["a".into(), "b".into()], &Matrix::from_rows(&rows), Some(y)).unwrap();
        let plan = stratified_kfold(d.labels().unwrap(), 5, Seed(case)).unwrap();
        for name in ["logreg", "rf"] {
            let spec = LearnerSpec::default_for(name).unwrap();
            let cv = cv_auc_with_smote(&spec, &d, &plan, SmoteParams::default(), Seed(case)).unwrap();
            assert_eq!(cv.synthetic_in_validation, 0);
            assert!(cv.synthetic_in_training.iter().all(|&s| s > 0));
            assert_eq!(cv.per_fold.len(), 5);
        }
    }
}
