use vapcast::cohort::{select_tbi_cohort, staged_admissions};
use vapcast::evaluate::{chi_square_2x2, cohort_compare, pooled_t_test, SummaryStat, TTestKind};
use vapcast::pipeline::{grid_search, stratified_kfold, stratified_split, GridSpec};
use vapcast::preprocess::{apply_preprocessor, fit_preprocessor, prune_correlated, select_top_k, ScalingMode};
use vapcast::resample::SmoteParams;
use vapcast::synth::{bundled, generate_cohort};
use vapcast::Seed;

#[test]
fn staged_selection_and_split_sizes() {
    let (kept, counts) = select_tbi_cohort(&staged_admissions(Seed(3), 40)).unwrap();
    assert_eq!(kept.len(), 836);
    assert_eq!((counts.no_gcs, counts.no_vitals, counts.vent_lt_48h), (19, 25, 1665));
    let labels: Vec<u8> = (0..836).map(|i| u8::from(i % 5 < 2)).collect();
    let s = stratified_split(&labels, 0.7, Seed(1)).unwrap();
    assert_eq!((s.train.len(), s.test.len()), (585, 251));
}

#[test]
fn generator_is_bit_reproducible() {
    let a = generate_cohort(&bundled::table2_stats(), &bundled::default_signal(), Seed(7)).unwrap();
    let b = generate_cohort(&bundled::table2_stats(), &bundled::default_signal(), Seed(7)).unwrap();
    assert_eq!(a.dataset, b.dataset);
    assert_eq!(a.split, b.split);
    let y = a.dataset.labels().unwrap();
    assert_eq!(y.iter().filter(|&&v| v == 1).count(), 328);
}

#[test]
fn published_table_p_values() {
    // ICU stay: 6.736 ± 7.152 (n=585) vs 6.175 ± 6.487 (n=251), p = 0.286
    let t = pooled_t_test(&SummaryStat::new(6.736, 7.152, 585), &SummaryStat::new(6.175, 6.487, 251)).unwrap();
    assert!((t.p_value - 0.286).abs() <= 0.01, "{}", t.p_value);
    // neurosurgery 31.8 % vs 28.3 %, p = 0.314
    let c = chi_square_2x2(186, 585, 71, 251).unwrap();
    assert!((c.p_value - 0.314).abs() <= 0.02, "{}", c.p_value);
}

#[test]
fn synthetic_split_is_balanced_on_marginals() {
    let c = generate_cohort(&bundled::table2_stats(), &bundled::default_signal(), Seed(4)).unwrap();
    let rows = cohort_compare(
        &c.dataset.subset_rows(&c.split.train),
        &c.dataset.subset_rows(&c.split.test),
        TTestKind::Pooled,
    )
    .unwrap();
    assert_eq!(rows.len(), 15);
    assert!(rows.iter().all(|r| (0.0..=1.0).contains(&r.p_value)));
    assert_eq!((rows[0].train.n, rows[0].test_set.n), (585, 251));
}

#[test]
fn preprocessing_is_fit_on_training_rows_only() {
    let c = generate_cohort(&bundled::table2_stats(), &bundled::default_signal(), Seed(5)).unwrap();
    let train = c.dataset.subset_rows(&c.split.train);
    let test = c.dataset.subset_rows(&c.split.test);
    let state = fit_preprocessor(&train, ScalingMode::MinMax).unwrap();
    let tr = apply_preprocessor(&state, &train).unwrap().to_matrix().unwrap();
    for j in 0..tr.cols() {
        let col = tr.column(j);
        assert!(col.iter().all(|v| (0.0..=1.0).contains(v)));
    }
    assert!(apply_preprocessor(&state, &test).unwrap().is_scaled());
    let (pruned, report) = prune_correlated(&train, 0.9).unwrap();
    assert_eq!(pruned.n_features() + report.dropped_correlated.len(), 15);
    let top = select_top_k(&pruned, 5, Seed(5)).unwrap();
    assert_eq!(top.selected.len(), 5);
}

#[test]
fn bundled_grid_ranks_every_point() {
    let c = generate_cohort(&bundled::table2_stats(), &bundled::default_signal(), Seed(6)).unwrap();
    let train = c.dataset.subset_rows(&c.split.train);
    let mut grid: GridSpec = serde_json::from_str(bundled::DEFAULT_GRID_JSON).unwrap();
    grid.base.insert("n_estimators".into(), 40.into());
    let plan = stratified_kfold(train.labels().unwrap(), 3, Seed(6)).unwrap();
    let r = grid_search(&grid, &train, &plan, SmoteParams::default(), Seed(6)).unwrap();
    assert_eq!(r.leaderboard.len(), 4);
    assert!(r.leaderboard.windows(2).all(|w| w[0].mean_auc >= w[1].mean_auc));
    assert_eq!(r.best_score, r.leaderboard[0].mean_auc);
}

/// Normal(mu, sd) conditioned on x >= 0: mu + sd * phi(a) / (1 - Phi(a)), a = -mu/sd.
fn truncated_mean(mu: f64, sd: f64) -> f64 {
    let a = -mu / sd;
    let phi = (-0.5 * a * a).exp() / (2.0 * std::f64::consts::PI).sqrt();
    // 1 - Phi(a) = Q(1/2, a^2/2)/2 for a <= 0
    let upper = if a <= 0.0 {
        1.0 - 0.5 * vapcast::special::gamma_ur(0.5, a * a / 2.0)
    } else {
        0.5 * vapcast::special::gamma_ur(0.5, a * a / 2.0)
    };
    mu + sd * phi / upper
}

#[test]
fn continuous_columns_follow_the_truncated_normal() {
    let stats = vapcast::synth::CohortStatistics {
        n_train: 14000,
        n_test: 6000,
        ..bundled::table2_stats()
    };
    let c = generate_cohort(&stats, &bundled::default_signal(), Seed(11)).unwrap();
    let m = c.dataset.to_matrix().unwrap();
    let n = m.rows() as f64;
    for (j, f) in stats.features.iter().enumerate() {
        let col = m.column(j);
        let mean = col.iter().sum::<f64>() / n;
        match *f {
            vapcast::synth::FeatureStat::Continuous { mean: mu, std: sd, .. } => {
                let expect = truncated_mean(mu, sd);
                // 5 standard errors of the sample mean
                assert!((mean - expect).abs() < 5.0 * sd / n.sqrt(), "{}: {mean} vs {expect}", f.name());
                assert!(col.iter().all(|&v| v >= 0.0));
            }
            vapcast::synth::FeatureStat::Binary { rate, .. } => {
                assert!((mean - rate).abs() < 5.0 * (rate * (1.0 - rate) / n).sqrt(), "{}", f.name());
            }
        }
    }
}
