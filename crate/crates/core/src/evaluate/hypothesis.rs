//! Two-sample tests for comparing the training and test cohorts.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::data::{fmt_g17, Cell, Dataset, FeatureKind};
use crate::error::{Error, Result};
use crate::special::{chi2_sf, student_t_two_sided};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStat {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl SummaryStat {
    pub fn new(mean: f64, std: f64, n: usize) -> Self {
        SummaryStat { mean, std, n }
    }

    /// Mean and sample standard deviation (n − 1 denominator).
    pub fn of(values: &[f64]) -> Result<Self> {
        let n = values.len();
        if n < 2 {
            return Err(Error::InvalidInput(format!("need at least 2 values, got {n}")));
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        Ok(SummaryStat { mean, std: var.sqrt(), n })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub statistic: f64,
    pub p_value: f64,
    pub df: f64,
}

fn check_n(s: &SummaryStat) -> Result<()> {
    if s.n < 2 || s.std < 0.0 {
        return Err(Error::InvalidInput(format!(
            "summary needs n >= 2 and std >= 0 (n = {}, std = {})",
            s.n, s.std
        )));
    }
    Ok(())
}

fn t_outcome(diff: f64, se: f64, df: f64) -> Result<TestOutcome> {
    if se == 0.0 {
        if diff == 0.0 {
            return Ok(TestOutcome { statistic: 0.0, p_value: 1.0, df });
        }
        return Err(Error::Degenerate("zero variance with unequal means".into()));
    }
    let t = diff / se;
    Ok(TestOutcome {
        statistic: t,
        p_value: student_t_two_sided(t, df),
        df,
    })
}

/// Two-sided Student t with pooled variance, df = n_a + n_b − 2.
pub fn pooled_t_test(a: &SummaryStat, b: &SummaryStat) -> Result<TestOutcome> {
    check_n(a)?;
    check_n(b)?;
    let (na, nb) = (a.n as f64, b.n as f64);
    let df = na + nb - 2.0;
    let pooled = ((na - 1.0) * a.std * a.std + (nb - 1.0) * b.std * b.std) / df;
    let se = (pooled * (1.0 / na + 1.0 / nb)).sqrt();
    t_outcome(a.mean - b.mean, se, df)
}

/// Two-sided Welch t with Welch–Satterthwaite degrees of freedom.
pub fn welch_t_test(a: &SummaryStat, b: &SummaryStat) -> Result<TestOutcome> {
    check_n(a)?;
    check_n(b)?;
    let va = a.std * a.std / a.n as f64;
    let vb = b.std * b.std / b.n as f64;
    let se = (va + vb).sqrt();
    let df = if se == 0.0 {
        (a.n + b.n - 2) as f64
    } else {
        (va + vb).powi(2) / (va * va / (a.n - 1) as f64 + vb * vb / (b.n - 1) as f64)
    };
    t_outcome(a.mean - b.mean, se, df)
}

/// Pearson chi-square on the 2×2 table of (positive, negative) counts in two
/// groups, no continuity correction, df = 1.
pub fn chi_square_2x2(pos_a: usize, n_a: usize, pos_b: usize, n_b: usize) -> Result<TestOutcome> {
    if pos_a > n_a || pos_b > n_b {
        return Err(Error::InvalidInput("positive count exceeds group size".into()));
    }
    let observed = [
        [pos_a as f64, (n_a - pos_a) as f64],
        [pos_b as f64, (n_b - pos_b) as f64],
    ];
    let rows = [n_a as f64, n_b as f64];
    let cols = [(pos_a + pos_b) as f64, (n_a + n_b - pos_a - pos_b) as f64];
    if rows.contains(&0.0) || cols.contains(&0.0) {
        return Err(Error::Degenerate("2x2 table has a zero marginal".into()));
    }
    let total = rows[0] + rows[1];
    let mut chi2 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let expected = rows[i] * cols[j] / total;
            chi2 += (observed[i][j] - expected).powi(2) / expected;
        }
    }
    Ok(TestOutcome {
        statistic: chi2,
        p_value: chi2_sf(chi2, 1.0),
        df: 1.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TTestKind {
    Pooled,
    Welch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortRow {
    pub feature: String,
    /// "t_pooled", "t_welch" or "chi_square".
    pub test: String,
    pub train: SummaryStat,
    pub test_set: SummaryStat,
    pub statistic: f64,
    pub p_value: f64,
}

fn observed(col: &[Cell]) -> Vec<f64> {
    col.iter().filter_map(|c| c.value()).collect()
}

/// Compares every feature of `train` against `test`, in column order:
/// t-test for numeric columns, chi-square for binary ones.
pub fn cohort_compare(train: &Dataset, test: &Dataset, kind: TTestKind) -> Result<Vec<CohortRow>> {
    if train.specs() != test.specs() {
        return Err(Error::Schema("train and test schemas differ".into()));
    }
    let mut rows = Vec::with_capacity(train.n_features());
    for (j, spec) in train.specs().iter().enumerate() {
        let a = observed(train.column(j));
        let b = observed(test.column(j));
        let (sa, sb) = (SummaryStat::of(&a)?, SummaryStat::of(&b)?);
        let (test_name, outcome) = match spec.kind {
            FeatureKind::Binary => {
                let pa = a.iter().filter(|&&v| v == 1.0).count();
                let pb = b.iter().filter(|&&v| v == 1.0).count();
                ("chi_square", chi_square_2x2(pa, a.len(), pb, b.len())?)
            }
            FeatureKind::Numeric => match kind {
                TTestKind::Pooled => ("t_pooled", pooled_t_test(&sa, &sb)?),
                TTestKind::Welch => ("t_welch", welch_t_test(&sa, &sb)?),
            },
            FeatureKind::Categorical { .. } => {
                return Err(Error::InvalidInput(format!(
                    "`{}` is categorical; encode it before comparing cohorts",
                    spec.name
                )))
            }
        };
        rows.push(CohortRow {
            feature: spec.name.clone(),
            test: test_name.into(),
            train: sa,
            test_set: sb,
            statistic: outcome.statistic,
            p_value: outcome.p_value,
        });
    }
    Ok(rows)
}

pub fn write_cohort_table_csv<W: Write>(rows: &[CohortRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "feature",
        "test",
        "train_n",
        "train_mean",
        "train_std",
        "test_n",
        "test_mean",
        "test_std",
        "statistic",
        "p_value",
    ])?;
    for r in rows {
        w.write_record([
            r.feature.clone(),
            r.test.clone(),
            r.train.n.to_string(),
            fmt_g17(r.train.mean),
            fmt_g17(r.train.std),
            r.test_set.n.to_string(),
            fmt_g17(r.test_set.mean),
            fmt_g17(r.test_set.std),
            fmt_g17(r.statistic),
            fmt_g17(r.p_value),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}
