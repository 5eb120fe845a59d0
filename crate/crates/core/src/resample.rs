//! SMOTE oversampling of the minority class.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FeatureKind, FeatureSpec, Matrix, Provenance};
use crate::error::{Error, Result};
use crate::seed::Seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoteParams {
    pub k_neighbors: usize,
}

impl Default for SmoteParams {
    fn default() -> Self {
        SmoteParams { k_neighbors: 5 }
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// The `k` nearest other rows of `points` to row `i`, by Euclidean distance,
/// ties to the lower index.
pub fn nearest_neighbors(points: &Matrix, i: usize, k: usize) -> Vec<usize> {
    let mut cand: Vec<(f64, usize)> = (0..points.rows())
        .filter(|&j| j != i)
        .map(|j| (sq_dist(points.row(i), points.row(j)), j))
        .collect();
    cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    cand.into_iter().take(k).map(|(_, j)| j).collect()
}

/// Adds synthetic minority rows until the classes are balanced. Originals
/// keep their order and are followed by synthetic rows ordered by base row.
pub fn smote_oversample(d: &Dataset, p: SmoteParams, seed: Seed) -> Result<Dataset> {
    let y = d.require_labels()?;
    let x = d.to_matrix()?;
    let pos = y.iter().filter(|&&v| v == 1).count();
    let neg = y.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    if pos == neg {
        return Ok(d.clone());
    }
    let minority_label = u8::from(pos < neg);
    let minority: Vec<usize> = (0..y.len()).filter(|&i| y[i] == minority_label).collect();
    let m = minority.len();
    if m < 2 {
        return Err(Error::InvalidInput(format!("minority class has {m} row; SMOTE needs at least 2")));
    }
    if p.k_neighbors == 0 {
        return Err(Error::InvalidInput("k_neighbors must be positive".into()));
    }
    let k = if p.k_neighbors >= m {
        log::warn!("k_neighbors = {} with {m} minority rows; using k = {}", p.k_neighbors, m - 1);
        m - 1
    } else {
        p.k_neighbors
    };
    let need = pos.max(neg) - m;
    let points = x.select_rows(&minority);
    let neighbors: Vec<Vec<usize>> = {
        let nn = |i: usize| nearest_neighbors(&points, i, k);
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            (0..m).into_par_iter().map(nn).collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            (0..m).map(nn).collect()
        }
    };

    let mut rng = seed.rng();
    let cols = x.cols();
    let mut synth: Vec<(usize, usize, Vec<f64>)> = Vec::with_capacity(need);
    for s in 0..need {
        let base = s % m;
        let nb = neighbors[base][rng.gen_range(0..k)];
        let u: f64 = rng.gen();
        let (a, b) = (points.row(base), points.row(nb));
        let row = (0..cols).map(|j| a[j] + u * (b[j] - a[j])).collect();
        synth.push((base, s, row));
    }
    synth.sort_by_key(|e| (e.0, e.1));
    let data: Vec<f64> = synth.into_iter().flat_map(|e| e.2).collect();
    let rows = Matrix::new(need, cols, data);

    let (specs, columns, labels, provenance) = d.clone().into_parts();
    // interpolated binary columns are no longer 0/1
    let specs = specs
        .into_iter()
        .map(|s| match s.kind {
            FeatureKind::Binary => FeatureSpec::numeric(s.name, s.units),
            _ => s,
        })
        .collect();
    let mut out = Dataset::with_provenance(specs, columns, labels, provenance)?.mark_scaled(d.is_scaled());
    out.append_numeric_rows(&rows, &vec![minority_label; need], Provenance::Synthetic);
    Ok(out)
}
