//! Metric suite, ROC export and cohort statistics.

mod hypothesis;
mod metrics;
mod roc;

pub use hypothesis::{
    chi_square_2x2, cohort_compare, pooled_t_test, welch_t_test, write_cohort_table_csv, CohortRow,
    SummaryStat, TTestKind, TestOutcome,
};
pub use metrics::{
    metric_report, BootstrapConfig, Confusion, MetricEstimate, MetricReport, Metrics,
    DEFAULT_BOOTSTRAP_REPLICATES, DEFAULT_THRESHOLD, METRIC_NAMES,
};
pub use roc::{roc_auc, roc_points, trapezoid_area, RocPoint};

use std::io::Write;

use crate::data::fmt_g17;
use crate::error::{Error, Result};

/// `threshold,fpr,tpr` rows; the leading point's threshold prints as `inf`.
pub fn write_roc_csv<W: Write>(points: &[RocPoint], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["threshold", "fpr", "tpr"])?;
    for p in points {
        w.write_record([fmt_g17(p.threshold), fmt_g17(p.fpr), fmt_g17(p.tpr)])?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

/// Minimal SVG: one polyline per named curve in the unit square.
pub fn roc_svg(curves: &[(&str, &[RocPoint])]) -> String {
    const SIZE: f64 = 400.0;
    const PAD: f64 = 40.0;
    const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{w}\" viewBox=\"0 0 {w} {w}\">\n",
        w = SIZE + 2.0 * PAD
    );
    s += &format!(
        "<rect x=\"{PAD}\" y=\"{PAD}\" width=\"{SIZE}\" height=\"{SIZE}\" fill=\"none\" stroke=\"#999\"/>\n"
    );
    s += &format!(
        "<line x1=\"{PAD}\" y1=\"{}\" x2=\"{}\" y2=\"{PAD}\" stroke=\"#ccc\" stroke-dasharray=\"4\"/>\n",
        PAD + SIZE,
        PAD + SIZE
    );
    for (k, (name, pts)) in curves.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let coords: Vec<String> = pts
            .iter()
            .map(|p| format!("{:.2},{:.2}", PAD + p.fpr * SIZE, PAD + (1.0 - p.tpr) * SIZE))
            .collect();
        s += &format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            coords.join(" ")
        );
        s += &format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"{color}\">{name}</text>\n",
            PAD + SIZE * 0.6,
            PAD + SIZE * 0.7 + 14.0 * k as f64
        );
    }
    s += "</svg>\n";
    s
}
