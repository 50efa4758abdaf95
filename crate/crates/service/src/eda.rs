//! Exploratory summaries: equal-width histogram and Tukey boxplot.

use serde::{Deserialize, Serialize};
use telewb_core::stats::quantile_sorted;

pub const DEFAULT_BINS: usize = 20;

fn default_bins() -> usize {
    DEFAULT_BINS
}

/// Columns of a finished run's dataset over an optional half-open time
/// range, or one inline series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdaRequest {
    #[serde(default)]
    pub run: Option<String>,
    #[serde(default)]
    pub columns: Vec<String>,
    #[serde(default)]
    pub from: Option<i64>,
    #[serde(default)]
    pub to: Option<i64>,
    #[serde(default)]
    pub values: Option<Vec<Option<f64>>>,
    #[serde(default = "default_bins")]
    pub bins: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `bins + 1` edges; the last bin is closed.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxPlot {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub lower_whisker: f64,
    pub upper_whisker: f64,
    pub outliers: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdaSummary {
    pub column: String,
    pub n: usize,
    pub n_missing: usize,
    pub histogram: Option<Histogram>,
    pub boxplot: Option<BoxPlot>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdaReport {
    pub schema_version: u32,
    /// Rows in range.
    pub n_rows: usize,
    pub subset: Option<telewb_core::dataset::Interval>,
    pub variables: Vec<EdaSummary>,
}

pub fn histogram(sorted: &[f64], bins: usize) -> Option<Histogram> {
    let (&lo, &hi) = (sorted.first()?, sorted.last()?);
    let (lo, hi) = if lo == hi { (lo - 0.5, hi + 0.5) } else { (lo, hi) };
    let width = (hi - lo) / bins as f64;
    let mut edges: Vec<f64> = (0..bins).map(|i| lo + width * i as f64).collect();
    edges.push(hi);
    let mut counts = vec![0; bins];
    for &v in sorted {
        let i = (((v - lo) / width).floor() as usize).min(bins - 1);
        counts[i] += 1;
    }
    Some(Histogram { edges, counts })
}

/// Quartiles by linear interpolation; whiskers at the most extreme values
/// within 1.5 IQR of the box.
pub fn boxplot(sorted: &[f64]) -> Option<BoxPlot> {
    let q1 = quantile_sorted(sorted, 0.25)?;
    let median = quantile_sorted(sorted, 0.5)?;
    let q3 = quantile_sorted(sorted, 0.75)?;
    let iqr = q3 - q1;
    let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let inside = || sorted.iter().copied().filter(|v| *v >= lo_fence && *v <= hi_fence);
    Some(BoxPlot {
        min: sorted[0],
        q1,
        median,
        q3,
        max: sorted[sorted.len() - 1],
        lower_whisker: inside().next().unwrap_or(q1),
        upper_whisker: inside().last().unwrap_or(q3),
        outliers: sorted
            .iter()
            .copied()
            .filter(|v| *v < lo_fence || *v > hi_fence)
            .collect(),
    })
}

/// Summary of `values`; NaN counts as missing.
pub fn describe(column: String, values: &[f64], bins: usize) -> Result<EdaSummary, String> {
    if bins == 0 {
        return Err("bins must be positive".into());
    }
    let mut sorted: Vec<f64> = values.iter().copied().filter(|v| !v.is_nan()).collect();
    if sorted.iter().any(|v| v.is_infinite()) {
        return Err("values must be finite".into());
    }
    sorted.sort_by(f64::total_cmp);
    Ok(EdaSummary {
        column,
        n: sorted.len(),
        n_missing: values.len() - sorted.len(),
        histogram: histogram(&sorted, bins),
        boxplot: boxplot(&sorted),
    })
}
