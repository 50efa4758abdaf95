use ndarray::Axis;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CleansePolicy {
    #[default]
    DropRows,
    ImputeMean,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CleanseReport {
    pub rows_in: usize,
    pub dropped_no_targets: usize,
    pub dropped_missing_features: usize,
    pub imputed_cells: usize,
    /// Per-feature means used for imputation (empty under `drop_rows`).
    pub means: Vec<f64>,
}

/// Removes rows with every target missing, then drops or mean-imputes rows
/// with missing features.
pub fn cleanse<T: Scalar>(
    dataset: &Dataset<T>,
    policy: CleansePolicy,
) -> Result<(Dataset<T>, CleanseReport)> {
    let mut report = CleanseReport {
        rows_in: dataset.n_rows(),
        ..Default::default()
    };
    let with_targets: Vec<usize> = (0..dataset.n_rows())
        .filter(|&i| dataset.n_targets() == 0 || dataset.y.row(i).iter().any(|v| !v.is_nan()))
        .collect();
    report.dropped_no_targets = dataset.n_rows() - with_targets.len();
    let mut out = dataset.select_rows(&with_targets);
    match policy {
        CleansePolicy::DropRows => {
            let keep: Vec<usize> = (0..out.n_rows())
                .filter(|&i| out.x.row(i).iter().all(|v| !v.is_nan()))
                .collect();
            report.dropped_missing_features = out.n_rows() - keep.len();
            out = out.select_rows(&keep);
        }
        CleansePolicy::ImputeMean => {
            for (j, mut col) in out.x.axis_iter_mut(Axis(1)).enumerate() {
                let observed: Vec<T> = col.iter().copied().filter(|v| !v.is_nan()).collect();
                if observed.is_empty() {
                    return Err(Error::invalid(format!(
                        "feature `{}` is entirely missing; mean undefined",
                        dataset.features[j].name
                    )));
                }
                let mean = observed.iter().copied().sum::<T>() / T::of_usize(observed.len());
                for v in col.iter_mut().filter(|v| v.is_nan()) {
                    *v = mean;
                    report.imputed_cells += 1;
                }
                report.means.push(mean.as_f64());
            }
        }
    }
    Ok((out, report))
}
