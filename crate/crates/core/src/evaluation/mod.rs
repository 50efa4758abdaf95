//! Splitting, masked error metrics, exclusions and run comparison.

pub mod whatif;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use whatif::{compare, Comparison, RunSummary, WhatIfSpec};

use crate::dataset::{Dataset, Interval};
use crate::error::{Error, Result};
use crate::learners::{train, ModelSpec, TrainedModel};
use crate::scalar::Scalar;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case", deny_unknown_fields)]
pub enum SplitSpec {
    /// Train on the first `fraction` of the rows (temporal) or a seeded
    /// shuffled subset.
    Holdout {
        fraction: f64,
        #[serde(default = "yes")]
        temporal: bool,
    },
    Kfold {
        k: usize,
        #[serde(default = "yes")]
        temporal: bool,
    },
}

fn yes() -> bool {
    true
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec::Holdout {
            fraction: 0.8,
            temporal: true,
        }
    }
}

impl SplitSpec {
    pub fn is_temporal(&self) -> bool {
        match *self {
            SplitSpec::Holdout { temporal, .. } | SplitSpec::Kfold { temporal, .. } => temporal,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SplitSpec::Holdout { fraction, .. } if !(fraction > 0.0 && fraction < 1.0) => Err(
                Error::invalid(format!("holdout fraction must be in (0, 1), got {fraction}")),
            ),
            SplitSpec::Kfold { k, .. } if k < 2 => Err(Error::invalid("kfold needs k >= 2")),
            _ => Ok(()),
        }
    }

    /// Metafile warning for shuffled splits of time-ordered data.
    pub fn leakage_warning(&self) -> Option<String> {
        (!self.is_temporal()).then(|| {
            "shuffled split on time-ordered data: test rows interleave with training rows (possible leakage)"
                .to_owned()
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Disjoint, covering partitions of `n` rows. Temporal splits keep row
/// order; shuffled ones permute with `seed` first.
pub fn split(n: usize, spec: &SplitSpec, seed: u64) -> Result<Vec<Partition>> {
    spec.validate()?;
    if n < 2 {
        return Err(Error::invalid(format!("cannot split {n} rows")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    if !spec.is_temporal() {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    let sorted = |mut v: Vec<usize>| {
        v.sort_unstable();
        v
    };
    match *spec {
        SplitSpec::Holdout { fraction, .. } => {
            let cut = (fraction * n as f64).round() as usize;
            let cut = cut.clamp(1, n - 1);
            Ok(vec![Partition {
                train: sorted(order[..cut].to_vec()),
                test: sorted(order[cut..].to_vec()),
            }])
        }
        SplitSpec::Kfold { k, .. } => {
            if k > n {
                return Err(Error::invalid(format!("kfold k = {k} exceeds {n} rows")));
            }
            let (base, extra) = (n / k, n % k);
            let mut start = 0;
            let mut parts = Vec::with_capacity(k);
            for f in 0..k {
                let len = base + usize::from(f < extra);
                let test = order[start..start + len].to_vec();
                let train = order[..start].iter().chain(&order[start + len..]).copied().collect();
                parts.push(Partition {
                    train: sorted(train),
                    test: sorted(test),
                });
                start += len;
            }
            Ok(parts)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetMetrics {
    pub name: String,
    /// Rows with the target observed.
    pub count: usize,
    /// `None` when no row is observed.
    pub rmse: Option<f64>,
    pub mae: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub schema_version: u32,
    pub targets: Vec<TargetMetrics>,
    /// Means over targets with defined metrics.
    pub mean_rmse: Option<f64>,
    pub mean_mae: Option<f64>,
}

impl MetricReport {
    pub fn target(&self, name: &str) -> Option<&TargetMetrics> {
        self.targets.iter().find(|t| t.name == name)
    }
}

/// RMSE and MAE per target over rows where the truth is observed.
pub fn masked_metrics<T: Scalar>(truth: &Array2<T>, pred: &Array2<T>, names: &[String]) -> MetricReport {
    let targets: Vec<TargetMetrics> = names
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let (mut count, mut se, mut ae) = (0usize, 0.0f64, 0.0f64);
            for (t, p) in truth.column(k).iter().zip(pred.column(k)) {
                if t.is_nan() {
                    continue;
                }
                let e = p.as_f64() - t.as_f64();
                count += 1;
                se += e * e;
                ae += e.abs();
            }
            let defined = count > 0;
            TargetMetrics {
                name: name.clone(),
                count,
                rmse: defined.then(|| (se / count as f64).sqrt()),
                mae: defined.then(|| ae / count as f64),
            }
        })
        .collect();
    let mean = |f: fn(&TargetMetrics) -> Option<f64>| {
        let v: Vec<f64> = targets.iter().filter_map(f).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    };
    MetricReport {
        schema_version: REPORT_SCHEMA_VERSION,
        mean_rmse: mean(|t| t.rmse),
        mean_mae: mean(|t| t.mae),
        targets,
    }
}

pub fn evaluate<T: Scalar>(model: &TrainedModel<T>, ds: &Dataset<T>) -> Result<MetricReport> {
    if ds.targets != model.target_names {
        return Err(Error::invalid("dataset targets do not match the model"));
    }
    let pred = model.predict(ds)?;
    Ok(masked_metrics(&ds.y, &pred, &ds.targets))
}

/// Trains and evaluates once per partition.
pub fn cross_validate<T: Scalar>(
    ds: &Dataset<T>,
    model: &ModelSpec,
    spec: &SplitSpec,
) -> Result<Vec<MetricReport>> {
    split(ds.n_rows(), spec, model.seed)?
        .iter()
        .map(|p| {
            let m = train(&ds.select_rows(&p.train), model)?;
            evaluate(&m, &ds.select_rows(&p.test))
        })
        .collect()
}

/// User exclusions applied before splitting: feature columns to drop and
/// half-open time intervals whose rows are removed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Exclusions {
    pub features: Vec<String>,
    pub intervals: Vec<Interval>,
}

impl Exclusions {
    pub fn is_empty(&self) -> bool {
        self.features.is_empty() && self.intervals.is_empty()
    }

    pub fn apply<T: Scalar>(&self, ds: &Dataset<T>) -> Result<Dataset<T>> {
        if self.is_empty() {
            return Ok(ds.clone());
        }
        let reduced = ds.drop_features(&self.features)?;
        if reduced.n_features() == 0 {
            return Err(Error::invalid("exclusions remove every feature"));
        }
        let rows = reduced.rows_outside(&self.intervals);
        if rows.is_empty() {
            return Err(Error::invalid("exclusions remove every row"));
        }
        Ok(reduced.select_rows(&rows))
    }
}
