use ndarray::Array2;

use crate::dataset::{Dataset, Feature};
use crate::scalar::Scalar;

pub const HISTORY_CATEGORY: &str = "HIST";

/// Appends the features of the previous `n` rows (`<name>_lag<i>`, same
/// category) and the targets of the previous `m` rows (`<target>_ar<i>`,
/// category HIST). Unavailable history is missing.
pub fn add_history<T: Scalar>(dataset: &Dataset<T>, n: usize, m: usize) -> Dataset<T> {
    if n == 0 && m == 0 {
        return dataset.clone();
    }
    let d = dataset.n_features();
    let t = dataset.n_targets();
    let rows = dataset.n_rows();
    let width = d * (n + 1) + t * m;
    let mut features = dataset.features.clone();
    for lag in 1..=n {
        features.extend(
            dataset
                .features
                .iter()
                .map(|f| Feature::new(format!("{}_lag{lag}", f.name), f.category.clone())),
        );
    }
    for lag in 1..=m {
        features.extend(
            dataset
                .targets
                .iter()
                .map(|name| Feature::new(format!("{name}_ar{lag}"), HISTORY_CATEGORY)),
        );
    }
    let x = Array2::from_shape_fn((rows, width), |(i, j)| {
        if j < d {
            return dataset.x[[i, j]];
        }
        if j < d * (n + 1) {
            let lag = j / d;
            return if i >= lag { dataset.x[[i - lag, j % d]] } else { T::nan() };
        }
        let k = j - d * (n + 1);
        let lag = k / t + 1;
        if i >= lag {
            dataset.y[[i - lag, k % t]]
        } else {
            T::nan()
        }
    });
    Dataset {
        features,
        targets: dataset.targets.clone(),
        x,
        y: dataset.y.clone(),
        time: dataset.time.clone(),
    }
}
