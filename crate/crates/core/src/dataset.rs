//! Feature/target matrices with names, category tags and a time index.
//!
//! Missing values are stored as NaN. The CSV form is
//! `ut_ms,<features...>,<targets...>` with empty fields for missing values,
//! accompanied by a `{column -> category}` JSON map in which target columns
//! carry the category [`TARGET_CATEGORY`].

use std::collections::{BTreeMap, BTreeSet};

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metafile::sha256_hex;
use crate::scalar::Scalar;

pub const TARGET_CATEGORY: &str = "TARGET";
pub const TIME_COLUMN: &str = "ut_ms";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feature {
    pub name: String,
    pub category: String,
}

impl Feature {
    pub fn new(name: impl Into<String>, category: impl Into<String>) -> Self {
        Feature {
            name: name.into(),
            category: category.into(),
        }
    }
}

/// Half-open time interval `[from_ms, to_ms)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interval {
    pub from_ms: i64,
    pub to_ms: i64,
}

impl Interval {
    pub fn new(from_ms: i64, to_ms: i64) -> Self {
        Interval { from_ms, to_ms }
    }

    pub fn contains(&self, t: i64) -> bool {
        self.from_ms <= t && t < self.to_ms
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    pub features: Vec<Feature>,
    pub targets: Vec<String>,
    /// n x d, NaN where missing.
    pub x: Array2<T>,
    /// n x t, NaN where missing.
    pub y: Array2<T>,
    /// Row timestamps (bin centers or perigee times), ms UTC.
    pub time: Vec<i64>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(
        features: Vec<Feature>,
        targets: Vec<String>,
        x: Array2<T>,
        y: Array2<T>,
        time: Vec<i64>,
    ) -> Result<Self> {
        let n = time.len();
        if x.nrows() != n || y.nrows() != n {
            return Err(Error::invalid(format!(
                "row count mismatch: time {n}, x {}, y {}",
                x.nrows(),
                y.nrows()
            )));
        }
        if x.ncols() != features.len() || y.ncols() != targets.len() {
            return Err(Error::invalid("column count does not match names"));
        }
        let mut seen = BTreeSet::new();
        for name in features
            .iter()
            .map(|f| f.name.as_str())
            .chain(targets.iter().map(String::as_str))
        {
            if name == TIME_COLUMN || !seen.insert(name) {
                return Err(Error::invalid(format!("duplicate or reserved column `{name}`")));
            }
        }
        Ok(Dataset {
            features,
            targets,
            x,
            y,
            time,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.time.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn n_targets(&self) -> usize {
        self.targets.len()
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.features.iter().map(|f| f.name.clone()).collect()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn target_index(&self, name: &str) -> Option<usize> {
        self.targets.iter().position(|t| t == name)
    }

    pub fn has_missing_features(&self) -> bool {
        self.x.iter().any(|v| v.is_nan())
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Dataset {
            features: self.features.clone(),
            targets: self.targets.clone(),
            x: self.x.select(Axis(0), rows),
            y: self.y.select(Axis(0), rows),
            time: rows.iter().map(|&r| self.time[r]).collect(),
        }
    }

    /// Removes the named feature columns. Unknown names are an error.
    pub fn drop_features(&self, names: &[String]) -> Result<Self> {
        for name in names {
            if self.feature_index(name).is_none() {
                return Err(Error::UnknownColumn(name.clone()));
            }
        }
        let keep: Vec<usize> = (0..self.n_features())
            .filter(|&j| !names.contains(&self.features[j].name))
            .collect();
        Ok(Dataset {
            features: keep.iter().map(|&j| self.features[j].clone()).collect(),
            targets: self.targets.clone(),
            x: self.x.select(Axis(1), &keep),
            y: self.y.clone(),
            time: self.time.clone(),
        })
    }

    /// Rows whose timestamp falls in none of `intervals`.
    pub fn rows_outside(&self, intervals: &[Interval]) -> Vec<usize> {
        (0..self.n_rows())
            .filter(|&i| !intervals.iter().any(|iv| iv.contains(self.time[i])))
            .collect()
    }

    /// Rows whose timestamp falls inside `interval` (all rows when `None`).
    pub fn rows_within(&self, interval: Option<Interval>) -> Vec<usize> {
        match interval {
            None => (0..self.n_rows()).collect(),
            Some(iv) => (0..self.n_rows()).filter(|&i| iv.contains(self.time[i])).collect(),
        }
    }

    pub fn cast<U: Scalar>(&self) -> Dataset<U> {
        Dataset {
            features: self.features.clone(),
            targets: self.targets.clone(),
            x: self.x.mapv(|v| U::of(v.as_f64())),
            y: self.y.mapv(|v| U::of(v.as_f64())),
            time: self.time.clone(),
        }
    }

    /// `{column -> category}` map; targets map to [`TARGET_CATEGORY`].
    pub fn column_categories(&self) -> BTreeMap<String, String> {
        let mut map: BTreeMap<String, String> = self
            .features
            .iter()
            .map(|f| (f.name.clone(), f.category.clone()))
            .collect();
        for t in &self.targets {
            map.insert(t.clone(), TARGET_CATEGORY.to_owned());
        }
        map
    }

    pub fn to_csv(&self) -> Vec<u8> {
        let mut out = String::new();
        out.push_str(TIME_COLUMN);
        for name in self
            .features
            .iter()
            .map(|f| f.name.as_str())
            .chain(self.targets.iter().map(String::as_str))
        {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for i in 0..self.n_rows() {
            out.push_str(&self.time[i].to_string());
            for v in self.x.row(i).iter().chain(self.y.row(i).iter()) {
                out.push(',');
                if !v.is_nan() {
                    out.push_str(&v.to_string());
                }
            }
            out.push('\n');
        }
        out.into_bytes()
    }

    pub fn columns_json(&self) -> Vec<u8> {
        let mut bytes = serde_json::to_vec_pretty(&self.column_categories()).expect("map serializes");
        bytes.push(b'\n');
        bytes
    }

    /// Content digest over the CSV and the category map.
    pub fn digest(&self) -> String {
        let mut bytes = self.to_csv();
        bytes.push(b'\n');
        bytes.extend_from_slice(&self.columns_json());
        sha256_hex(&bytes)
    }

    /// Parses the CSV form given its category map.
    pub fn from_csv(csv: &[u8], columns: &BTreeMap<String, String>) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(csv);
        let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
        if header.first().map(String::as_str) != Some(TIME_COLUMN) {
            return Err(Error::Schema(format!("dataset header must start with `{TIME_COLUMN}`")));
        }
        let mut features = Vec::new();
        let mut targets = Vec::new();
        let mut feature_cols = Vec::new();
        let mut target_cols = Vec::new();
        for (i, name) in header.iter().enumerate().skip(1) {
            let category = columns
                .get(name)
                .ok_or_else(|| Error::Schema(format!("column `{name}` has no category")))?;
            if category == TARGET_CATEGORY {
                targets.push(name.clone());
                target_cols.push(i);
            } else {
                features.push(Feature::new(name.clone(), category.clone()));
                feature_cols.push(i);
            }
        }
        let mut time = Vec::new();
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for rec in reader.records() {
            let rec = rec?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            time.push(rec[0].parse::<i64>().map_err(|_| {
                Error::Schema(format!("line {line}: bad timestamp `{}`", &rec[0]))
            })?);
            for (cols, out) in [(&feature_cols, &mut xs), (&target_cols, &mut ys)] {
                for &c in cols.iter() {
                    let field = &rec[c];
                    let v = if field.is_empty() {
                        T::nan()
                    } else {
                        let parsed: f64 = field.parse().map_err(|_| {
                            Error::Schema(format!("line {line}: bad number `{field}`"))
                        })?;
                        T::of(parsed)
                    };
                    out.push(v);
                }
            }
        }
        let n = time.len();
        let x = Array2::from_shape_vec((n, features.len()), xs).expect("shape");
        let y = Array2::from_shape_vec((n, targets.len()), ys).expect("shape");
        Dataset::new(features, targets, x, y, time)
    }

    pub fn write_files(&self, csv_path: &std::path::Path, columns_path: &std::path::Path) -> Result<()> {
        std::fs::write(csv_path, self.to_csv())?;
        std::fs::write(columns_path, self.columns_json())?;
        Ok(())
    }

    pub fn read_files(csv_path: &std::path::Path, columns_path: &std::path::Path) -> Result<Self> {
        let columns: BTreeMap<String, String> =
            serde_json::from_slice(&std::fs::read(columns_path)?)?;
        Self::from_csv(&std::fs::read(csv_path)?, &columns)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn toy() -> Dataset<f64> {
        Dataset::new(
            vec![Feature::new("a", "SAA"), Feature::new("b", "DMOP")],
            vec!["NPWD2562".into()],
            array![[1.0, f64::NAN], [0.1, 2.5], [3.0, -4.0]],
            array![[0.3], [f64::NAN], [1.0]],
            vec![0, 900_000, 1_800_000],
        )
        .unwrap()
    }

    #[test]
    fn csv_shape() {
        let csv = String::from_utf8(toy().to_csv()).unwrap();
        assert_eq!(
            csv,
            "ut_ms,a,b,NPWD2562\n0,1,,0.3\n900000,0.1,2.5,\n1800000,3,-4,1\n"
        );
    }

    #[test]
    fn drop_unknown_feature_errors() {
        assert!(toy().drop_features(&["zzz".into()]).is_err());
        let d = toy().drop_features(&["a".into()]).unwrap();
        assert_eq!(d.feature_names(), vec!["b".to_string()]);
    }

    #[test]
    fn interval_is_half_open() {
        let d = toy();
        assert_eq!(d.rows_outside(&[Interval::new(0, 900_000)]), vec![1, 2]);
        assert_eq!(d.rows_within(Some(Interval::new(900_000, 1_800_001))), vec![1, 2]);
    }

    proptest! {
        #[test]
        fn csv_round_trip(values in proptest::collection::vec(
            prop_oneof![Just(f64::NAN), -1e12f64..1e12, any::<i32>().prop_map(f64::from)], 12)
        ) {
            let x = Array2::from_shape_vec((4, 2), values[..8].to_vec()).unwrap();
            let y = Array2::from_shape_vec((4, 1), values[8..].to_vec()).unwrap();
            let d = Dataset::new(
                vec![Feature::new("f1", "A"), Feature::new("f2", "B")],
                vec!["t".into()],
                x, y, vec![1, 2, 3, 4],
            ).unwrap();
            let back = Dataset::<f64>::from_csv(&d.to_csv(), &d.column_categories()).unwrap();
            prop_assert_eq!(back.digest(), d.digest());
            for (a, b) in d.x.iter().zip(back.x.iter()) {
                prop_assert!(a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()));
            }
        }
    }
}
