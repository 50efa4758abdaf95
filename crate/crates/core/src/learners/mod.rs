//! Multi-target learners, standardization, imputation and model files.
//!
//! Every learner works on standardized features and targets; predictions are
//! mapped back to the original target scale. KNN, forest and FCNN are global
//! (one model for all targets); gradient boosting is local (one booster per
//! target).

pub mod fcnn;
pub mod forest;
pub mod gboost;
pub mod knn;
pub mod scaler;
pub mod tree;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

pub use fcnn::{Activation, FcnnParams, Network, Optimizer};
pub use forest::{Forest, ForestParams};
pub use gboost::{Booster, GboostParams, Loss};
pub use knn::{Knn, KnnParams, Weighting};
pub use scaler::{impute_missing, impute_scaled, ColumnStats, Scaler};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::metafile::{sha256_hex, Metafile, Stage};
use crate::scalar::Scalar;

pub const MODEL_FORMAT: &str = "telewb-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetMode {
    Global,
    Local,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearnerSpec {
    Knn(KnnParams),
    Forest(ForestParams),
    Gboost(GboostParams),
    Fcnn(FcnnParams),
}

impl LearnerSpec {
    pub fn name(&self) -> &'static str {
        match self {
            LearnerSpec::Knn(_) => "knn",
            LearnerSpec::Forest(_) => "forest",
            LearnerSpec::Gboost(_) => "gboost",
            LearnerSpec::Fcnn(_) => "fcnn",
        }
    }

    /// Default hyperparameters for a learner name.
    pub fn default_for(name: &str) -> Result<Self> {
        Ok(match name {
            "knn" => LearnerSpec::Knn(KnnParams::default()),
            "forest" => LearnerSpec::Forest(ForestParams::default()),
            "gboost" => LearnerSpec::Gboost(GboostParams::default()),
            "fcnn" => LearnerSpec::Fcnn(FcnnParams::default()),
            other => return Err(Error::invalid(format!("unknown learner kind `{other}`"))),
        })
    }

    pub fn target_mode(&self) -> TargetMode {
        match self {
            LearnerSpec::Gboost(_) => TargetMode::Local,
            _ => TargetMode::Global,
        }
    }

    pub fn is_tree_ensemble(&self) -> bool {
        matches!(self, LearnerSpec::Forest(_) | LearnerSpec::Gboost(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub learner: LearnerSpec,
    #[serde(default)]
    pub seed: u64,
    /// Filled from the learner kind when omitted.
    #[serde(default)]
    pub target_mode: Option<TargetMode>,
}

impl ModelSpec {
    pub fn new(learner: LearnerSpec, seed: u64) -> Self {
        let mode = learner.target_mode();
        ModelSpec {
            learner,
            seed,
            target_mode: Some(mode),
        }
    }

    /// Fills the target mode and checks it against the learner kind.
    pub fn normalized(&self) -> Result<Self> {
        let mode = self.learner.target_mode();
        if self.target_mode.is_some_and(|m| m != mode) {
            return Err(Error::invalid(format!(
                "learner {} requires target_mode {:?}",
                self.learner.name(),
                mode
            )));
        }
        let spec = ModelSpec {
            target_mode: Some(mode),
            ..self.clone()
        };
        spec.validate_params()?;
        Ok(spec)
    }

    fn validate_params(&self) -> Result<()> {
        match &self.learner {
            LearnerSpec::Knn(p) if p.k == 0 => Err(Error::invalid("knn.k must be positive")),
            LearnerSpec::Knn(_) => Ok(()),
            LearnerSpec::Forest(p) => p.validate(),
            LearnerSpec::Gboost(p) => p.validate(),
            LearnerSpec::Fcnn(p) => p.validate(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", tag = "kind", rename_all = "snake_case")]
pub enum Fitted<T: Scalar> {
    Knn(Knn<T>),
    Forest(Forest<T>),
    Gboost { boosters: Vec<Booster<T>> },
    Fcnn(Network<T>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TrainedModel<T: Scalar> {
    pub spec: ModelSpec,
    pub feature_names: Vec<String>,
    pub target_names: Vec<String>,
    pub scaler: Scaler<T>,
    pub fitted: Fitted<T>,
    /// Learning rows per target.
    pub n_train: Vec<usize>,
    pub meta: Metafile,
}

/// Rows kept for training: all targets observed (global) or at least one
/// target observed (local; per-target filtering happens per booster).
pub fn exclude_missing_targets<T: Scalar>(ds: &Dataset<T>, mode: TargetMode) -> Result<Dataset<T>> {
    let rows: Vec<usize> = (0..ds.n_rows())
        .filter(|&i| {
            let row = ds.y.row(i);
            match mode {
                TargetMode::Global => row.iter().all(|v| !v.is_nan()),
                TargetMode::Local => row.iter().any(|v| !v.is_nan()),
            }
        })
        .collect();
    if rows.is_empty() {
        return Err(Error::NoTrainingData);
    }
    Ok(ds.select_rows(&rows))
}

/// Trains a model on `ds` (missing X imputed with learning-set means,
/// missing targets excluded per the target mode).
pub fn train<T: Scalar>(ds: &Dataset<T>, spec: &ModelSpec) -> Result<TrainedModel<T>> {
    let spec = spec.normalized()?;
    if ds.n_targets() == 0 {
        return Err(Error::invalid("dataset has no targets"));
    }
    if ds.n_features() == 0 {
        return Err(Error::invalid("dataset has no features"));
    }
    let mode = spec.learner.target_mode();
    let learn = exclude_missing_targets(ds, mode)?;
    let scaler = Scaler::fit(&learn)?;
    let mut x = scaler.x.apply(&learn.x);
    impute_scaled(&mut x, &scaler.x);
    let y = scaler.y.apply(&learn.y);
    let seed = spec.seed;

    let (fitted, n_train) = match &spec.learner {
        LearnerSpec::Knn(p) => (Fitted::Knn(Knn::fit(x.view(), y.view(), p)?), vec![x.nrows(); y.ncols()]),
        LearnerSpec::Forest(p) => (
            Fitted::Forest(Forest::fit(x.view(), y.view(), p, seed)?),
            vec![x.nrows(); y.ncols()],
        ),
        LearnerSpec::Fcnn(p) => (
            Fitted::Fcnn(Network::fit(x.view(), y.view(), p, seed)?),
            vec![x.nrows(); y.ncols()],
        ),
        LearnerSpec::Gboost(p) => {
            let mut boosters = Vec::with_capacity(y.ncols());
            let mut counts = Vec::with_capacity(y.ncols());
            for (k, col) in y.axis_iter(Axis(1)).enumerate() {
                let rows: Vec<usize> = (0..col.len()).filter(|&i| !col[i].is_nan()).collect();
                if rows.is_empty() {
                    return Err(Error::NoTrainingData);
                }
                let yk: Vec<T> = rows.iter().map(|&i| col[i]).collect();
                boosters.push(Booster::fit(x.view(), &rows, &yk, p, seed.wrapping_add(k as u64))?);
                counts.push(rows.len());
            }
            (Fitted::Gboost { boosters }, counts)
        }
    };

    let mut meta = Metafile::new(Stage::Train, ds.digest());
    meta.learner = Some(spec.clone());
    meta.seed = Some(seed);
    meta.scaler_digest = Some(scaler.digest());
    Ok(TrainedModel {
        spec,
        feature_names: ds.feature_names(),
        target_names: ds.targets.clone(),
        scaler,
        fitted,
        n_train,
        meta,
    })
}

impl<T: Scalar> TrainedModel<T> {
    pub fn n_targets(&self) -> usize {
        self.target_names.len()
    }

    /// Column order of `ds` mapped onto the model's features.
    pub fn align_features(&self, ds: &Dataset<T>) -> Result<Array2<T>> {
        for f in &ds.features {
            if !self.feature_names.contains(&f.name) {
                return Err(Error::UnknownColumn(f.name.clone()));
            }
        }
        let idx: Vec<usize> = self
            .feature_names
            .iter()
            .map(|n| ds.feature_index(n).ok_or_else(|| Error::invalid(format!("missing feature column `{n}`"))))
            .collect::<Result<_>>()?;
        Ok(ds.x.select(Axis(1), &idx))
    }

    /// Predictions on the original target scale for a dataset whose features
    /// match the model's by name.
    pub fn predict(&self, ds: &Dataset<T>) -> Result<Array2<T>> {
        Ok(self.predict_x(&self.align_features(ds)?))
    }

    /// Predictions for a raw feature matrix in the model's column order.
    pub fn predict_x(&self, x: &Array2<T>) -> Array2<T> {
        let mut xs = self.scaler.x.apply(x);
        impute_scaled(&mut xs, &self.scaler.x);
        self.scaler.invert(&self.predict_scaled(&xs))
    }

    /// Predictions in the standardized space for standardized, imputed input.
    pub fn predict_scaled(&self, xs: &Array2<T>) -> Array2<T> {
        match &self.fitted {
            Fitted::Knn(m) => m.predict(xs.view()),
            Fitted::Forest(m) => m.predict(xs.view()),
            Fitted::Fcnn(m) => m.forward(xs.view()),
            Fitted::Gboost { boosters } => {
                let mut out = Array2::zeros((xs.nrows(), boosters.len()));
                for (k, b) in boosters.iter().enumerate() {
                    for (i, v) in b.predict(xs.view()).into_iter().enumerate() {
                        out[[i, k]] = v;
                    }
                }
                out
            }
        }
    }

    /// Standardized, imputed feature matrix of a dataset.
    pub fn scaled_features(&self, ds: &Dataset<T>) -> Result<Array2<T>> {
        let mut xs = self.scaler.x.apply(&self.align_features(ds)?);
        impute_scaled(&mut xs, &self.scaler.x);
        Ok(xs)
    }

    /// Model file: a JSON header line (format, version, scalar type, body
    /// digest) followed by the JSON body.
    pub fn to_bytes(&self) -> Vec<u8> {
        let body = serde_json::to_vec(self).expect("model serializes");
        let header = serde_json::json!({
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "scalar": T::NAME,
            "sha256": sha256_hex(&body),
        });
        let mut out = serde_json::to_vec(&header).expect("header serializes");
        out.push(b'\n');
        out.extend_from_slice(&body);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let nl = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::ModelFile("missing header line".into()))?;
        let header: serde_json::Value = serde_json::from_slice(&bytes[..nl])
            .map_err(|e| Error::ModelFile(format!("bad header: {e}")))?;
        if header["format"] != MODEL_FORMAT {
            return Err(Error::ModelFile("not a model file".into()));
        }
        if header["version"] != MODEL_VERSION {
            return Err(Error::ModelFile(format!(
                "unsupported version {} (expected {MODEL_VERSION})",
                header["version"]
            )));
        }
        if header["scalar"] != T::NAME {
            return Err(Error::ModelFile(format!(
                "model stores {} values, loader expects {}",
                header["scalar"],
                T::NAME
            )));
        }
        let body = &bytes[nl + 1..];
        let expected = header["sha256"].as_str().unwrap_or_default().to_owned();
        let actual = sha256_hex(body);
        if expected != actual {
            return Err(Error::DigestMismatch {
                what: "model body".into(),
                expected,
                actual,
            });
        }
        Ok(serde_json::from_slice(body)?)
    }

    /// Digest of the full model file bytes.
    pub fn digest(&self) -> String {
        sha256_hex(&self.to_bytes())
    }
}

pub fn save_model<T: Scalar>(model: &TrainedModel<T>, path: &std::path::Path) -> Result<()> {
    std::fs::write(path, model.to_bytes())?;
    Ok(())
}

pub fn load_model<T: Scalar>(path: &std::path::Path) -> Result<TrainedModel<T>> {
    TrainedModel::from_bytes(&std::fs::read(path)?)
}
