//! End-to-end runs: preprocess, exclude, split, train, evaluate, predict and
//! rank, producing a fixed set of artifacts.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::evaluation::{
    compare, masked_metrics, split, Comparison, Exclusions, MetricReport, RunSummary, SplitSpec,
    WhatIfSpec,
};
use crate::importance::{compute, ImportanceConfig, ImportanceReport, ScoreKind};
use crate::integral::{preprocess_integral, IntegralInputs, IntegralParams};
use crate::learners::{train, ModelSpec, TrainedModel};
use crate::metafile::{emit_metafile, sha256_hex, InputDigest, Metafile, Stage};
use crate::mex::{preprocess_mex, MexInputs, MexParams};

pub const RUN_SCHEMA_VERSION: u32 = 1;

fn schema() -> u32 {
    RUN_SCHEMA_VERSION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "pipeline", rename_all = "snake_case", deny_unknown_fields)]
pub enum Source {
    Mex {
        inputs: MexInputs,
        #[serde(default)]
        params: MexParams,
    },
    Integral {
        inputs: IntegralInputs,
        #[serde(default)]
        params: IntegralParams,
    },
    /// A prepared dataset CSV; `columns` defaults to `<stem>.columns.json`.
    Dataset {
        csv: PathBuf,
        #[serde(default)]
        columns: Option<PathBuf>,
    },
}

/// `data/x.csv` -> `data/x.columns.json`.
pub fn columns_path_for(csv: &Path) -> PathBuf {
    let stem = csv.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    csv.with_file_name(format!("{stem}.columns.json"))
}

impl Source {
    fn paths_mut(&mut self) -> Vec<&mut PathBuf> {
        match self {
            Source::Mex { inputs, .. } => vec![
                &mut inputs.saa,
                &mut inputs.dmop,
                &mut inputs.ftl,
                &mut inputs.evt,
                &mut inputs.lt,
                &mut inputs.pw,
            ],
            Source::Integral { inputs, .. } => {
                let mut v = vec![&mut inputs.orbit, &mut inputs.irem];
                v.extend(inputs.eclipse.as_mut());
                v
            }
            Source::Dataset { csv, columns } => {
                let mut v = vec![csv];
                v.extend(columns.as_mut());
                v
            }
        }
    }

    /// Input files the source reads (the default columns path included).
    pub fn input_paths(&self) -> Vec<PathBuf> {
        match self {
            Source::Mex { inputs, .. } => inputs.channels().iter().map(|(_, p)| (*p).clone()).collect(),
            Source::Integral { inputs, .. } => {
                let mut v = vec![inputs.orbit.clone(), inputs.irem.clone()];
                v.extend(inputs.eclipse.clone());
                v
            }
            Source::Dataset { csv, columns } => vec![
                csv.clone(),
                columns.clone().unwrap_or_else(|| columns_path_for(csv)),
            ],
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Source::Mex { params, .. } => params.validate(),
            Source::Integral { params, .. } => params.validate(),
            Source::Dataset { .. } => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "schema")]
    pub schema_version: u32,
    pub source: Source,
    pub model: ModelSpec,
    #[serde(default)]
    pub split: SplitSpec,
    #[serde(default)]
    pub importance: ImportanceConfig,
    #[serde(default)]
    pub exclusions: Exclusions,
    /// Set on what-if children.
    #[serde(default)]
    pub parent_run: Option<String>,
}

impl RunConfig {
    pub fn new(source: Source, model: ModelSpec) -> Self {
        RunConfig {
            schema_version: RUN_SCHEMA_VERSION,
            source,
            model,
            split: SplitSpec::default(),
            importance: ImportanceConfig::default(),
            exclusions: Exclusions::default(),
            parent_run: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != RUN_SCHEMA_VERSION {
            return Err(Error::invalid(format!(
                "unsupported run schema_version {}",
                self.schema_version
            )));
        }
        self.source.validate()?;
        self.model.normalized()?;
        self.split.validate()?;
        if self.importance.repeats == 0 {
            return Err(Error::invalid("importance.repeats must be positive"));
        }
        Ok(())
    }

    /// Validated copy with the target mode filled in.
    pub fn normalized(&self) -> Result<Self> {
        self.validate()?;
        Ok(RunConfig {
            model: self.model.normalized()?,
            ..self.clone()
        })
    }

    /// Makes relative input paths relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        for p in self.source.paths_mut() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        Ok(serde_json::from_slice(bytes)?)
    }
}

/// Child configuration: the base run plus extra exclusions.
pub fn whatif_config(base: &RunConfig, spec: &WhatIfSpec) -> RunConfig {
    let mut cfg = base.clone();
    for f in &spec.exclusions.features {
        if !cfg.exclusions.features.contains(f) {
            cfg.exclusions.features.push(f.clone());
        }
    }
    cfg.exclusions.intervals.extend(spec.exclusions.intervals.iter().copied());
    cfg.parent_run = Some(spec.base_run.clone());
    cfg
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub schema_version: u32,
    pub split: SplitSpec,
    pub n_train: usize,
    pub n_test: usize,
    /// Holdout test rows, or pooled out-of-fold rows for k-fold.
    pub test: MetricReport,
    pub train: MetricReport,
    pub folds: Vec<MetricReport>,
    pub warnings: Vec<String>,
}

/// Column-oriented predictions; `None` for missing values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predictions {
    pub schema_version: u32,
    pub time: Vec<i64>,
    pub targets: Vec<String>,
    /// [target][row]
    pub predicted: Vec<Vec<Option<f64>>>,
    pub observed: Vec<Vec<Option<f64>>>,
    /// Rows held out from the final model.
    pub is_test: Vec<bool>,
    /// Out-of-fold predictions for k-fold runs.
    pub out_of_fold: Option<Vec<Vec<Option<f64>>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skipped {
    pub score_kind: ScoreKind,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceBundle {
    pub schema_version: u32,
    pub reports: Vec<ImportanceReport>,
    pub skipped: Vec<Skipped>,
}

impl ImportanceBundle {
    pub fn report(&self, kind: ScoreKind) -> Option<&ImportanceReport> {
        self.reports.iter().find(|r| r.score_kind == kind)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactKind {
    Dataset,
    Columns,
    DatasetMeta,
    Model,
    ModelMeta,
    Metrics,
    Predictions,
    Importance,
    Config,
    Comparison,
}

impl ArtifactKind {
    pub const ALL: [ArtifactKind; 10] = [
        ArtifactKind::Dataset,
        ArtifactKind::Columns,
        ArtifactKind::DatasetMeta,
        ArtifactKind::Model,
        ArtifactKind::ModelMeta,
        ArtifactKind::Metrics,
        ArtifactKind::Predictions,
        ArtifactKind::Importance,
        ArtifactKind::Config,
        ArtifactKind::Comparison,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ArtifactKind::Dataset => "dataset",
            ArtifactKind::Columns => "columns",
            ArtifactKind::DatasetMeta => "dataset_meta",
            ArtifactKind::Model => "model",
            ArtifactKind::ModelMeta => "model_meta",
            ArtifactKind::Metrics => "metrics",
            ArtifactKind::Predictions => "predictions",
            ArtifactKind::Importance => "importance",
            ArtifactKind::Config => "config",
            ArtifactKind::Comparison => "comparison",
        }
    }

    pub fn file_name(self) -> &'static str {
        match self {
            ArtifactKind::Dataset => "dataset.csv",
            ArtifactKind::Columns => "dataset.columns.json",
            ArtifactKind::DatasetMeta => "dataset.meta.json",
            ArtifactKind::Model => "model.bin",
            ArtifactKind::ModelMeta => "model.meta.json",
            ArtifactKind::Metrics => "metrics.json",
            ArtifactKind::Predictions => "predictions.json",
            ArtifactKind::Importance => "importance.json",
            ArtifactKind::Config => "config.json",
            ArtifactKind::Comparison => "comparison.json",
        }
    }

    pub fn content_type(self) -> &'static str {
        match self {
            ArtifactKind::Dataset => "text/csv",
            ArtifactKind::Model => "application/octet-stream",
            _ => "application/json",
        }
    }
}

impl std::str::FromStr for ArtifactKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ArtifactKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s || k.file_name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown artifact `{s}`")))
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub config: RunConfig,
    pub dataset: Dataset<f64>,
    pub dataset_meta: Metafile,
    pub model: TrainedModel<f64>,
    pub metrics: RunMetrics,
    pub predictions: Predictions,
    pub importance: ImportanceBundle,
    pub comparison: Option<Comparison>,
}

fn json(v: &impl Serialize) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(v).expect("artifact serializes");
    bytes.push(b'\n');
    bytes
}

fn column_options(a: &ndarray::Array2<f64>) -> Vec<Vec<Option<f64>>> {
    a.columns()
        .into_iter()
        .map(|c| c.iter().map(|v| (!v.is_nan()).then_some(*v)).collect())
        .collect()
}

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

/// Loads or builds the dataset described by `source`.
pub fn prepare_source(source: &Source) -> Result<(Dataset<f64>, Metafile)> {
    match source {
        Source::Mex { inputs, params } => {
            let (build, meta) = preprocess_mex(inputs, params)?;
            Ok((build.dataset, meta))
        }
        Source::Integral { inputs, params } => {
            let (build, meta) = preprocess_integral(inputs, params)?;
            Ok((build.dataset, meta))
        }
        Source::Dataset { csv, columns } => {
            let columns = columns.clone().unwrap_or_else(|| columns_path_for(csv));
            let csv_bytes = read_file(csv)?;
            let col_bytes = read_file(&columns)?;
            let map: BTreeMap<String, String> = serde_json::from_slice(&col_bytes)?;
            let ds = Dataset::from_csv(&csv_bytes, &map)?;
            let mut meta = Metafile::new(Stage::Run, ds.digest());
            meta.inputs = vec![
                InputDigest::of_file("dataset", csv, &csv_bytes),
                InputDigest::of_file("columns", &columns, &col_bytes),
            ];
            Ok((ds, meta))
        }
    }
}

/// Runs `cfg` on its configured source.
pub fn execute_run(cfg: &RunConfig) -> Result<RunOutput> {
    let cfg = cfg.normalized()?;
    let (dataset, dataset_meta) = prepare_source(&cfg.source)?;
    execute_on(&cfg, dataset, dataset_meta)
}

/// Runs `cfg` on an already prepared dataset.
pub fn execute_on(cfg: &RunConfig, full: Dataset<f64>, dataset_meta: Metafile) -> Result<RunOutput> {
    let cfg = cfg.normalized()?;
    let ds = cfg.exclusions.apply(&full)?;
    let n = ds.n_rows();
    let parts = split(n, &cfg.split, cfg.model.seed)?;
    let mut warnings = dataset_meta.warnings.clone();
    warnings.extend(cfg.split.leakage_warning());

    let kfold = matches!(cfg.split, SplitSpec::Kfold { .. });
    let (model, is_test, folds, oof) = if kfold {
        let mut oof = ndarray::Array2::from_elem((n, ds.n_targets()), f64::NAN);
        let mut folds = Vec::with_capacity(parts.len());
        for p in &parts {
            let m = train(&ds.select_rows(&p.train), &cfg.model)?;
            let test = ds.select_rows(&p.test);
            let pred = m.predict(&test)?;
            for (r, &i) in p.test.iter().enumerate() {
                oof.row_mut(i).assign(&pred.row(r));
            }
            folds.push(masked_metrics(&test.y, &pred, &ds.targets));
        }
        (train(&ds, &cfg.model)?, vec![false; n], folds, Some(oof))
    } else {
        let p = &parts[0];
        let mut is_test = vec![false; n];
        for &i in &p.test {
            is_test[i] = true;
        }
        (train(&ds.select_rows(&p.train), &cfg.model)?, is_test, Vec::new(), None)
    };
    let mut model = model;
    model.meta.inputs = dataset_meta.inputs.clone();
    model.meta.preprocess = dataset_meta.preprocess.clone();
    model.meta.representation = dataset_meta.representation.clone();
    model.meta.exclusions = Some(cfg.exclusions.clone());
    model.meta.split = Some(cfg.split);
    model.meta.warnings = warnings.clone();

    let pred = model.predict(&ds)?;
    let rows_where = |flag: bool| -> Vec<usize> { (0..n).filter(|&i| is_test[i] == flag).collect() };
    let subset = |rows: &[usize]| {
        (
            ds.y.select(ndarray::Axis(0), rows),
            pred.select(ndarray::Axis(0), rows),
        )
    };
    let (test, n_train, n_test) = match &oof {
        Some(o) => (masked_metrics(&ds.y, o, &ds.targets), n, n),
        None => {
            let (t, p) = subset(&rows_where(true));
            let n_test = t.nrows();
            (masked_metrics(&t, &p, &ds.targets), n - n_test, n_test)
        }
    };
    let (t, p) = subset(&rows_where(false));
    let train_report = masked_metrics(&t, &p, &ds.targets);

    let metrics = RunMetrics {
        schema_version: RUN_SCHEMA_VERSION,
        split: cfg.split,
        n_train,
        n_test,
        test,
        train: train_report,
        folds,
        warnings,
    };
    let predictions = Predictions {
        schema_version: RUN_SCHEMA_VERSION,
        time: ds.time.clone(),
        targets: ds.targets.clone(),
        predicted: column_options(&pred),
        observed: column_options(&ds.y),
        is_test,
        out_of_fold: oof.as_ref().map(column_options),
    };

    let mut reports = Vec::new();
    let mut skipped = Vec::new();
    for &kind in &cfg.importance.kinds {
        match compute(&model, &ds, kind, None, &cfg.importance) {
            Ok(r) => reports.push(r),
            Err(Error::RequiresTreeEnsemble) => skipped.push(Skipped {
                score_kind: kind,
                reason: format!("{} requires a tree ensemble", kind.as_str()),
            }),
            Err(e) => return Err(e),
        }
    }

    Ok(RunOutput {
        config: cfg,
        dataset: ds,
        dataset_meta,
        model,
        metrics,
        predictions,
        importance: ImportanceBundle {
            schema_version: RUN_SCHEMA_VERSION,
            reports,
            skipped,
        },
        comparison: None,
    })
}

impl RunOutput {
    pub fn summary(&self, run_id: Option<String>) -> RunSummary {
        RunSummary {
            run_id,
            model_digest: self.model.digest(),
            metafile: self.model.meta.clone(),
            metrics: self.metrics.test.clone(),
            importance: self
                .importance
                .reports
                .iter()
                .map(|r| (r.score_kind.as_str().to_owned(), r.aggregate.clone()))
                .collect(),
        }
    }

    /// Attaches the comparison against the base run.
    pub fn compare_with(&mut self, base: &RunSummary, run_id: Option<String>) {
        let spec = &self.config.exclusions;
        let excl = match &base.metafile.exclusions {
            Some(b) => Exclusions {
                features: spec.features.iter().filter(|f| !b.features.contains(f)).cloned().collect(),
                intervals: spec
                    .intervals
                    .iter()
                    .filter(|i| !b.intervals.contains(i))
                    .copied()
                    .collect(),
            },
            None => spec.clone(),
        };
        self.comparison = Some(compare(base, &self.summary(run_id), &excl));
    }

    pub fn artifact(&self, kind: ArtifactKind) -> Option<Vec<u8>> {
        Some(match kind {
            ArtifactKind::Dataset => self.dataset.to_csv(),
            ArtifactKind::Columns => self.dataset.columns_json(),
            ArtifactKind::DatasetMeta => emit_metafile(&self.dataset_meta),
            ArtifactKind::Model => self.model.to_bytes(),
            ArtifactKind::ModelMeta => emit_metafile(&self.model.meta),
            ArtifactKind::Metrics => json(&self.metrics),
            ArtifactKind::Predictions => json(&self.predictions),
            ArtifactKind::Importance => json(&self.importance),
            ArtifactKind::Config => json(&self.config),
            ArtifactKind::Comparison => json(self.comparison.as_ref()?),
        })
    }

    /// Writes every available artifact into `dir`; returns `{kind -> sha256}`.
    pub fn write_to(&self, dir: &Path) -> Result<BTreeMap<String, String>> {
        std::fs::create_dir_all(dir)?;
        let mut digests = BTreeMap::new();
        for kind in ArtifactKind::ALL {
            if let Some(bytes) = self.artifact(kind) {
                std::fs::write(dir.join(kind.file_name()), &bytes)?;
                digests.insert(kind.as_str().to_owned(), sha256_hex(&bytes));
            }
        }
        Ok(digests)
    }
}

/// Reads the comparison inputs back from a run directory.
pub fn load_summary(dir: &Path, run_id: Option<String>) -> Result<RunSummary> {
    let model_bytes = read_file(&dir.join(ArtifactKind::Model.file_name()))?;
    let model = TrainedModel::<f64>::from_bytes(&model_bytes)?;
    let metrics: RunMetrics =
        serde_json::from_slice(&read_file(&dir.join(ArtifactKind::Metrics.file_name()))?)?;
    let importance: ImportanceBundle =
        serde_json::from_slice(&read_file(&dir.join(ArtifactKind::Importance.file_name()))?)?;
    Ok(RunSummary {
        run_id,
        model_digest: model.digest(),
        metafile: model.meta,
        metrics: metrics.test,
        importance: importance
            .reports
            .iter()
            .map(|r| (r.score_kind.as_str().to_owned(), r.aggregate.clone()))
            .collect(),
    })
}

pub fn read_config(dir: &Path) -> Result<RunConfig> {
    RunConfig::from_json(&read_file(&dir.join(ArtifactKind::Config.file_name()))?)
}

/// Runs the what-if child of the run stored in `base_dir`.
pub fn run_whatif(base_dir: &Path, spec: &WhatIfSpec, child_id: Option<String>) -> Result<RunOutput> {
    let base_cfg = read_config(base_dir)?;
    let base = load_summary(base_dir, Some(spec.base_run.clone()))?;
    let cfg = whatif_config(&base_cfg, spec);
    let mut out = execute_run(&cfg)?;
    out.compare_with(&base, child_id);
    Ok(out)
}
