//! Mars Express thermal-power dataset: alignment of the six context/power
//! channels, feature construction, power aggregation and cleansing.

pub mod align;
pub mod cleanse;
pub mod features;
pub mod power;

use std::path::PathBuf;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

pub use align::{align, AggregationRules, Aggregation, AlignedFrame, Grid};
pub use cleanse::{cleanse, CleansePolicy, CleanseReport};
pub use features::{construct_features, FeatureCategory, FeatureMatrix, FeatureSpec};
pub use power::{aggregate_power, TargetMatrix};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::ingest::{apply_default_rules, read_channel_file, ChannelKind, RawTable};
use crate::metafile::{Metafile, PreprocessParams, Stage};

/// The 33 MEX thermal power lines.
pub const POWER_LINES: [&str; 33] = [
    "NPWD2372", "NPWD2401", "NPWD2402", "NPWD2451", "NPWD2471", "NPWD2472", "NPWD2481",
    "NPWD2482", "NPWD2491", "NPWD2501", "NPWD2531", "NPWD2532", "NPWD2551", "NPWD2552",
    "NPWD2561", "NPWD2562", "NPWD2691", "NPWD2692", "NPWD2721", "NPWD2722", "NPWD2742",
    "NPWD2771", "NPWD2791", "NPWD2792", "NPWD2801", "NPWD2802", "NPWD2821", "NPWD2851",
    "NPWD2852", "NPWD2871", "NPWD2872", "NPWD2881", "NPWD2882",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MexParams {
    pub granularity_min: u32,
    pub features: FeatureSpec,
    pub cleanse: CleansePolicy,
    pub outlier_rules: bool,
}

impl Default for MexParams {
    fn default() -> Self {
        MexParams {
            granularity_min: 15,
            features: FeatureSpec::default(),
            cleanse: CleansePolicy::DropRows,
            outlier_rules: true,
        }
    }
}

impl MexParams {
    pub fn validate(&self) -> Result<()> {
        if self.granularity_min == 0 {
            return Err(Error::invalid("granularity_min must be positive"));
        }
        self.features.validate()
    }
}

/// Paths of the six MEX channel files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MexInputs {
    pub saa: PathBuf,
    pub dmop: PathBuf,
    pub ftl: PathBuf,
    pub evt: PathBuf,
    pub lt: PathBuf,
    pub pw: PathBuf,
}

impl MexInputs {
    pub fn channels(&self) -> [(ChannelKind, &PathBuf); 6] {
        [
            (ChannelKind::Saa, &self.saa),
            (ChannelKind::Dmop, &self.dmop),
            (ChannelKind::Ftl, &self.ftl),
            (ChannelKind::Evt, &self.evt),
            (ChannelKind::Lt, &self.lt),
            (ChannelKind::Pw, &self.pw),
        ]
    }
}

#[derive(Debug, Clone)]
pub struct MexBuild {
    pub dataset: Dataset<f64>,
    pub grid: Grid,
    pub outliers_flagged: usize,
    pub cleanse: CleanseReport,
}

/// Builds the MEX dataset from parsed tables: one row per bin (time index =
/// bin center), category-tagged features and the 33 mean-current targets.
pub fn build_mex_dataset(tables: &[RawTable], params: &MexParams) -> Result<MexBuild> {
    params.validate()?;
    let mut flagged = 0;
    let tables: Vec<RawTable> = if params.outlier_rules {
        tables
            .iter()
            .cloned()
            .map(|t| {
                apply_default_rules(t).map(|(t, n)| {
                    flagged += n;
                    t
                })
            })
            .collect::<Result<_>>()?
    } else {
        tables.to_vec()
    };
    let pw = tables
        .iter()
        .find(|t| t.kind == ChannelKind::Pw)
        .ok_or_else(|| Error::invalid("MEX dataset needs a PW table"))?;
    if pw.columns.len() - 1 != POWER_LINES.len() {
        return Err(Error::Schema(format!(
            "MEX dataset needs {} power lines, PW has {}",
            POWER_LINES.len(),
            pw.columns.len() - 1
        )));
    }
    let grid = Grid::covering(&tables, params.granularity_min)?;
    let frame = align::align_on_grid(
        &tables,
        grid,
        params.granularity_min,
        &AggregationRules::default(),
    );
    let features = construct_features(&frame, &tables, &params.features)?;
    let targets = power::aggregate_power_on(pw, grid)?;

    let n = grid.n_bins;
    let x = Array2::from_shape_fn((n, features.columns.len()), |(i, j)| features.columns[j][i]);
    let y = Array2::from_shape_fn((n, targets.columns.len()), |(i, j)| targets.columns[j][i]);
    let time = (0..n).map(|k| grid.center(k)).collect();
    let raw = Dataset::new(features.features, targets.names, x, y, time)?;
    let (dataset, report) = cleanse(&raw, params.cleanse)?;
    if dataset.n_rows() == 0 {
        return Err(Error::Empty("no rows survive cleansing".into()));
    }
    Ok(MexBuild {
        dataset,
        grid,
        outliers_flagged: flagged,
        cleanse: report,
    })
}

/// Reads the six channel files, builds the dataset and its metafile.
pub fn preprocess_mex(inputs: &MexInputs, params: &MexParams) -> Result<(MexBuild, Metafile)> {
    let mut tables = Vec::new();
    let mut digests = Vec::new();
    for (kind, path) in inputs.channels() {
        let (table, _, digest) = read_channel_file(kind, path)?;
        tables.push(table);
        digests.push(digest);
    }
    let build = build_mex_dataset(&tables, params)?;
    let mut meta = Metafile::new(Stage::PreprocessMex, build.dataset.digest());
    meta.representation = Some("mex".into());
    meta.inputs = digests;
    meta.preprocess = Some(PreprocessParams::Mex(params.clone()));
    Ok((build, meta))
}
