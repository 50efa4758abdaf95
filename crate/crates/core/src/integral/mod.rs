//! INTEGRAL radiation-belt crossing datasets: IREM binning, threshold
//! crossings, phase and Kepler altitude conversion, positional and
//! per-revolution representations, history features.

pub mod crossings;
pub mod datasets;
pub mod history;
pub mod irem;
pub mod kepler;
pub mod orbit;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

pub use crossings::{detect_crossings, Crossing, CrossingLabels, RevolutionCrossings, DEFAULT_THRESHOLD};
pub use datasets::{build_per_revolution, build_positional, PositionalTask, TargetVariant};
pub use history::add_history;
pub use irem::{bin_irem, BinnedIrem};
pub use kepler::{altitude_at_phase, eccentric_anomaly, EARTH_RADIUS_KM};
pub use orbit::{phase_to_altitude, revolutions_from_tables, to_phase, EclipseKind, Revolution};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::ingest::{apply_default_rules, read_channel_file, ChannelKind, RawTable};
use crate::metafile::{Metafile, PreprocessParams, Stage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Representation {
    Positional { task: PositionalTask },
    PerRevolution { variant: TargetVariant },
}

impl Default for Representation {
    fn default() -> Self {
        Representation::PerRevolution {
            variant: TargetVariant::Phase,
        }
    }
}

impl Representation {
    pub fn name(&self) -> &'static str {
        match self {
            Representation::Positional { .. } => "positional",
            Representation::PerRevolution { .. } => "per_revolution",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegralParams {
    pub bin_width_min: u32,
    pub threshold: f64,
    pub representation: Representation,
    /// Feature-history depth.
    pub history_n: usize,
    /// Autoregression depth.
    pub history_m: usize,
    pub outlier_rules: bool,
}

impl Default for IntegralParams {
    fn default() -> Self {
        IntegralParams {
            bin_width_min: 15,
            threshold: DEFAULT_THRESHOLD,
            representation: Representation::default(),
            history_n: 0,
            history_m: 0,
            outlier_rules: true,
        }
    }
}

impl IntegralParams {
    pub fn validate(&self) -> Result<()> {
        if !(irem::MIN_BIN_WIDTH_MIN..=irem::MAX_BIN_WIDTH_MIN).contains(&self.bin_width_min) {
            return Err(Error::invalid(format!(
                "bin_width_min must be in [{}, {}]",
                irem::MIN_BIN_WIDTH_MIN,
                irem::MAX_BIN_WIDTH_MIN
            )));
        }
        if !self.threshold.is_finite() || self.threshold < 0.0 {
            return Err(Error::invalid("threshold must be finite and non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegralInputs {
    pub orbit: PathBuf,
    pub irem: PathBuf,
    pub eclipse: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct IntegralBuild {
    pub dataset: Dataset<f64>,
    pub revolutions: Vec<Revolution>,
    pub labels: CrossingLabels,
    pub binned: BinnedIrem,
    /// Positional bins outside every revolution.
    pub dropped_bins: usize,
    pub outliers_flagged: usize,
}

/// Builds the dataset for the configured representation from parsed ORBIT,
/// IREM and (optional) ECLIPSE tables.
pub fn build_integral_dataset(
    orbit: &RawTable,
    irem: &RawTable,
    eclipse: Option<&RawTable>,
    params: &IntegralParams,
) -> Result<IntegralBuild> {
    params.validate()?;
    let mut flagged = 0;
    let mut rule = |t: &RawTable| -> Result<RawTable> {
        if params.outlier_rules {
            let (t, n) = apply_default_rules(t.clone())?;
            flagged += n;
            Ok(t)
        } else {
            Ok(t.clone())
        }
    };
    let orbit = rule(orbit)?;
    let irem = rule(irem)?;
    let revolutions = revolutions_from_tables(&orbit, eclipse)?;
    if revolutions.is_empty() {
        return Err(Error::Empty("no revolutions".into()));
    }
    let binned = bin_irem(&irem, params.bin_width_min)?;
    let labels = detect_crossings(&binned, &revolutions, params.threshold)?;
    let (base, dropped) = match params.representation {
        Representation::Positional { task } => {
            let b = build_positional(&revolutions, &binned, task, params.threshold)?;
            (b.dataset, b.dropped)
        }
        Representation::PerRevolution { variant } => {
            (build_per_revolution(&revolutions, &labels, variant)?, 0)
        }
    };
    let dataset = add_history(&base, params.history_n, params.history_m);
    Ok(IntegralBuild {
        dataset,
        revolutions,
        labels,
        binned,
        dropped_bins: dropped,
        outliers_flagged: flagged,
    })
}

/// Reads the INTEGRAL files, builds the dataset and its metafile.
pub fn preprocess_integral(
    inputs: &IntegralInputs,
    params: &IntegralParams,
) -> Result<(IntegralBuild, Metafile)> {
    let (orbit, _, d_orbit) = read_channel_file(ChannelKind::Orbit, &inputs.orbit)?;
    let (irem, _, d_irem) = read_channel_file(ChannelKind::Irem, &inputs.irem)?;
    let mut digests = vec![d_orbit, d_irem];
    let eclipse = match &inputs.eclipse {
        Some(path) => {
            let (t, _, d) = read_channel_file(ChannelKind::Eclipse, path)?;
            digests.push(d);
            Some(t)
        }
        None => None,
    };
    let build = build_integral_dataset(&orbit, &irem, eclipse.as_ref(), params)?;
    let mut meta = Metafile::new(Stage::PreprocessIntegral, build.dataset.digest());
    meta.representation = Some(params.representation.name().into());
    meta.inputs = digests;
    meta.preprocess = Some(PreprocessParams::Integral(params.clone()));
    if build.dropped_bins > 0 {
        meta.warnings
            .push(format!("{} IREM bins outside every revolution dropped", build.dropped_bins));
    }
    Ok((build, meta))
}
