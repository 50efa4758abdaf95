//! Per-bin feature construction from the MEX context channels.
//!
//! Every category only reads rows timestamped before the end of the bin it
//! describes, except LT, which is a long-range ephemeris known in advance
//! and is linearly interpolated at the bin center.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::align::{bin_samples, Aggregation, AlignedFrame, Grid};
use crate::dataset::Feature;
use crate::error::{Error, Result};
use crate::ingest::{ChannelKind, RawTable, Row};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum FeatureCategory {
    Saa,
    Dmop,
    Ftl,
    Evt,
    Lt,
    Hist,
}

impl FeatureCategory {
    pub const ALL: [FeatureCategory; 6] = [
        FeatureCategory::Saa,
        FeatureCategory::Dmop,
        FeatureCategory::Ftl,
        FeatureCategory::Evt,
        FeatureCategory::Lt,
        FeatureCategory::Hist,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureCategory::Saa => "SAA",
            FeatureCategory::Dmop => "DMOP",
            FeatureCategory::Ftl => "FTL",
            FeatureCategory::Evt => "EVT",
            FeatureCategory::Lt => "LT",
            FeatureCategory::Hist => "HIST",
        }
    }
}

impl fmt::Display for FeatureCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FeatureCategory::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown feature category `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub dmop_decay_halflife_min: f64,
    pub include_categories: BTreeSet<FeatureCategory>,
    pub history_depth: usize,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        FeatureSpec {
            dmop_decay_halflife_min: 120.0,
            include_categories: [
                FeatureCategory::Saa,
                FeatureCategory::Dmop,
                FeatureCategory::Ftl,
                FeatureCategory::Evt,
                FeatureCategory::Lt,
            ]
            .into(),
            history_depth: 0,
        }
    }
}

impl FeatureSpec {
    pub fn new(halflife_min: f64, categories: &[&str], history_depth: usize) -> Result<Self> {
        let include_categories = categories
            .iter()
            .map(|c| c.parse())
            .collect::<Result<BTreeSet<_>>>()?;
        let spec = FeatureSpec {
            dmop_decay_halflife_min: halflife_min,
            include_categories,
            history_depth,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dmop_decay_halflife_min > 0.0 && self.dmop_decay_halflife_min.is_finite()) {
            return Err(Error::invalid("dmop decay half-life must be positive"));
        }
        Ok(())
    }
}

/// Column-major feature block, one value per grid bin.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureMatrix {
    pub features: Vec<Feature>,
    pub columns: Vec<Vec<f64>>,
}

impl FeatureMatrix {
    fn push(&mut self, name: String, category: FeatureCategory, values: Vec<f64>) {
        self.features.push(Feature::new(name, category.as_str()));
        self.columns.push(values);
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        let j = self.features.iter().position(|f| f.name == name)?;
        Some(&self.columns[j])
    }

    fn extend(&mut self, other: FeatureMatrix) {
        self.features.extend(other.features);
        self.columns.extend(other.columns);
    }
}

/// Valid rows of every table of `kind`, sorted by time.
fn rows_of(tables: &[RawTable], kind: ChannelKind) -> Option<(Vec<&Row>, &RawTable)> {
    let matching: Vec<&RawTable> = tables.iter().filter(|t| t.kind == kind).collect();
    let first = *matching.first()?;
    let mut rows: Vec<&Row> = matching.iter().flat_map(|t| t.valid_rows()).collect();
    rows.sort_by_key(|r| r.time_ms);
    Some((rows, first))
}

fn require(tables: &[RawTable], kind: ChannelKind) -> Result<(Vec<&Row>, &RawTable)> {
    rows_of(tables, kind).ok_or_else(|| Error::invalid(format!("feature category needs a {kind} table")))
}

pub fn construct_features(
    frame: &AlignedFrame,
    tables: &[RawTable],
    spec: &FeatureSpec,
) -> Result<FeatureMatrix> {
    spec.validate()?;
    let grid = frame.grid;
    let blocks: Vec<Result<FeatureMatrix>> = spec
        .include_categories
        .par_iter()
        .map(|cat| match cat {
            FeatureCategory::Saa => saa_features(tables, &grid),
            FeatureCategory::Dmop => dmop_features(tables, &grid, spec.dmop_decay_halflife_min),
            FeatureCategory::Ftl => ftl_features(tables, &grid),
            FeatureCategory::Evt => evt_features(tables, &grid),
            FeatureCategory::Lt => lt_features(tables, &grid),
            FeatureCategory::Hist => Ok(hist_features(frame, spec.history_depth)),
        })
        .collect();
    let mut out = FeatureMatrix::default();
    for block in blocks {
        out.extend(block?);
    }
    Ok(out)
}

fn saa_features(tables: &[RawTable], grid: &Grid) -> Result<FeatureMatrix> {
    let (rows, table) = require(tables, ChannelKind::Saa)?;
    let mut out = FeatureMatrix::default();
    for angle in ["sa", "sx", "sy", "sz"] {
        let idx = table.require_column(angle)?;
        let samples: Vec<(i64, f64)> = rows
            .iter()
            .map(|r| (r.time_ms, r.values[idx].as_f64().expect("float")))
            .collect();
        let col = bin_samples(angle, &samples, grid, Aggregation::Mean);
        out.push(format!("saa_{angle}"), FeatureCategory::Saa, col.values);
    }
    Ok(out)
}

/// Subsystem code of a DMOP command: its first four characters.
pub fn dmop_subsystem(command: &str) -> &str {
    match command.char_indices().nth(4) {
        Some((i, _)) => &command[..i],
        None => command,
    }
}

/// Per-subsystem command counts and decayed command energy evaluated at each
/// bin end: `sum over commands before the end of 0.5^((end - t) / halflife)`.
fn dmop_features(tables: &[RawTable], grid: &Grid, halflife_min: f64) -> Result<FeatureMatrix> {
    let (rows, table) = require(tables, ChannelKind::Dmop)?;
    let cmd = table.require_column("command")?;
    let mut by_subsystem: BTreeMap<&str, Vec<i64>> = BTreeMap::new();
    for r in &rows {
        let code = dmop_subsystem(r.values[cmd].as_str().expect("text"));
        by_subsystem.entry(code).or_default().push(r.time_ms);
    }
    let halflife_ms = halflife_min * 60_000.0;
    let step_decay = 0.5f64.powf(grid.step_ms as f64 / halflife_ms);
    let mut out = FeatureMatrix::default();
    for (code, times) in by_subsystem {
        let mut counts = vec![0.0; grid.n_bins];
        let mut fresh = vec![0.0; grid.n_bins];
        for &t in &times {
            if let Some(k) = grid.bin_of(t) {
                counts[k] += 1.0;
                fresh[k] += 0.5f64.powf((grid.end(k) - t) as f64 / halflife_ms);
            }
        }
        let mut energy = Vec::with_capacity(grid.n_bins);
        let mut carried = 0.0;
        for k in 0..grid.n_bins {
            carried = carried * step_decay + fresh[k];
            energy.push(carried);
        }
        out.push(format!("dmop_count_{code}"), FeatureCategory::Dmop, counts);
        out.push(format!("dmop_energy_{code}"), FeatureCategory::Dmop, energy);
    }
    Ok(out)
}

/// Adds the overlap of `[begin, end)` with each bin to `acc`, as a fraction
/// of the bin length.
fn add_coverage(acc: &mut [f64], grid: &Grid, begin: i64, end: i64) {
    let begin = begin.max(grid.t0);
    let end = end.min(grid.span_end());
    if end <= begin {
        return;
    }
    let first = grid.bin_of(begin).expect("clamped into grid");
    let last = grid.bin_of(end - 1).expect("clamped into grid");
    for (k, slot) in acc.iter_mut().enumerate().take(last + 1).skip(first) {
        let overlap = end.min(grid.end(k)) - begin.max(grid.start(k));
        if overlap > 0 {
            *slot += overlap as f64 / grid.step_ms as f64;
        }
    }
}

/// Fraction of each bin covered by each pointing type. A pointing interval
/// ends no later than the start of the next one, so fractions sum to at most 1.
fn ftl_features(tables: &[RawTable], grid: &Grid) -> Result<FeatureMatrix> {
    let (rows, table) = require(tables, ChannelKind::Ftl)?;
    let (b, e, p) = (
        table.require_column("utb_ms")?,
        table.require_column("ute_ms")?,
        table.require_column("pointing")?,
    );
    let mut coverage: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for (i, r) in rows.iter().enumerate() {
        let begin = r.values[b].as_i64().expect("int");
        let mut end = r.values[e].as_i64().expect("int");
        if let Some(next) = rows.get(i + 1) {
            end = end.min(next.values[b].as_i64().expect("int"));
        }
        let pointing = r.values[p].as_str().expect("text");
        let acc = coverage
            .entry(pointing)
            .or_insert_with(|| vec![0.0; grid.n_bins]);
        add_coverage(acc, grid, begin, end);
    }
    let mut out = FeatureMatrix::default();
    for (pointing, values) in coverage {
        out.push(format!("ftl_{pointing}"), FeatureCategory::Ftl, values);
    }
    Ok(out)
}

/// In-umbra fraction of each bin plus pericentre/apocentre passage counts.
fn evt_features(tables: &[RawTable], grid: &Grid) -> Result<FeatureMatrix> {
    let (rows, table) = require(tables, ChannelKind::Evt)?;
    let desc = table.require_column("description")?;
    let mut umbra = vec![0.0; grid.n_bins];
    let mut peri = vec![0.0; grid.n_bins];
    let mut apo = vec![0.0; grid.n_bins];
    let mut umbra_since: Option<i64> = None;
    let mut seen_start = false;
    for r in &rows {
        let text = r.values[desc].as_str().expect("text");
        let bin = grid.bin_of(r.time_ms);
        if text.contains("UMBRA_START") {
            seen_start = true;
            umbra_since.get_or_insert(r.time_ms);
        } else if text.contains("UMBRA_END") {
            match umbra_since.take() {
                Some(since) => add_coverage(&mut umbra, grid, since, r.time_ms),
                // the data starts inside an umbra
                None if !seen_start => add_coverage(&mut umbra, grid, grid.t0, r.time_ms),
                None => {}
            }
            seen_start = true;
        } else if text.contains("PERICENTRE") {
            if let Some(k) = bin {
                peri[k] += 1.0;
            }
        } else if text.contains("APOCENTRE") {
            if let Some(k) = bin {
                apo[k] += 1.0;
            }
        }
    }
    if let Some(since) = umbra_since {
        add_coverage(&mut umbra, grid, since, grid.span_end());
    }
    let mut out = FeatureMatrix::default();
    out.push("evt_umbra".into(), FeatureCategory::Evt, umbra);
    out.push("evt_pericentre".into(), FeatureCategory::Evt, peri);
    out.push("evt_apocentre".into(), FeatureCategory::Evt, apo);
    Ok(out)
}

/// Linear interpolation of each LT column at bin centers, holding the end
/// values outside the LT time range.
fn lt_features(tables: &[RawTable], grid: &Grid) -> Result<FeatureMatrix> {
    let (rows, table) = require(tables, ChannelKind::Lt)?;
    let mut out = FeatureMatrix::default();
    for name in ["sunmars_km", "eclipseduration_min", "occultationduration_min"] {
        let idx = table.require_column(name)?;
        let points: Vec<(i64, f64)> = rows
            .iter()
            .map(|r| (r.time_ms, r.values[idx].as_f64().expect("float")))
            .collect();
        let values = (0..grid.n_bins)
            .map(|k| interpolate(&points, grid.center(k)))
            .collect();
        out.push(format!("lt_{name}"), FeatureCategory::Lt, values);
    }
    Ok(out)
}

fn interpolate(points: &[(i64, f64)], t: i64) -> f64 {
    let Some(first) = points.first() else {
        return f64::NAN;
    };
    let last = points.last().expect("non-empty");
    if t <= first.0 {
        return first.1;
    }
    if t >= last.0 {
        return last.1;
    }
    let upper = points.partition_point(|p| p.0 <= t);
    let (t0, v0) = points[upper - 1];
    let (t1, v1) = points[upper];
    if t1 == t0 {
        return v1;
    }
    v0 + (v1 - v0) * (t - t0) as f64 / (t1 - t0) as f64
}

/// Target lags from strictly earlier bins: `hist_<line>_lag<l>`.
fn hist_features(frame: &AlignedFrame, depth: usize) -> FeatureMatrix {
    let mut out = FeatureMatrix::default();
    for col in frame.columns.iter().filter(|c| c.name.starts_with("pw.")) {
        let line = &col.name[3..];
        for lag in 1..=depth {
            let values = (0..frame.n_bins())
                .map(|k| if k >= lag { col.values[k - lag] } else { f64::NAN })
                .collect();
            out.push(format!("hist_{line}_lag{lag}"), FeatureCategory::Hist, values);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::parse_channel;
    use crate::mex::align::{align, AggregationRules};

    const M: i64 = 60_000;

    fn table(kind: ChannelKind, csv: &str) -> RawTable {
        parse_channel(kind, "t.csv", csv.as_bytes()).unwrap().0
    }

    /// A 3-hour frame at 15-minute bins driven by a PW table.
    fn frame_and_tables(extra: Vec<RawTable>) -> (AlignedFrame, Vec<RawTable>) {
        let pw = table(
            ChannelKind::Pw,
            &format!("ut_ms,NPWD2562\n0,1\n{},2\n{},3\n", 20 * M, 179 * M),
        );
        let mut tables = vec![pw];
        tables.extend(extra);
        let frame = align(&tables[..1], 15, &AggregationRules::default()).unwrap();
        (frame, tables)
    }

    fn spec(cats: &[&str], depth: usize) -> FeatureSpec {
        FeatureSpec::new(120.0, cats, depth).unwrap()
    }

    #[test]
    fn dmop_counts_in_bin() {
        let dmop = table(ChannelKind::Dmop, &format!("ut_ms,command\n{},ATTT305A\n", 20 * M));
        let (frame, tables) = frame_and_tables(vec![dmop]);
        let f = construct_features(&frame, &tables, &spec(&["DMOP"], 0)).unwrap();
        let counts = f.column("dmop_count_ATTT").unwrap();
        assert_eq!(counts[1], 1.0);
        assert_eq!(counts.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn dmop_energy_halves_after_one_halflife() {
        let dmop = table(ChannelKind::Dmop, "ut_ms,command\n0,ATTT305A\n");
        let (frame, tables) = frame_and_tables(vec![dmop]);
        let f = construct_features(&frame, &tables, &spec(&["DMOP"], 0)).unwrap();
        let energy = f.column("dmop_energy_ATTT").unwrap();
        // bin 7 ends at 02:00, exactly 120 minutes after the command
        assert!((energy[7] - 0.5).abs() < 1e-12, "{}", energy[7]);
        assert!((energy[0] - 0.5f64.powf(15.0 / 120.0)).abs() < 1e-15);
    }

    #[test]
    fn ftl_half_bin_coverage() {
        let ftl = table(
            ChannelKind::Ftl,
            &format!("utb_ms,ute_ms,pointing\n0,{},EARTH\n", 7 * M + 30_000),
        );
        let (frame, tables) = frame_and_tables(vec![ftl]);
        let f = construct_features(&frame, &tables, &spec(&["FTL"], 0)).unwrap();
        assert_eq!(f.column("ftl_EARTH").unwrap()[0], 0.5);
        assert_eq!(f.column("ftl_EARTH").unwrap()[1], 0.0);
    }

    #[test]
    fn ftl_overlapping_intervals_truncated() {
        let ftl = table(
            ChannelKind::Ftl,
            &format!(
                "utb_ms,ute_ms,pointing\n0,{},EARTH\n{},{},NADIR\n",
                40 * M,
                10 * M,
                50 * M
            ),
        );
        let (frame, tables) = frame_and_tables(vec![ftl]);
        let f = construct_features(&frame, &tables, &spec(&["FTL"], 0)).unwrap();
        for k in 0..frame.n_bins() {
            let total: f64 = f.columns.iter().map(|c| c[k]).sum();
            assert!(total <= 1.0 + 1e-12);
        }
        assert!((f.column("ftl_EARTH").unwrap()[0] - 10.0 / 15.0).abs() < 1e-12);
    }

    #[test]
    fn umbra_fraction() {
        let evt = table(
            ChannelKind::Evt,
            &format!(
                "ut_ms,description\n{},MAR_UMBRA_START\n{},MAR_UMBRA_END\n{},PERICENTRE_PASSAGE\n",
                5 * M,
                20 * M,
                21 * M
            ),
        );
        let (frame, tables) = frame_and_tables(vec![evt]);
        let f = construct_features(&frame, &tables, &spec(&["EVT"], 0)).unwrap();
        let umbra = f.column("evt_umbra").unwrap();
        assert!((umbra[0] - 10.0 / 15.0).abs() < 1e-12);
        assert!((umbra[1] - 5.0 / 15.0).abs() < 1e-12);
        assert_eq!(f.column("evt_pericentre").unwrap()[1], 1.0);
    }

    #[test]
    fn lt_interpolated_at_center() {
        let lt = table(
            ChannelKind::Lt,
            &format!("ut_ms,sunmars_km,eclipseduration_min,occultationduration_min\n0,100,0,0\n{},200,10,0\n", 150 * M),
        );
        let (frame, tables) = frame_and_tables(vec![lt]);
        let f = construct_features(&frame, &tables, &spec(&["LT"], 0)).unwrap();
        let v = f.column("lt_sunmars_km").unwrap();
        assert!((v[0] - (100.0 + 100.0 * 7.5 / 150.0)).abs() < 1e-9);
        assert_eq!(v[11], 200.0);
    }

    #[test]
    fn history_uses_earlier_bins() {
        let (frame, tables) = frame_and_tables(vec![]);
        let f = construct_features(&frame, &tables, &spec(&["HIST"], 2)).unwrap();
        let lag1 = f.column("hist_NPWD2562_lag1").unwrap();
        let lag2 = f.column("hist_NPWD2562_lag2").unwrap();
        assert!(lag1[0].is_nan());
        assert_eq!(lag1[1], 1.0);
        assert_eq!(lag1[2], 2.0);
        assert!(lag2[1].is_nan());
        assert_eq!(lag2[2], 1.0);
    }

    #[test]
    fn unknown_category_rejected() {
        assert!(FeatureSpec::new(120.0, &["SAA", "WEATHER"], 0).is_err());
        assert!(FeatureSpec::new(0.0, &["SAA"], 0).is_err());
    }

    #[test]
    fn subsystem_prefix() {
        assert_eq!(dmop_subsystem("ATTT305A"), "ATTT");
        assert_eq!(dmop_subsystem("AB"), "AB");
    }

    #[test]
    fn features_ignore_later_data() {
        let dmop_a = table(ChannelKind::Dmop, &format!("ut_ms,command\n{},ATTT1\n", 10 * M));
        let dmop_b = table(
            ChannelKind::Dmop,
            &format!("ut_ms,command\n{},ATTT1\n{},ATTT2\n", 10 * M, 100 * M),
        );
        let (frame, ta) = frame_and_tables(vec![dmop_a]);
        let (_, tb) = frame_and_tables(vec![dmop_b]);
        let s = spec(&["DMOP"], 0);
        let fa = construct_features(&frame, &ta, &s).unwrap();
        let fb = construct_features(&frame, &tb, &s).unwrap();
        // bins ending at or before 01:40 are unaffected by the later command
        for k in 0..6 {
            for (ca, cb) in fa.columns.iter().zip(&fb.columns) {
                assert_eq!(ca[k], cb[k]);
            }
        }
    }
}
