use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::ingest::{ChannelKind, FieldType, RawTable};
use crate::stats::median_in_place;

pub const MINUTE_MS: i64 = 60_000;

/// Regular time grid: bin `k` covers `[t0 + k*step, t0 + (k+1)*step)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    pub t0: i64,
    pub step_ms: i64,
    pub n_bins: usize,
}

impl Grid {
    /// Grid anchored at a multiple of the step, spanning every row timestamp
    /// of `tables`. A single distinct timestamp is a zero span and rejected.
    pub fn covering<'a>(
        tables: impl IntoIterator<Item = &'a RawTable>,
        granularity_min: u32,
    ) -> Result<Grid> {
        if granularity_min == 0 {
            return Err(Error::invalid("granularity must be positive"));
        }
        let mut range: Option<(i64, i64)> = None;
        let mut any_table = false;
        for t in tables {
            any_table = true;
            if let Some((lo, hi)) = t.time_range() {
                range = Some(match range {
                    None => (lo, hi),
                    Some((a, b)) => (a.min(lo), b.max(hi)),
                });
            }
        }
        if !any_table {
            return Err(Error::Empty("no tables to align".into()));
        }
        let (lo, hi) = range.ok_or_else(|| Error::Empty("all tables are empty".into()))?;
        if hi == lo {
            return Err(Error::invalid("zero-span time range"));
        }
        Ok(Grid::spanning(lo, hi, granularity_min as i64 * MINUTE_MS))
    }

    pub fn spanning(lo: i64, hi: i64, step_ms: i64) -> Grid {
        let t0 = lo.div_euclid(step_ms) * step_ms;
        let n_bins = ((hi - t0) / step_ms) as usize + 1;
        Grid { t0, step_ms, n_bins }
    }

    pub fn bin_of(&self, t: i64) -> Option<usize> {
        if t < self.t0 {
            return None;
        }
        let k = ((t - self.t0) / self.step_ms) as usize;
        (k < self.n_bins).then_some(k)
    }

    pub fn start(&self, k: usize) -> i64 {
        self.t0 + k as i64 * self.step_ms
    }

    pub fn end(&self, k: usize) -> i64 {
        self.start(k) + self.step_ms
    }

    pub fn center(&self, k: usize) -> i64 {
        self.start(k) + self.step_ms / 2
    }

    pub fn span_end(&self) -> i64 {
        self.end(self.n_bins - 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    Mean,
    Median,
    Min,
    Max,
    Last,
    Sum,
}

impl Aggregation {
    fn apply(self, values: &mut [f64]) -> f64 {
        match self {
            Aggregation::Mean => values.iter().sum::<f64>() / values.len() as f64,
            Aggregation::Median => median_in_place(values).unwrap_or(f64::NAN),
            Aggregation::Min => values.iter().copied().fold(f64::INFINITY, f64::min),
            Aggregation::Max => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            Aggregation::Last => *values.last().unwrap_or(&f64::NAN),
            Aggregation::Sum => values.iter().sum(),
        }
    }
}

/// Per-channel aggregation; channels without an entry use `default`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AggregationRules {
    pub default: Aggregation,
    pub per_channel: BTreeMap<ChannelKind, Aggregation>,
}

impl AggregationRules {
    pub fn for_kind(&self, kind: ChannelKind) -> Aggregation {
        self.per_channel.get(&kind).copied().unwrap_or(self.default)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameColumn {
    pub name: String,
    /// NaN where missing.
    pub values: Vec<f64>,
    pub missing: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignedFrame {
    pub grid: Grid,
    pub granularity_min: u32,
    pub columns: Vec<FrameColumn>,
}

impl AlignedFrame {
    pub fn t0(&self) -> i64 {
        self.grid.t0
    }

    pub fn n_bins(&self) -> usize {
        self.grid.n_bins
    }

    pub fn column(&self, name: &str) -> Option<&FrameColumn> {
        self.columns.iter().find(|c| c.name == name)
    }

    /// Re-aligns the frame at `granularity_min`, treating each observed bin
    /// value as a sample at its bin start. At the frame's own granularity
    /// this returns the frame unchanged.
    pub fn realign(&self, granularity_min: u32) -> Result<AlignedFrame> {
        if granularity_min == 0 {
            return Err(Error::invalid("granularity must be positive"));
        }
        let step = granularity_min as i64 * MINUTE_MS;
        let grid = if step == self.grid.step_ms {
            self.grid
        } else {
            Grid::spanning(self.grid.t0, self.grid.span_end() - 1, step)
        };
        let columns = self
            .columns
            .iter()
            .map(|col| {
                let samples: Vec<(i64, f64)> = (0..self.grid.n_bins)
                    .filter(|&k| !col.missing[k])
                    .map(|k| (self.grid.start(k), col.values[k]))
                    .collect();
                bin_samples(&col.name, &samples, &grid, Aggregation::Mean)
            })
            .collect();
        Ok(AlignedFrame {
            grid,
            granularity_min,
            columns,
        })
    }
}

/// Name of the aligned column for `column` of a channel, e.g. `pw.NPWD2562`.
pub fn frame_column_name(kind: ChannelKind, column: &str) -> String {
    format!("{}.{column}", kind.as_str().to_ascii_lowercase())
}

/// Aligns the float columns of every table onto a common grid covering all
/// of them. Flagged rows are ignored; bins without data are masked missing.
pub fn align(
    tables: &[RawTable],
    granularity_min: u32,
    rules: &AggregationRules,
) -> Result<AlignedFrame> {
    let grid = Grid::covering(tables, granularity_min)?;
    Ok(align_on_grid(tables, grid, granularity_min, rules))
}

pub fn align_on_grid(
    tables: &[RawTable],
    grid: Grid,
    granularity_min: u32,
    rules: &AggregationRules,
) -> AlignedFrame {
    let mut columns = Vec::new();
    for table in tables {
        let agg = rules.for_kind(table.kind);
        for (idx, col) in table.columns.iter().enumerate() {
            if col.ty != FieldType::Float {
                continue;
            }
            let samples: Vec<(i64, f64)> = table
                .valid_rows()
                .map(|r| (r.time_ms, r.values[idx].as_f64().expect("float column")))
                .collect();
            columns.push(bin_samples(
                &frame_column_name(table.kind, &col.name),
                &samples,
                &grid,
                agg,
            ));
        }
    }
    AlignedFrame {
        grid,
        granularity_min,
        columns,
    }
}

pub(crate) fn bin_samples(
    name: &str,
    samples: &[(i64, f64)],
    grid: &Grid,
    agg: Aggregation,
) -> FrameColumn {
    let mut buckets: Vec<Vec<f64>> = vec![Vec::new(); grid.n_bins];
    for &(t, v) in samples {
        if let Some(k) = grid.bin_of(t) {
            buckets[k].push(v);
        }
    }
    let mut values = Vec::with_capacity(grid.n_bins);
    let mut missing = Vec::with_capacity(grid.n_bins);
    for mut bucket in buckets {
        if bucket.is_empty() {
            values.push(f64::NAN);
            missing.push(true);
        } else {
            values.push(agg.apply(&mut bucket));
            missing.push(false);
        }
    }
    FrameColumn {
        name: name.to_owned(),
        values,
        missing,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::parse_channel;

    fn irem(csv: &str) -> RawTable {
        parse_channel(ChannelKind::Irem, "irem.csv", csv.as_bytes()).unwrap().0
    }

    #[test]
    fn mean_of_two_in_bin() {
        let t = irem("ut_ms,count_rate\n180000,2\n420000,4\n1800000,7\n");
        let frame = align(&[t], 15, &AggregationRules::default()).unwrap();
        let col = frame.column("irem.count_rate").unwrap();
        assert_eq!(col.values[0], 3.0);
        // [00:15, 00:30) has no datum
        assert!(col.missing[1]);
        assert!(col.values[1].is_nan());
        assert_eq!(col.values[2], 7.0);
    }

    #[test]
    fn one_hour_gives_four_bins() {
        let t = irem("ut_ms,count_rate\n0,1\n3599999,1\n");
        let frame = align(&[t], 15, &AggregationRules::default()).unwrap();
        assert_eq!(frame.n_bins(), 4);
    }

    #[test]
    fn errors() {
        assert!(align(&[], 15, &AggregationRules::default()).is_err());
        let t = irem("ut_ms,count_rate\n5,1\n5,2\n");
        assert!(align(&[t.clone()], 15, &AggregationRules::default()).is_err());
        assert!(align(&[t], 0, &AggregationRules::default()).is_err());
    }

    #[test]
    fn flagged_rows_ignored() {
        let mut t = irem("ut_ms,count_rate\n0,1\n60000,100\n1000000,1\n");
        t.rows[1].flagged = true;
        let frame = align(&[t], 15, &AggregationRules::default()).unwrap();
        assert_eq!(frame.columns[0].values[0], 1.0);
    }

    #[test]
    fn realign_is_idempotent() {
        let t = irem("ut_ms,count_rate\n0,1\n60000,3\n2700000,5\n3000000,8\n");
        let frame = align(&[t], 15, &AggregationRules::default()).unwrap();
        let again = frame.realign(15).unwrap();
        assert_eq!(frame.grid, again.grid);
        for (a, b) in frame.columns.iter().zip(&again.columns) {
            assert_eq!(a.missing, b.missing);
            for (x, y) in a.values.iter().zip(&b.values) {
                assert!(x == y || (x.is_nan() && y.is_nan()));
            }
        }
    }

    #[test]
    fn median_rule() {
        let t = irem("ut_ms,count_rate\n0,10\n1,10000\n2,12\n");
        let mut rules = AggregationRules::default();
        rules.per_channel.insert(ChannelKind::Irem, Aggregation::Median);
        let frame = align(&[t], 15, &rules).unwrap();
        assert_eq!(frame.columns[0].values[0], 12.0);
    }
}
