use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{ChannelKind, RawTable};
use crate::mex::align::{Grid, MINUTE_MS};
use crate::stats::median_in_place;

pub const MIN_BIN_WIDTH_MIN: u32 = 5;
pub const MAX_BIN_WIDTH_MIN: u32 = 15;

/// Median IREM count rate per bin. `medians[k]` is `None` for empty bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedIrem {
    pub width_min: u32,
    pub centers: Vec<i64>,
    pub medians: Vec<Option<f64>>,
}

impl BinnedIrem {
    pub fn width_ms(&self) -> i64 {
        self.width_min as i64 * MINUTE_MS
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }
}

/// Bins raw IREM count rates on a grid anchored at a multiple of `width_min`
/// and takes the median of each bin (mean of the middle pair when even).
pub fn bin_irem(irem: &RawTable, width_min: u32) -> Result<BinnedIrem> {
    if !(MIN_BIN_WIDTH_MIN..=MAX_BIN_WIDTH_MIN).contains(&width_min) {
        return Err(Error::invalid(format!(
            "IREM bin width must be in [{MIN_BIN_WIDTH_MIN}, {MAX_BIN_WIDTH_MIN}] minutes, got {width_min}"
        )));
    }
    if irem.kind != ChannelKind::Irem {
        return Err(Error::invalid(format!("expected IREM table, got {}", irem.kind)));
    }
    let idx = irem.require_column("count_rate")?;
    let (lo, hi) = irem
        .time_range()
        .ok_or_else(|| Error::Empty("IREM table has no rows".into()))?;
    let grid = Grid::spanning(lo, hi, width_min as i64 * MINUTE_MS);
    let mut buckets: Vec<Vec<f64>> = vec![Vec::new(); grid.n_bins];
    for row in irem.valid_rows() {
        let k = grid.bin_of(row.time_ms).expect("grid spans the table");
        buckets[k].push(row.values[idx].as_f64().expect("float"));
    }
    Ok(BinnedIrem {
        width_min,
        centers: (0..grid.n_bins).map(|k| grid.center(k)).collect(),
        medians: buckets.iter_mut().map(|b| median_in_place(b)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::parse_channel;

    fn irem(csv: &str) -> RawTable {
        parse_channel(ChannelKind::Irem, "irem.csv", csv.as_bytes()).unwrap().0
    }

    #[test]
    fn medians() {
        let b = bin_irem(&irem("ut_ms,count_rate\n0,10\n8000,10000\n16000,12\n"), 15).unwrap();
        assert_eq!(b.medians, vec![Some(12.0)]);
        assert_eq!(b.centers, vec![450_000]);

        let b = bin_irem(&irem("ut_ms,count_rate\n0,600\n"), 5).unwrap();
        assert_eq!(b.medians, vec![Some(600.0)]);

        let b = bin_irem(&irem("ut_ms,count_rate\n0,1\n8000,2\n16000,3\n24000,4\n"), 10).unwrap();
        assert_eq!(b.medians, vec![Some(2.5)]);
    }

    #[test]
    fn empty_bins_missing() {
        let b = bin_irem(&irem("ut_ms,count_rate\n0,1\n1900000,2\n"), 15).unwrap();
        assert_eq!(b.medians, vec![Some(1.0), None, Some(2.0)]);
        assert!(b.centers.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn width_bounds() {
        let t = irem("ut_ms,count_rate\n0,1\n");
        assert!(bin_irem(&t, 4).is_err());
        assert!(bin_irem(&t, 16).is_err());
    }
}
