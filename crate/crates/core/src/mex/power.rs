use super::align::{bin_samples, Aggregation, Grid};
use crate::error::{Error, Result};
use crate::ingest::{ChannelKind, RawTable};

/// Mean current per bin for every power line; NaN where a bin has no sample.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetMatrix {
    pub grid: Grid,
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

pub fn aggregate_power(pw: &RawTable, granularity_min: u32) -> Result<TargetMatrix> {
    let grid = Grid::covering([pw], granularity_min)?;
    aggregate_power_on(pw, grid)
}

pub fn aggregate_power_on(pw: &RawTable, grid: Grid) -> Result<TargetMatrix> {
    if pw.kind != ChannelKind::Pw {
        return Err(Error::invalid(format!("expected a PW table, got {}", pw.kind)));
    }
    let mut names = Vec::new();
    let mut columns = Vec::new();
    for (idx, col) in pw.columns.iter().enumerate().skip(1) {
        let samples: Vec<(i64, f64)> = pw
            .valid_rows()
            .map(|r| (r.time_ms, r.values[idx].as_f64().expect("float")))
            .collect();
        names.push(col.name.clone());
        columns.push(bin_samples(&col.name, &samples, &grid, Aggregation::Mean).values);
    }
    Ok(TargetMatrix {
        grid,
        names,
        columns,
    })
}
