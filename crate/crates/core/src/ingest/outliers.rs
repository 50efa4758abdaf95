use serde::{Deserialize, Serialize};

use super::{ChannelKind, RawTable};
use crate::error::{Error, Result};

/// Inclusive physical range for one numeric column. Rows outside it are
/// flagged, never deleted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierRule {
    pub column: String,
    pub min: f64,
    pub max: f64,
}

impl OutlierRule {
    pub fn range(column: impl Into<String>, min: f64, max: f64) -> Self {
        OutlierRule {
            column: column.into(),
            min,
            max,
        }
    }

    pub fn at_least(column: impl Into<String>, min: f64) -> Self {
        Self::range(column, min, f64::INFINITY)
    }
}

/// Marks rows violating `rule` and returns how many rows violate it.
pub fn flag_outliers(mut table: RawTable, rule: &OutlierRule) -> Result<(RawTable, usize)> {
    let idx = table.require_column(&rule.column)?;
    if !table.columns[idx].is_numeric() {
        return Err(Error::NonNumeric(rule.column.clone()));
    }
    let mut count = 0;
    for row in &mut table.rows {
        let v = row.values[idx].as_f64().expect("numeric column");
        if !(rule.min..=rule.max).contains(&v) {
            row.flagged = true;
            count += 1;
        }
    }
    Ok((table, count))
}

/// Default physical-range rules: currents and count rates are non-negative,
/// angles lie in [0, 360] degrees.
pub fn default_rules(table: &RawTable) -> Vec<OutlierRule> {
    match table.kind {
        ChannelKind::Saa => ["sa", "sx", "sy", "sz"]
            .into_iter()
            .map(|c| OutlierRule::range(c, 0.0, 360.0))
            .collect(),
        ChannelKind::Pw => table
            .columns
            .iter()
            .skip(1)
            .map(|c| OutlierRule::at_least(c.name.clone(), 0.0))
            .collect(),
        ChannelKind::Irem => vec![OutlierRule::at_least("count_rate", 0.0)],
        ChannelKind::Lt => vec![
            OutlierRule::at_least("sunmars_km", 0.0),
            OutlierRule::at_least("eclipseduration_min", 0.0),
            OutlierRule::at_least("occultationduration_min", 0.0),
        ],
        ChannelKind::Orbit => vec![
            OutlierRule::range("eccentricity", 0.0, 1.0 - f64::EPSILON),
            OutlierRule::at_least("period_s", f64::MIN_POSITIVE),
            OutlierRule::at_least("semimajor_km", 0.0),
        ],
        ChannelKind::Dmop | ChannelKind::Ftl | ChannelKind::Evt | ChannelKind::Eclipse => {
            Vec::new()
        }
    }
}

/// Applies every default rule, returning the flagged table and the number of
/// distinct rows flagged.
pub fn apply_default_rules(table: RawTable) -> Result<(RawTable, usize)> {
    let rules = default_rules(&table);
    let mut table = table;
    for rule in &rules {
        table = flag_outliers(table, rule)?.0;
    }
    let flagged = table.rows.iter().filter(|r| r.flagged).count();
    Ok((table, flagged))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::parse_channel;

    fn pw() -> RawTable {
        parse_channel(
            ChannelKind::Pw,
            "pw.csv",
            b"ut_ms,NPWD2562,NPWD2532\n1,0.5,1.0\n2,-10,1.0\n3,0.2,3.0\n",
        )
        .unwrap()
        .0
    }

    #[test]
    fn negative_current_flagged() {
        let (t, n) = flag_outliers(pw(), &OutlierRule::range("NPWD2562", 0.0, 20.0)).unwrap();
        assert_eq!(n, 1);
        assert!(t.rows[1].flagged);
        assert_eq!(t.rows.len(), 3);
    }

    #[test]
    fn all_in_range() {
        let (_, n) = flag_outliers(pw(), &OutlierRule::range("NPWD2532", 0.0, 20.0)).unwrap();
        assert_eq!(n, 0);
    }

    #[test]
    fn huge_irem_count_flagged() {
        let t = parse_channel(ChannelKind::Irem, "i", b"ut_ms,count_rate\n1,5\n2,1000000000\n")
            .unwrap()
            .0;
        let (_, n) = flag_outliers(t, &OutlierRule::range("count_rate", 0.0, 1e6)).unwrap();
        assert_eq!(n, 1);
    }

    #[test]
    fn text_column_rejected() {
        let t = parse_channel(ChannelKind::Dmop, "d", b"ut_ms,command\n1,ATTT305A\n")
            .unwrap()
            .0;
        let err = flag_outliers(t, &OutlierRule::range("command", 0.0, 1.0)).unwrap_err();
        assert!(matches!(err, Error::NonNumeric(_)));
    }

    #[test]
    fn defaults_flag_negative_pw() {
        let (t, n) = apply_default_rules(pw()).unwrap();
        assert_eq!(n, 1);
        assert_eq!(t.valid_rows().count(), 2);
    }
}
