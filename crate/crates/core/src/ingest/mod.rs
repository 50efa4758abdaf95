//! CSV ingestion of the raw telemetry channels.
//!
//! Every channel is a comma-separated UTF-8 file with one header line. The
//! header must match the channel schema exactly; malformed data lines are
//! skipped and reported, never fatal.

mod outliers;

pub use outliers::{apply_default_rules, default_rules, flag_outliers, OutlierRule};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum number of power lines in a PW file.
pub const MAX_POWER_LINES: usize = 33;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ChannelKind {
    Saa,
    Dmop,
    Ftl,
    Evt,
    Lt,
    Pw,
    Irem,
    Orbit,
    Eclipse,
}

impl ChannelKind {
    pub const ALL: [ChannelKind; 9] = [
        ChannelKind::Saa,
        ChannelKind::Dmop,
        ChannelKind::Ftl,
        ChannelKind::Evt,
        ChannelKind::Lt,
        ChannelKind::Pw,
        ChannelKind::Irem,
        ChannelKind::Orbit,
        ChannelKind::Eclipse,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ChannelKind::Saa => "SAA",
            ChannelKind::Dmop => "DMOP",
            ChannelKind::Ftl => "FTL",
            ChannelKind::Evt => "EVT",
            ChannelKind::Lt => "LT",
            ChannelKind::Pw => "PW",
            ChannelKind::Irem => "IREM",
            ChannelKind::Orbit => "ORBIT",
            ChannelKind::Eclipse => "ECLIPSE",
        }
    }

    /// Fixed schema of the channel. PW is the only kind whose columns depend
    /// on the file (see [`ChannelKind::schema_for_header`]).
    fn fixed_schema(self) -> Option<&'static [(&'static str, FieldType)]> {
        use FieldType::*;
        Some(match self {
            ChannelKind::Saa => &[
                ("ut_ms", Int),
                ("sa", Float),
                ("sx", Float),
                ("sy", Float),
                ("sz", Float),
            ],
            ChannelKind::Dmop => &[("ut_ms", Int), ("command", Text)],
            ChannelKind::Ftl => &[("utb_ms", Int), ("ute_ms", Int), ("pointing", Text)],
            ChannelKind::Evt => &[("ut_ms", Int), ("description", Text)],
            ChannelKind::Lt => &[
                ("ut_ms", Int),
                ("sunmars_km", Float),
                ("eclipseduration_min", Float),
                ("occultationduration_min", Float),
            ],
            ChannelKind::Pw => return None,
            ChannelKind::Irem => &[("ut_ms", Int), ("count_rate", Float)],
            ChannelKind::Orbit => &[
                ("rev", Int),
                ("perigee_ms", Int),
                ("perigee_alt_km", Float),
                ("apogee_ms", Int),
                ("apogee_alt_km", Float),
                ("perigee_lon_deg", Float),
                ("semimajor_km", Float),
                ("eccentricity", Float),
                ("inclination_deg", Float),
                ("raan_deg", Float),
                ("argp_deg", Float),
                ("period_s", Float),
                ("period_diff_s", Float),
            ],
            ChannelKind::Eclipse => &[
                ("rev", Int),
                ("event", Event),
                ("enter_ms", Int),
                ("exit_ms", Int),
            ],
        })
    }

    /// Column holding the row timestamp.
    pub fn time_column(self) -> &'static str {
        match self {
            ChannelKind::Ftl => "utb_ms",
            ChannelKind::Orbit => "perigee_ms",
            ChannelKind::Eclipse => "enter_ms",
            _ => "ut_ms",
        }
    }

    /// Validates a header line against the schema and returns the column list.
    pub fn schema_for_header(self, header: &[&str]) -> Result<Vec<Column>> {
        if let Some(fixed) = self.fixed_schema() {
            let expected: Vec<&str> = fixed.iter().map(|(n, _)| *n).collect();
            if header != expected.as_slice() {
                return Err(Error::Schema(format!(
                    "{} header must be `{}`, got `{}`",
                    self,
                    expected.join(","),
                    header.join(",")
                )));
            }
            return Ok(fixed
                .iter()
                .map(|(n, t)| Column::new(*n, *t))
                .collect());
        }
        // PW: ut_ms followed by 1..=33 distinct NPWDxxxx columns.
        if header.first() != Some(&"ut_ms") {
            return Err(Error::Schema(format!(
                "PW header must start with `ut_ms`, got `{}`",
                header.join(",")
            )));
        }
        let lines = &header[1..];
        if lines.is_empty() || lines.len() > MAX_POWER_LINES {
            return Err(Error::Schema(format!(
                "PW header must name 1..={MAX_POWER_LINES} power lines, got {}",
                lines.len()
            )));
        }
        let mut seen = std::collections::BTreeSet::new();
        for name in lines {
            if !is_power_line_name(name) {
                return Err(Error::Schema(format!(
                    "PW column `{name}` is not of the form NPWDxxxx"
                )));
            }
            if !seen.insert(*name) {
                return Err(Error::Schema(format!("duplicate PW column `{name}`")));
            }
        }
        let mut cols = vec![Column::new("ut_ms", FieldType::Int)];
        cols.extend(lines.iter().map(|n| Column::new(*n, FieldType::Float)));
        Ok(cols)
    }
}

pub fn is_power_line_name(name: &str) -> bool {
    name.len() == 8
        && name.starts_with("NPWD")
        && name[4..].bytes().all(|b| b.is_ascii_digit())
}

impl fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ChannelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ChannelKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown channel kind `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldType {
    Int,
    Float,
    Text,
    /// One of the eclipse event names.
    Event,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub ty: FieldType,
}

impl Column {
    pub fn new(name: &str, ty: FieldType) -> Self {
        Column {
            name: name.to_owned(),
            ty,
        }
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self.ty, FieldType::Int | FieldType::Float)
    }
}

pub const ECLIPSE_EVENTS: [&str; 3] = ["earth_umbra", "earth_penumbra", "moon_penumbra"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Value {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Value {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(v) => Some(*v as f64),
            Value::Float(v) => Some(*v),
            Value::Text(_) => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self {
            Value::Int(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Text(s) => Some(s),
            _ => None,
        }
    }

    fn render(&self) -> String {
        match self {
            Value::Int(v) => v.to_string(),
            Value::Float(v) => v.to_string(),
            Value::Text(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub time_ms: i64,
    /// One value per schema column, time column included.
    pub values: Vec<Value>,
    /// Set by [`flag_outliers`]; flagged rows are excluded downstream.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawTable {
    pub kind: ChannelKind,
    pub source_name: String,
    pub columns: Vec<Column>,
    pub rows: Vec<Row>,
}

impl RawTable {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn require_column(&self, name: &str) -> Result<usize> {
        self.column_index(name)
            .ok_or_else(|| Error::UnknownColumn(format!("{}.{name}", self.kind)))
    }

    /// Rows not flagged as outliers.
    pub fn valid_rows(&self) -> impl Iterator<Item = &Row> {
        self.rows.iter().filter(|r| !r.flagged)
    }

    pub fn time_range(&self) -> Option<(i64, i64)> {
        let first = self.rows.first()?.time_ms;
        let last = self.rows.last()?.time_ms;
        Some((first, last))
    }

    /// Serializes back to the channel CSV schema.
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        w.write_record(self.columns.iter().map(|c| c.name.as_str()))?;
        for row in &self.rows {
            w.write_record(row.values.iter().map(Value::render))?;
        }
        w.into_inner()
            .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
    }

    /// Builds a table from already-typed rows, sorting by timestamp.
    pub fn from_rows(
        kind: ChannelKind,
        source_name: impl Into<String>,
        columns: Vec<Column>,
        mut rows: Vec<Row>,
    ) -> Self {
        rows.sort_by_key(|r| r.time_ms);
        RawTable {
            kind,
            source_name: source_name.into(),
            columns,
            rows,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseReport {
    pub accepted: usize,
    pub rejected: usize,
    pub rejection_reasons: Vec<Rejection>,
    pub outliers_flagged: usize,
}

/// Parses one channel file. Malformed lines are rejected and reported; the
/// header and an empty stream are fatal.
pub fn parse_channel(
    kind: ChannelKind,
    source_name: &str,
    stream: &[u8],
) -> Result<(RawTable, ParseReport)> {
    if stream.iter().all(|b| b.is_ascii_whitespace()) {
        return Err(Error::Empty(format!("{kind} stream `{source_name}` is empty")));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(stream);
    let mut records = reader.byte_records();

    let header = match records.next() {
        Some(rec) => rec?,
        None => return Err(Error::Empty(format!("{kind} stream `{source_name}` is empty"))),
    };
    let header: Vec<&str> = header
        .iter()
        .map(|f| std::str::from_utf8(f).map(str::trim))
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Schema(format!("{kind} header is not valid UTF-8")))?;
    let columns = kind.schema_for_header(&header)?;
    let time_idx = columns
        .iter()
        .position(|c| c.name == kind.time_column())
        .expect("schema contains its time column");

    let mut rows = Vec::new();
    let mut report = ParseReport::default();
    for rec in records {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        match parse_row(&columns, &rec).and_then(|v| check_row(kind, v)) {
            Ok(values) => {
                let time_ms = values[time_idx].as_i64().expect("time column is Int");
                rows.push(Row {
                    time_ms,
                    values,
                    flagged: false,
                });
                report.accepted += 1;
            }
            Err(reason) => {
                report.rejected += 1;
                report.rejection_reasons.push(Rejection { line, reason });
            }
        }
    }
    let table = RawTable::from_rows(kind, source_name, columns, rows);
    Ok((table, report))
}

/// Cross-field checks that make a line malformed rather than an outlier.
fn check_row(kind: ChannelKind, values: Vec<Value>) -> std::result::Result<Vec<Value>, String> {
    let reversed = match kind {
        ChannelKind::Ftl => values[1].as_i64() < values[0].as_i64(),
        ChannelKind::Eclipse => values[3].as_i64() < values[2].as_i64(),
        _ => false,
    };
    if reversed {
        Err("interval".into())
    } else {
        Ok(values)
    }
}

fn parse_row(columns: &[Column], rec: &csv::ByteRecord) -> std::result::Result<Vec<Value>, String> {
    if rec.len() != columns.len() {
        return Err("arity".into());
    }
    columns
        .iter()
        .zip(rec.iter())
        .map(|(col, raw)| {
            let field = std::str::from_utf8(raw).map_err(|_| "utf8".to_string())?.trim();
            match col.ty {
                FieldType::Int => field
                    .parse::<i64>()
                    .map(Value::Int)
                    .map_err(|_| format!("int:{}", col.name)),
                FieldType::Float => match field.parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(Value::Float(v)),
                    _ => Err(format!("float:{}", col.name)),
                },
                FieldType::Text => Ok(Value::Text(field.to_owned())),
                FieldType::Event => {
                    if ECLIPSE_EVENTS.contains(&field) {
                        Ok(Value::Text(field.to_owned()))
                    } else {
                        Err(format!("event:{}", col.name))
                    }
                }
            }
        })
        .collect()
}

/// Reads and parses a channel file, returning its input digest alongside.
pub fn read_channel_file(
    kind: ChannelKind,
    path: &std::path::Path,
) -> Result<(RawTable, ParseReport, crate::metafile::InputDigest)> {
    let bytes = std::fs::read(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })?;
    let digest = crate::metafile::InputDigest::of_file(kind.as_str(), path, &bytes);
    let (table, report) = parse_channel(kind, &digest.file, &bytes)?;
    Ok((table, report, digest))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_pw_line() {
        let (table, report) =
            parse_channel(ChannelKind::Pw, "pw.csv", b"ut_ms,NPWD2562\n1219622400000,0.35\n")
                .unwrap();
        assert_eq!(table.rows.len(), 1);
        assert_eq!(report.accepted, 1);
        assert_eq!(report.rejected, 0);
        assert_eq!(table.rows[0].values[1], Value::Float(0.35));
    }

    #[test]
    fn dmop_arity_rejected() {
        let data = b"ut_ms,command\n1000,ATTT305A\n2000\n";
        let (table, report) = parse_channel(ChannelKind::Dmop, "dmop.csv", data).unwrap();
        assert_eq!(table.rows.len(), 1);
        assert_eq!(report.rejected, 1);
        assert_eq!(report.rejection_reasons[0].reason, "arity");
        assert_eq!(report.rejection_reasons[0].line, 3);
    }

    #[test]
    fn irem_sorted_ascending() {
        let data = b"ut_ms,count_rate\n3000,3\n1000,1\n2000,2\n1000,9\n";
        let (table, _) = parse_channel(ChannelKind::Irem, "irem.csv", data).unwrap();
        let times: Vec<i64> = table.rows.iter().map(|r| r.time_ms).collect();
        assert_eq!(times, vec![1000, 1000, 2000, 3000]);
        // stable: duplicate timestamps keep input order
        assert_eq!(table.rows[0].values[1], Value::Float(1.0));
        assert_eq!(table.rows[1].values[1], Value::Float(9.0));
    }

    #[test]
    fn header_mismatch_is_fatal() {
        let err = parse_channel(ChannelKind::Saa, "saa.csv", b"ut_ms,sa\n1,2\n").unwrap_err();
        assert!(matches!(err, Error::Schema(_)));
        let err = parse_channel(ChannelKind::Pw, "pw.csv", b"ut_ms,FOO\n1,2\n").unwrap_err();
        assert!(matches!(err, Error::Schema(_)));
    }

    #[test]
    fn empty_stream_is_fatal() {
        assert!(matches!(
            parse_channel(ChannelKind::Lt, "lt.csv", b"").unwrap_err(),
            Error::Empty(_)
        ));
    }

    #[test]
    fn bad_values_are_reported() {
        let data = b"rev,event,enter_ms,exit_ms\n1,earth_umbra,10,20\n1,sun_umbra,10,20\n1,moon_penumbra,x,20\n";
        let (table, report) = parse_channel(ChannelKind::Eclipse, "e.csv", data).unwrap();
        assert_eq!(table.rows.len(), 1);
        let reasons: Vec<&str> = report
            .rejection_reasons
            .iter()
            .map(|r| r.reason.as_str())
            .collect();
        assert_eq!(reasons, vec!["event:event", "int:enter_ms"]);
    }

    #[test]
    fn non_finite_float_rejected() {
        let data = b"ut_ms,count_rate\n1,NaN\n2,inf\n3,4.5\n";
        let (_, report) = parse_channel(ChannelKind::Irem, "irem.csv", data).unwrap();
        assert_eq!(report.accepted, 1);
        assert_eq!(report.rejected, 2);
    }

    #[test]
    fn kind_names_round_trip() {
        for kind in ChannelKind::ALL {
            assert_eq!(kind.as_str().parse::<ChannelKind>().unwrap(), kind);
        }
    }
}
