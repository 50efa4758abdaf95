//! Revolutions: the 12 orbital elements of each perigee-to-perigee orbit plus
//! its eclipse events.

use serde::{Deserialize, Serialize};

use super::kepler;
use crate::error::{Error, Result};
use crate::ingest::{ChannelKind, RawTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EclipseKind {
    EarthUmbra,
    EarthPenumbra,
    MoonPenumbra,
}

impl EclipseKind {
    pub const ALL: [EclipseKind; 3] = [
        EclipseKind::EarthUmbra,
        EclipseKind::EarthPenumbra,
        EclipseKind::MoonPenumbra,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EclipseKind::EarthUmbra => "earth_umbra",
            EclipseKind::EarthPenumbra => "earth_penumbra",
            EclipseKind::MoonPenumbra => "moon_penumbra",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        EclipseKind::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EclipseEvent {
    pub kind: EclipseKind,
    pub enter_ms: i64,
    pub exit_ms: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Revolution {
    pub rev: i64,
    pub perigee_ms: i64,
    pub perigee_alt_km: f64,
    pub apogee_ms: i64,
    pub apogee_alt_km: f64,
    pub perigee_lon_deg: f64,
    pub semimajor_km: f64,
    pub eccentricity: f64,
    pub inclination_deg: f64,
    pub raan_deg: f64,
    pub argp_deg: f64,
    pub period_s: f64,
    pub period_diff_s: f64,
    pub eclipse_events: Vec<EclipseEvent>,
}

/// Feature names of the 12 orbital elements, in [`Revolution::elements`] order.
pub const ELEMENT_NAMES: [&str; 12] = [
    "perigee_ms",
    "perigee_alt_km",
    "apogee_ms",
    "apogee_alt_km",
    "perigee_lon_deg",
    "semimajor_km",
    "eccentricity",
    "inclination_deg",
    "raan_deg",
    "argp_deg",
    "period_s",
    "period_diff_s",
];

impl Revolution {
    pub fn elements(&self) -> [f64; 12] {
        [
            self.perigee_ms as f64,
            self.perigee_alt_km,
            self.apogee_ms as f64,
            self.apogee_alt_km,
            self.perigee_lon_deg,
            self.semimajor_km,
            self.eccentricity,
            self.inclination_deg,
            self.raan_deg,
            self.argp_deg,
            self.period_s,
            self.period_diff_s,
        ]
    }

    pub fn event(&self, kind: EclipseKind) -> Option<&EclipseEvent> {
        self.eclipse_events.iter().find(|e| e.kind == kind)
    }

    /// Nominal end of the revolution when the next perigee is unknown.
    pub fn nominal_next_perigee(&self) -> i64 {
        self.perigee_ms + (self.period_s * 1000.0).round() as i64
    }
}

/// End of revolution `i`: the next perigee, or perigee + period for the last one.
pub fn next_perigee(revs: &[Revolution], i: usize) -> i64 {
    revs.get(i + 1)
        .map(|r| r.perigee_ms)
        .unwrap_or_else(|| revs[i].nominal_next_perigee())
}

/// Affine phase of `t` within a revolution: 0 at perigee, 1 at the next perigee.
pub fn to_phase(t: i64, rev: &Revolution, next_perigee: i64) -> Result<f64> {
    if next_perigee <= rev.perigee_ms {
        return Err(Error::invalid(format!("revolution {} has no duration", rev.rev)));
    }
    if t < rev.perigee_ms || t > next_perigee {
        return Err(Error::invalid(format!(
            "time {t} outside revolution {} [{}, {next_perigee}]",
            rev.rev, rev.perigee_ms
        )));
    }
    Ok(raw_phase(t, rev.perigee_ms, next_perigee))
}

pub(crate) fn raw_phase(t: i64, perigee: i64, next_perigee: i64) -> f64 {
    (t - perigee) as f64 / (next_perigee - perigee) as f64
}

pub fn phase_to_altitude(phase: f64, rev: &Revolution) -> Result<f64> {
    kepler::altitude_at_phase(phase, rev.semimajor_km, rev.eccentricity)
}

/// Assembles revolutions from the ORBIT table and, optionally, the ECLIPSE
/// table. Flagged orbit rows are skipped; ordering and element invariants are
/// checked.
pub fn revolutions_from_tables(orbit: &RawTable, eclipse: Option<&RawTable>) -> Result<Vec<Revolution>> {
    if orbit.kind != ChannelKind::Orbit {
        return Err(Error::invalid(format!("expected ORBIT table, got {}", orbit.kind)));
    }
    let idx: Vec<usize> = std::iter::once("rev")
        .chain(ELEMENT_NAMES)
        .map(|name| orbit.require_column(name))
        .collect::<Result<_>>()?;
    let f = |row: &crate::ingest::Row, i: usize| row.values[idx[i]].as_f64().expect("numeric");
    let n = |row: &crate::ingest::Row, i: usize| row.values[idx[i]].as_i64().expect("int");
    let mut revs: Vec<Revolution> = orbit
        .valid_rows()
        .map(|r| Revolution {
            rev: n(r, 0),
            perigee_ms: n(r, 1),
            perigee_alt_km: f(r, 2),
            apogee_ms: n(r, 3),
            apogee_alt_km: f(r, 4),
            perigee_lon_deg: f(r, 5),
            semimajor_km: f(r, 6),
            eccentricity: f(r, 7),
            inclination_deg: f(r, 8),
            raan_deg: f(r, 9),
            argp_deg: f(r, 10),
            period_s: f(r, 11),
            period_diff_s: f(r, 12),
            eclipse_events: Vec::new(),
        })
        .collect();
    revs.sort_by_key(|r| r.perigee_ms);

    if let Some(ecl) = eclipse {
        if ecl.kind != ChannelKind::Eclipse {
            return Err(Error::invalid(format!("expected ECLIPSE table, got {}", ecl.kind)));
        }
        let (ri, ei, ni, xi) = (
            ecl.require_column("rev")?,
            ecl.require_column("event")?,
            ecl.require_column("enter_ms")?,
            ecl.require_column("exit_ms")?,
        );
        for row in ecl.valid_rows() {
            let rev_no = row.values[ri].as_i64().expect("int");
            let kind = EclipseKind::parse(row.values[ei].as_str().expect("text"))
                .expect("parser validated the event name");
            if let Some(rev) = revs.iter_mut().find(|r| r.rev == rev_no) {
                if rev.event(kind).is_none() {
                    rev.eclipse_events.push(EclipseEvent {
                        kind,
                        enter_ms: row.values[ni].as_i64().expect("int"),
                        exit_ms: row.values[xi].as_i64().expect("int"),
                    });
                }
            }
        }
        for rev in &mut revs {
            rev.eclipse_events.sort_by_key(|e| e.kind);
        }
    }
    validate(&revs)?;
    Ok(revs)
}

pub fn validate(revs: &[Revolution]) -> Result<()> {
    for (i, r) in revs.iter().enumerate() {
        let bad = |what: &str| Err(Error::invalid(format!("revolution {}: {what}", r.rev)));
        if !(0.0..1.0).contains(&r.eccentricity) {
            return bad("eccentricity outside [0, 1)");
        }
        if r.period_s.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return bad("period must be positive");
        }
        if r.apogee_ms <= r.perigee_ms {
            return bad("apogee not after perigee");
        }
        if r.apogee_ms >= next_perigee(revs, i) {
            return bad("apogee not before next perigee");
        }
    }
    Ok(())
}
