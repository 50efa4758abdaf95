//! Belt entry/exit detection by thresholding binned IREM medians.
//!
//! A transition is the midpoint between two consecutive observed bin centers
//! whose medians lie on opposite sides of the threshold (strictly above means
//! in-belt). A belt passage is attributed to the perigee it brackets: the
//! window of revolution k runs from phase 0.5 of the previous revolution to
//! phase 0.5 of its own. The entry is the first below-to-above transition in
//! that window and the exit the last above-to-below one. An entry before the
//! perigee gets its phase and altitude from the previous revolution (a
//! nominal one of the same length for the first revolution).

use serde::{Deserialize, Serialize};

use super::irem::BinnedIrem;
use super::orbit::{next_perigee, phase_to_altitude, raw_phase, Revolution};
use crate::error::Result;

pub const DEFAULT_THRESHOLD: f64 = 600.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub time_ms: i64,
    pub phase: f64,
    pub altitude_km: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevolutionCrossings {
    pub rev: i64,
    /// `None` when missing.
    pub entry: Option<Crossing>,
    pub exit: Option<Crossing>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CrossingLabels {
    pub revolutions: Vec<RevolutionCrossings>,
}

impl CrossingLabels {
    pub fn get(&self, rev: i64) -> Option<&RevolutionCrossings> {
        self.revolutions.iter().find(|r| r.rev == rev)
    }
}

pub fn in_belt(median: f64, threshold: f64) -> bool {
    median > threshold
}

pub fn detect_crossings(
    binned: &BinnedIrem,
    revs: &[Revolution],
    threshold: f64,
) -> Result<CrossingLabels> {
    // (time, is_entry)
    let observed: Vec<(i64, bool)> = binned
        .centers
        .iter()
        .zip(&binned.medians)
        .filter_map(|(&c, m)| m.map(|m| (c, in_belt(m, threshold))))
        .collect();
    let transitions: Vec<(i64, bool)> = observed
        .windows(2)
        .filter(|w| w[0].1 != w[1].1)
        .map(|w| ((w[0].0 + w[1].0) / 2, w[1].1))
        .collect();

    let mut out = CrossingLabels::default();
    for (i, rev) in revs.iter().enumerate() {
        let end = next_perigee(revs, i);
        // previous revolution (nominal when this is the first one)
        let (prev_start, prev_rev) = match i {
            0 => (rev.perigee_ms - (end - rev.perigee_ms), rev),
            _ => (revs[i - 1].perigee_ms, &revs[i - 1]),
        };
        let from = rev.perigee_ms - (rev.perigee_ms - prev_start) / 2;
        let to = rev.perigee_ms + (end - rev.perigee_ms) / 2;
        let lo = transitions.partition_point(|t| t.0 < from);
        let hi = transitions.partition_point(|t| t.0 < to);
        let window = &transitions[lo..hi];
        let label = |t: i64| -> Result<Crossing> {
            let (phase, owner) = if t < rev.perigee_ms {
                (raw_phase(t, prev_start, rev.perigee_ms), prev_rev)
            } else {
                (raw_phase(t, rev.perigee_ms, end), rev)
            };
            Ok(Crossing {
                time_ms: t,
                phase,
                altitude_km: phase_to_altitude(phase, owner)?,
            })
        };
        let entry = window.iter().find(|t| t.1).map(|t| label(t.0)).transpose()?;
        let exit = window.iter().rev().find(|t| !t.1).map(|t| label(t.0)).transpose()?;
        out.revolutions.push(RevolutionCrossings {
            rev: rev.rev,
            entry,
            exit,
        });
    }
    Ok(out)
}
