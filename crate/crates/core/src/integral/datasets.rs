//! Positional (one row per IREM bin) and per-revolution (one row per orbit)
//! representations.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::crossings::{in_belt, CrossingLabels};
use super::irem::BinnedIrem;
use super::orbit::{next_perigee, raw_phase, EclipseKind, Revolution, ELEMENT_NAMES};
use crate::dataset::{Dataset, Feature};
use crate::error::Result;

pub const ORBIT_CATEGORY: &str = "ORBIT";
pub const PHASE_CATEGORY: &str = "PHASE";
pub const ECLIPSE_CATEGORY: &str = "ECLIPSE";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PositionalTask {
    /// Predict the median IREM count rate.
    #[default]
    Regression,
    /// Predict the in-belt indicator.
    Classification,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetVariant {
    #[default]
    Phase,
    Altitude,
}

#[derive(Debug, Clone)]
pub struct PositionalBuild {
    pub dataset: Dataset<f64>,
    /// Bins whose center lies outside every revolution.
    pub dropped: usize,
}

fn element_features() -> Vec<Feature> {
    ELEMENT_NAMES
        .iter()
        .map(|n| Feature::new(*n, ORBIT_CATEGORY))
        .collect()
}

/// One row per bin whose center falls in a revolution `[perigee, next
/// perigee)`: the revolution's 12 elements and the bin-center phase.
pub fn build_positional(
    revs: &[Revolution],
    binned: &BinnedIrem,
    task: PositionalTask,
    threshold: f64,
) -> Result<PositionalBuild> {
    let mut features = element_features();
    features.push(Feature::new("phase", PHASE_CATEGORY));
    let target = match task {
        PositionalTask::Regression => "irem_count",
        PositionalTask::Classification => "in_belt",
    };
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut time = Vec::new();
    let mut dropped = 0;
    for (&center, median) in binned.centers.iter().zip(&binned.medians) {
        let i = revs.partition_point(|r| r.perigee_ms <= center);
        if i == 0 || center >= next_perigee(revs, i - 1) {
            dropped += 1;
            continue;
        }
        let rev = &revs[i - 1];
        xs.extend(rev.elements());
        xs.push(raw_phase(center, rev.perigee_ms, next_perigee(revs, i - 1)));
        ys.push(match (task, median) {
            (_, None) => f64::NAN,
            (PositionalTask::Regression, Some(m)) => *m,
            (PositionalTask::Classification, Some(m)) => f64::from(u8::from(in_belt(*m, threshold))),
        });
        time.push(center);
    }
    let n = time.len();
    let dataset = Dataset::new(
        features,
        vec![target.to_owned()],
        Array2::from_shape_vec((n, 13), xs).expect("shape"),
        Array2::from_shape_vec((n, 1), ys).expect("shape"),
        time,
    )?;
    Ok(PositionalBuild { dataset, dropped })
}

pub fn eclipse_feature_names() -> Vec<String> {
    EclipseKind::ALL
        .iter()
        .flat_map(|k| {
            [
                format!("{}_enter_phase", k.as_str()),
                format!("{}_exit_phase", k.as_str()),
            ]
        })
        .collect()
}

/// One row per revolution: 12 elements, enter/exit phases of the three
/// eclipse types (apogee phase when an event is absent) and two targets.
pub fn build_per_revolution(
    revs: &[Revolution],
    labels: &CrossingLabels,
    variant: TargetVariant,
) -> Result<Dataset<f64>> {
    let mut features = element_features();
    features.extend(
        eclipse_feature_names()
            .into_iter()
            .map(|n| Feature::new(n, ECLIPSE_CATEGORY)),
    );
    let targets = match variant {
        TargetVariant::Phase => vec!["entry_phase".to_owned(), "exit_phase".to_owned()],
        TargetVariant::Altitude => vec!["entry_alt_km".to_owned(), "exit_alt_km".to_owned()],
    };
    let mut xs = Vec::with_capacity(revs.len() * 18);
    let mut ys = Vec::with_capacity(revs.len() * 2);
    for (i, rev) in revs.iter().enumerate() {
        let end = next_perigee(revs, i);
        let phase = |t: i64| raw_phase(t, rev.perigee_ms, end).clamp(0.0, 1.0);
        let fill = phase(rev.apogee_ms);
        xs.extend(rev.elements());
        for kind in EclipseKind::ALL {
            match rev.event(kind) {
                Some(ev) => xs.extend([phase(ev.enter_ms), phase(ev.exit_ms)]),
                None => xs.extend([fill, fill]),
            }
        }
        let label = labels.get(rev.rev);
        for crossing in [label.and_then(|l| l.entry), label.and_then(|l| l.exit)] {
            ys.push(match (crossing, variant) {
                (None, _) => f64::NAN,
                (Some(c), TargetVariant::Phase) => c.phase,
                (Some(c), TargetVariant::Altitude) => c.altitude_km,
            });
        }
    }
    let n = revs.len();
    Dataset::new(
        features,
        targets,
        Array2::from_shape_vec((n, 18), xs).expect("shape"),
        Array2::from_shape_vec((n, 2), ys).expect("shape"),
        revs.iter().map(|r| r.perigee_ms).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integral::crossings::{Crossing, RevolutionCrossings};
    use crate::integral::orbit::EclipseEvent;

    const HOUR: i64 = 3_600_000;

    fn rev(no: i64, perigee: i64, hours: i64) -> Revolution {
        Revolution {
            rev: no,
            perigee_ms: perigee,
            perigee_alt_km: 9000.0,
            apogee_ms: perigee + hours * HOUR / 2,
            apogee_alt_km: 150_000.0,
            perigee_lon_deg: 10.0,
            semimajor_km: 87_000.0,
            eccentricity: 0.8,
            inclination_deg: 50.0,
            raan_deg: 100.0,
            argp_deg: 250.0,
            period_s: (hours * 3600) as f64,
            period_diff_s: 0.0,
            eclipse_events: vec![],
        }
    }

    fn binned_over(from: i64, to: i64) -> BinnedIrem {
        let w = 900_000;
        let mut centers = Vec::new();
        let mut t = from + w / 2;
        while t < to {
            centers.push(t);
            t += w;
        }
        BinnedIrem {
            width_min: 15,
            medians: centers.iter().map(|&c| Some(if c % 2_700_000 == 450_000 { 900.0 } else { 10.0 })).collect(),
            centers,
        }
    }

    #[test]
    fn sixty_four_hour_revolution_rows() {
        let revs = vec![rev(1, 0, 64)];
        let b = binned_over(-4 * 900_000, 64 * HOUR + 2 * 900_000);
        let built = build_positional(&revs, &b, PositionalTask::Regression, 600.0).unwrap();
        assert_eq!(built.dataset.n_rows(), 256);
        assert_eq!(built.dropped, 6);
        assert_eq!(built.dataset.n_features(), 13);
    }

    #[test]
    fn classification_targets_binary() {
        let revs = vec![rev(1, 0, 64)];
        let b = binned_over(0, 64 * HOUR);
        let built = build_positional(&revs, &b, PositionalTask::Classification, 600.0).unwrap();
        assert!(built.dataset.y.iter().all(|&v| v == 0.0 || v == 1.0));
        assert!(built.dataset.y.iter().any(|&v| v == 1.0));
    }

    #[test]
    fn apogee_fill_for_absent_events() {
        let mut r = rev(1, 0, 64);
        r.eclipse_events.push(EclipseEvent {
            kind: EclipseKind::EarthUmbra,
            enter_ms: 16 * HOUR,
            exit_ms: 17 * HOUR,
        });
        let labels = CrossingLabels {
            revolutions: vec![RevolutionCrossings {
                rev: 1,
                entry: Some(Crossing { time_ms: 60 * HOUR, phase: 0.9375, altitude_km: 40_000.0 }),
                exit: None,
            }],
        };
        let d = build_per_revolution(&[r], &labels, TargetVariant::Phase).unwrap();
        assert_eq!(d.n_features(), 18);
        assert_eq!(d.n_targets(), 2);
        let row = d.x.row(0);
        assert_eq!(row[12], 0.25);
        assert_eq!(row[13], 17.0 / 64.0);
        // penumbra and moon penumbra fall back to the apogee phase
        assert!(row.iter().skip(14).all(|&v| v == 0.5));
        assert_eq!(d.y[[0, 0]], 0.9375);
        assert!(d.y[[0, 1]].is_nan());
    }

    #[test]
    fn missing_labels_keep_row() {
        let d = build_per_revolution(&[rev(1, 0, 64)], &CrossingLabels::default(), TargetVariant::Altitude)
            .unwrap();
        assert_eq!(d.n_rows(), 1);
        assert!(d.y.iter().all(|v| v.is_nan()));
        assert_eq!(d.targets, vec!["entry_alt_km", "exit_alt_km"]);
    }
}
