//! Seeded synthetic telemetry standing in for the real mission archives.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Feature};
use crate::error::Result;
use crate::ingest::{parse_channel, ChannelKind, RawTable, ECLIPSE_EVENTS};
use crate::integral::kepler::EARTH_RADIUS_KM;
use crate::integral::IntegralInputs;
use crate::mex::{MexInputs, POWER_LINES};

const MINUTE: i64 = 60_000;
const HOUR: i64 = 60 * MINUTE;

fn parse(kind: ChannelKind, name: &str, text: &str) -> Result<RawTable> {
    Ok(parse_channel(kind, name, text.as_bytes())?.0)
}

// ---------------------------------------------------------------- MEX

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MexSynth {
    pub seed: u64,
    pub start_ms: i64,
    pub hours: i64,
    pub pw_cadence_min: i64,
    pub orbit_hours: f64,
}

impl Default for MexSynth {
    fn default() -> Self {
        MexSynth {
            seed: 1,
            start_ms: 1_219_622_400_000,
            hours: 72,
            pw_cadence_min: 5,
            orbit_hours: 7.0,
        }
    }
}

/// CSV text of the six MEX channels.
#[derive(Debug, Clone)]
pub struct MexFiles {
    pub saa: String,
    pub dmop: String,
    pub ftl: String,
    pub evt: String,
    pub lt: String,
    pub pw: String,
}

const DMOP_COMMANDS: [&str; 6] = ["ATTTF301E", "AAAAF20C1", "AMMMF18A0", "APSF28A1", "ASEQ4200", "ASSSF01P0"];
const POINTINGS: [&str; 5] = ["EARTH", "INERTIAL", "NADIR", "SLEW", "WARMUP"];

impl MexSynth {
    pub fn generate(&self) -> MexFiles {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let start = self.start_ms;
        let end = start + self.hours * HOUR;
        let period = (self.orbit_hours * HOUR as f64) as i64;
        let tau = std::f64::consts::TAU;
        let sa_at = |t: i64| 90.0 + 60.0 * (tau * (t - start) as f64 / period as f64).sin();

        let mut saa = String::from("ut_ms,sa,sx,sy,sz\n");
        for t in (start..end).step_by((10 * MINUTE) as usize) {
            let ph = (t - start) as f64 / period as f64;
            let sa = sa_at(t);
            let sx = 90.0 + 30.0 * (tau * ph).cos();
            let sy = 90.0 + 20.0 * (tau * (t - start) as f64 / (24 * HOUR) as f64).sin();
            let sz = 180.0 - sa;
            writeln!(saa, "{t},{sa},{sx},{sy},{sz}").unwrap();
        }

        // umbra around every other pericentre
        let mut umbra: Vec<(i64, i64)> = Vec::new();
        let mut evt = String::from("ut_ms,description\n");
        let mut k = 0;
        while start + k * period < end {
            let peri = start + k * period + period / 4;
            if k % 2 == 0 && peri + 20 * MINUTE < end {
                umbra.push((peri - 10 * MINUTE, peri + 20 * MINUTE));
                writeln!(evt, "{},MAR_UMBRA_START", peri - 10 * MINUTE).unwrap();
            }
            if peri < end {
                writeln!(evt, "{peri},{k}_PERICENTRE").unwrap();
            }
            if k % 2 == 0 && peri + 20 * MINUTE < end {
                writeln!(evt, "{},MAR_UMBRA_END", peri + 20 * MINUTE).unwrap();
            }
            if peri + period / 2 < end {
                writeln!(evt, "{},{k}_APOCENTRE", peri + period / 2).unwrap();
            }
            k += 1;
        }
        let in_umbra = |t: i64| umbra.iter().any(|&(a, b)| a <= t && t < b);

        let gap = Exp::new(1.0 / (20.0 * MINUTE as f64)).unwrap();
        let mut dmop = String::from("ut_ms,command\n");
        let mut commands: Vec<(i64, usize)> = Vec::new();
        let mut t = start as f64;
        loop {
            t += gap.sample(&mut rng);
            if t >= end as f64 {
                break;
            }
            let c = rng.random_range(0..DMOP_COMMANDS.len());
            commands.push((t as i64, c));
            writeln!(dmop, "{},{}", t as i64, DMOP_COMMANDS[c]).unwrap();
        }

        let mut ftl = String::from("utb_ms,ute_ms,pointing\n");
        let mut pointing_at: Vec<(i64, i64, usize)> = Vec::new();
        let mut b = start;
        while b < end {
            let len = rng.random_range(1..=4) * HOUR;
            let p = rng.random_range(0..POINTINGS.len());
            let e = (b + len - rng.random_range(0..10) * MINUTE).min(end);
            writeln!(ftl, "{b},{e},{}", POINTINGS[p]).unwrap();
            pointing_at.push((b, e, p));
            b += len;
        }

        let mut lt = String::from("ut_ms,sunmars_km,eclipseduration_min,occultationduration_min\n");
        for t in (start - 6 * HOUR..end + 6 * HOUR).step_by((6 * HOUR) as usize) {
            let days = (t - start) as f64 / (24 * HOUR) as f64;
            let sun = 2.2e8 + 1.0e7 * (tau * days / 687.0).sin();
            let ecl = 30.0 + 5.0 * (tau * days / 30.0).sin();
            let occ = 20.0 + 5.0 * (tau * days / 11.0).cos();
            writeln!(lt, "{t},{sun},{ecl},{occ}").unwrap();
        }

        let noise = Normal::new(0.0, 0.01).unwrap();
        let coef: Vec<[f64; 4]> = (0..POWER_LINES.len())
            .map(|_| {
                [
                    rng.random_range(0.02..0.3),
                    rng.random_range(0.0..0.4),
                    rng.random_range(0.0..0.5),
                    rng.random_range(0.0..0.2),
                ]
            })
            .collect();
        let mut pw = String::from("ut_ms");
        for line in POWER_LINES {
            pw.push(',');
            pw.push_str(line);
        }
        pw.push('\n');
        for t in (start..end).step_by((self.pw_cadence_min * MINUTE) as usize) {
            let sun = sa_at(t) / 180.0;
            let dark = f64::from(u8::from(in_umbra(t)));
            let busy = commands
                .iter()
                .filter(|(c, kind)| *kind == 0 && *c <= t && t - *c < HOUR)
                .count() as f64;
            let earth = f64::from(u8::from(
                pointing_at.iter().any(|&(b, e, p)| p == 0 && b <= t && t < e),
            ));
            write!(pw, "{t}").unwrap();
            for c in &coef {
                let v = c[0] + c[1] * sun + c[2] * dark + c[3] * (0.5 * busy + earth) + noise.sample(&mut rng);
                write!(pw, ",{}", v.max(0.0)).unwrap();
            }
            pw.push('\n');
        }

        MexFiles {
            saa,
            dmop,
            ftl,
            evt,
            lt,
            pw,
        }
    }
}

impl MexFiles {
    pub fn tables(&self) -> Result<Vec<RawTable>> {
        Ok(vec![
            parse(ChannelKind::Saa, "saa.csv", &self.saa)?,
            parse(ChannelKind::Dmop, "dmop.csv", &self.dmop)?,
            parse(ChannelKind::Ftl, "ftl.csv", &self.ftl)?,
            parse(ChannelKind::Evt, "evt.csv", &self.evt)?,
            parse(ChannelKind::Lt, "lt.csv", &self.lt)?,
            parse(ChannelKind::Pw, "pw.csv", &self.pw)?,
        ])
    }

    pub fn write(&self, dir: &Path) -> Result<MexInputs> {
        std::fs::create_dir_all(dir)?;
        let inputs = MexInputs {
            saa: dir.join("saa.csv"),
            dmop: dir.join("dmop.csv"),
            ftl: dir.join("ftl.csv"),
            evt: dir.join("evt.csv"),
            lt: dir.join("lt.csv"),
            pw: dir.join("pw.csv"),
        };
        for (path, text) in [
            (&inputs.saa, &self.saa),
            (&inputs.dmop, &self.dmop),
            (&inputs.ftl, &self.ftl),
            (&inputs.evt, &self.evt),
            (&inputs.lt, &self.lt),
            (&inputs.pw, &self.pw),
        ] {
            std::fs::write(path, text)?;
        }
        Ok(inputs)
    }
}

// ---------------------------------------------------------------- INTEGRAL

/// IREM sampling extent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Coverage {
    Full,
    /// Only within `phase_margin` of each perigee.
    NearPerigee { phase_margin: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegralSynth {
    pub seed: u64,
    pub n_revs: usize,
    pub start_ms: i64,
    pub period_h: f64,
    pub cadence_ms: i64,
    pub in_belt_counts: f64,
    pub out_belt_counts: f64,
    /// Amplitude of the element-driven part of the crossing phases.
    pub signal: f64,
    /// Standard deviation of the Gaussian phase noise.
    pub noise_sigma: f64,
    pub coverage: Coverage,
}

impl Default for IntegralSynth {
    fn default() -> Self {
        IntegralSynth {
            seed: 1,
            n_revs: 20,
            start_ms: 1_041_379_200_000,
            period_h: 64.0,
            cadence_ms: 8_000,
            in_belt_counts: 5000.0,
            out_belt_counts: 50.0,
            signal: 0.02,
            noise_sigma: 0.004,
            coverage: Coverage::NearPerigee { phase_margin: 0.12 },
        }
    }
}

/// Ground truth for one revolution: the belt passage bracketing its perigee.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruePassage {
    pub rev: i64,
    pub entry_ms: i64,
    pub exit_ms: i64,
    /// Phase of the entry within the previous revolution.
    pub entry_phase: f64,
    pub exit_phase: f64,
}

#[derive(Debug, Clone)]
pub struct IntegralFiles {
    pub orbit: String,
    pub irem: String,
    pub eclipse: String,
    pub truth: Vec<TruePassage>,
}

/// Normalized drivers of revolution `k`: eccentricity and perigee altitude
/// offsets in [-1, 1], from a low-discrepancy sequence so that any contiguous
/// block of revolutions covers the plane evenly.
fn drivers(k: usize) -> (f64, f64) {
    const G: f64 = 1.324_717_957_244_746;
    let k = k as f64 + 0.5;
    (2.0 * (k / G).fract() - 1.0, 2.0 * (k / (G * G)).fract() - 1.0)
}

/// Smooth part of the entry and exit phases as a function of the drivers.
pub fn crossing_signal(u: f64, v: f64, amplitude: f64) -> (f64, f64) {
    (
        0.94 - amplitude * (0.7 * u + 0.3 * v + 0.5 * u * v),
        0.06 + amplitude * (0.7 * u - 0.5 * v + 0.3 * u * v),
    )
}

impl IntegralSynth {
    pub fn generate(&self) -> IntegralFiles {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let noise = Normal::new(0.0, self.noise_sigma.max(0.0)).unwrap();
        let n = self.n_revs;
        let base_s = (self.period_h * 3600.0).round();
        let periods: Vec<f64> = (0..n + 1)
            .map(|k| base_s + (30.0 * (std::f64::consts::TAU * k as f64 / 11.0).sin()).round())
            .collect();
        let mut perigees = vec![self.start_ms];
        for k in 0..n {
            perigees.push(perigees[k] + (periods[k] * 1000.0) as i64);
        }
        let prev_start = perigees[0] - (periods[0] * 1000.0) as i64;

        let mut orbit = String::from(
            "rev,perigee_ms,perigee_alt_km,apogee_ms,apogee_alt_km,perigee_lon_deg,semimajor_km,eccentricity,inclination_deg,raan_deg,argp_deg,period_s,period_diff_s\n",
        );
        let mut eclipse = String::from("rev,event,enter_ms,exit_ms\n");
        let mut truth = Vec::with_capacity(n);
        for k in 0..n {
            let (u, v) = drivers(k);
            let e = 0.85 + 0.05 * u;
            let hp = 10_000.0 + 2_000.0 * v;
            let a = (EARTH_RADIUS_KM + hp) / (1.0 - e);
            let ha = a * (1.0 + e) - EARTH_RADIUS_KM;
            let p = perigees[k];
            let next = perigees[k + 1];
            let apogee = p + (next - p) / 2;
            let rev = k as i64 + 1;
            let diff = if k == 0 { 0.0 } else { periods[k] - periods[k - 1] };
            writeln!(
                orbit,
                "{rev},{p},{hp},{apogee},{ha},{},{a},{e},{},{},{},{},{diff}",
                rng.random_range(0.0..360.0),
                52.0 + 0.01 * k as f64,
                (100.0 + 0.5 * k as f64) % 360.0,
                (300.0 - 0.3 * k as f64).rem_euclid(360.0),
                periods[k],
            )
            .unwrap();
            for (event, prob) in ECLIPSE_EVENTS.iter().zip([0.3, 0.4, 0.1]) {
                if rng.random_bool(prob) {
                    let from = p + ((next - p) as f64 * rng.random_range(0.3..0.6)) as i64;
                    let to = from + rng.random_range(HOUR..3 * HOUR);
                    writeln!(eclipse, "{rev},{event},{from},{to}").unwrap();
                }
            }
            let (se, sx) = crossing_signal(u, v, self.signal);
            let entry_phase = (se + noise.sample(&mut rng)).clamp(0.5, 0.999);
            let exit_phase = (sx + noise.sample(&mut rng)).clamp(0.001, 0.5);
            let prev = if k == 0 { prev_start } else { perigees[k - 1] };
            truth.push(TruePassage {
                rev,
                entry_ms: prev + ((p - prev) as f64 * entry_phase).round() as i64,
                exit_ms: p + ((next - p) as f64 * exit_phase).round() as i64,
                entry_phase,
                exit_phase,
            });
        }

        let irem = square_wave_irem(
            &truth,
            &perigees,
            prev_start,
            self.cadence_ms,
            self.in_belt_counts,
            self.out_belt_counts,
            self.coverage,
        );
        IntegralFiles {
            orbit,
            irem,
            eclipse,
            truth,
        }
    }
}

/// IREM square wave: `high` inside each true passage, `low` elsewhere,
/// sampled every `cadence_ms`. `perigees` has one entry per revolution plus
/// the end of the last one.
pub fn square_wave_irem(
    passages: &[TruePassage],
    perigees: &[i64],
    prev_start: i64,
    cadence_ms: i64,
    high: f64,
    low: f64,
    coverage: Coverage,
) -> String {
    let mut spans: Vec<(i64, i64)> = Vec::new();
    let first = perigees[0];
    let last = *perigees.last().expect("perigees");
    match coverage {
        Coverage::Full => spans.push((first - (first - prev_start) / 2, last)),
        Coverage::NearPerigee { phase_margin } => {
            for k in 0..perigees.len() - 1 {
                let before = if k == 0 { first - prev_start } else { perigees[k] - perigees[k - 1] };
                let after = perigees[k + 1] - perigees[k];
                spans.push((
                    perigees[k] - (before as f64 * phase_margin) as i64,
                    perigees[k] + (after as f64 * phase_margin) as i64,
                ));
            }
        }
    }
    let mut out = String::from("ut_ms,count_rate\n");
    let mut j = 0;
    for (from, to) in spans {
        let mut t = from - from.rem_euclid(cadence_ms);
        while t < to {
            while j + 1 < passages.len() && passages[j].exit_ms < t {
                j += 1;
            }
            let inside = passages
                .get(j)
                .is_some_and(|p| p.entry_ms <= t && t < p.exit_ms);
            writeln!(out, "{t},{}", if inside { high } else { low }).unwrap();
            t += cadence_ms;
        }
    }
    out
}

impl IntegralFiles {
    pub fn tables(&self) -> Result<(RawTable, RawTable, RawTable)> {
        Ok((
            parse(ChannelKind::Orbit, "orbit.csv", &self.orbit)?,
            parse(ChannelKind::Irem, "irem.csv", &self.irem)?,
            parse(ChannelKind::Eclipse, "eclipse.csv", &self.eclipse)?,
        ))
    }

    pub fn write(&self, dir: &Path) -> Result<IntegralInputs> {
        std::fs::create_dir_all(dir)?;
        let inputs = IntegralInputs {
            orbit: dir.join("orbit.csv"),
            irem: dir.join("irem.csv"),
            eclipse: Some(dir.join("eclipse.csv")),
        };
        std::fs::write(&inputs.orbit, &self.orbit)?;
        std::fs::write(&inputs.irem, &self.irem)?;
        std::fs::write(dir.join("eclipse.csv"), &self.eclipse)?;
        Ok(inputs)
    }
}

// ---------------------------------------------------------------- tabular

/// `y = 3·x1 + N(0, noise)` with `decoys` independent uniform features.
pub fn linear_with_decoys(n: usize, decoys: usize, noise: f64, seed: u64) -> Dataset<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, noise.max(0.0)).unwrap();
    let d = decoys + 1;
    let x = Array2::from_shape_simple_fn((n, d), || rng.random_range(-1.0..1.0));
    let y = Array2::from_shape_fn((n, 1), |(i, _)| 3.0 * x[[i, 0]]);
    let y = y.mapv(|v| v + normal.sample(&mut rng));
    let mut features = vec![Feature::new("x1", "SIGNAL")];
    features.extend((0..decoys).map(|j| Feature::new(format!("decoy{}", j + 1), "DECOY")));
    Dataset::new(features, vec!["y".into()], x, y, (0..n as i64).map(|i| i * 900_000).collect())
        .expect("consistent shapes")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mex_files_parse() {
        let files = MexSynth { hours: 12, ..Default::default() }.generate();
        let tables = files.tables().unwrap();
        assert_eq!(tables.len(), 6);
        assert_eq!(tables[5].columns.len(), 34);
        assert!(tables.iter().all(|t| !t.rows.is_empty()));
    }

    #[test]
    fn integral_files_parse_and_are_seeded() {
        let cfg = IntegralSynth { n_revs: 3, ..Default::default() };
        let a = cfg.generate();
        let (orbit, irem, eclipse) = a.tables().unwrap();
        assert_eq!(orbit.rows.len(), 3);
        assert!(irem.rows.len() > 1000);
        assert!(eclipse.rows.len() <= 9);
        assert_eq!(a.irem, cfg.generate().irem);
    }

    #[test]
    fn decoy_dataset_shape() {
        let d = linear_with_decoys(50, 5, 0.1, 3);
        assert_eq!(d.n_features(), 6);
        assert_eq!(d.feature_names()[0], "x1");
    }
}
