//! Phase to altitude through Kepler's equation.

use num_traits::{Float, FloatConst};

use crate::error::{Error, Result};

pub const EARTH_RADIUS_KM: f64 = 6371.0;
pub const MAX_ITERATIONS: usize = 50;

/// Solves `M = E - e sin E` for the eccentric anomaly with Newton steps,
/// falling back to bisection whenever a step leaves the bracket `[0, 2pi]`.
/// `mean_anomaly` must lie in `[0, 2pi]` and `0 <= e < 1`.
pub fn eccentric_anomaly<T: Float + FloatConst>(mean_anomaly: T, e: T) -> Result<T> {
    let two_pi = T::TAU();
    if !(e >= T::zero() && e < T::one()) || !(mean_anomaly >= T::zero() && mean_anomaly <= two_pi) {
        return Err(Error::invalid(format!(
            "kepler input out of range: e = {:?}, M = {:?}",
            e.to_f64(),
            mean_anomaly.to_f64()
        )));
    }
    let tol = T::from(1e-12).unwrap().max(T::epsilon() * T::from(16.0).unwrap());
    let (mut lo, mut hi) = (T::zero(), two_pi);
    let mut ecc_anomaly = if e > T::from(0.8).unwrap() {
        T::PI()
    } else {
        mean_anomaly
    };
    for _ in 0..MAX_ITERATIONS {
        let f = ecc_anomaly - e * ecc_anomaly.sin() - mean_anomaly;
        if f == T::zero() {
            return Ok(ecc_anomaly);
        }
        if f > T::zero() {
            hi = ecc_anomaly;
        } else {
            lo = ecc_anomaly;
        }
        let mut next = ecc_anomaly - f / (T::one() - e * ecc_anomaly.cos());
        if !(next > lo && next < hi) {
            next = (lo + hi) / (T::one() + T::one());
        }
        let step = (next - ecc_anomaly).abs();
        ecc_anomaly = next;
        if step < tol {
            return Ok(ecc_anomaly);
        }
    }
    Err(Error::KeplerNonConvergence {
        eccentricity: e.to_f64().unwrap_or(f64::NAN),
        mean_anomaly: mean_anomaly.to_f64().unwrap_or(f64::NAN),
    })
}

/// Orbital radius at `phase` (0 at perigee, 1 at the next perigee).
pub fn radius_at_phase<T: Float + FloatConst>(phase: T, semimajor: T, e: T) -> Result<T> {
    if !(phase >= T::zero() && phase <= T::one()) {
        return Err(Error::invalid(format!(
            "phase {:?} outside [0, 1]",
            phase.to_f64()
        )));
    }
    let ecc_anomaly = eccentric_anomaly(T::TAU() * phase, e)?;
    Ok(semimajor * (T::one() - e * ecc_anomaly.cos()))
}

/// Altitude above a spherical Earth of radius [`EARTH_RADIUS_KM`].
pub fn altitude_at_phase<T: Float + FloatConst>(phase: T, semimajor_km: T, e: T) -> Result<T> {
    Ok(radius_at_phase(phase, semimajor_km, e)? - T::from(EARTH_RADIUS_KM).unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    /// Independent bisection oracle on `E - e sin E - M` over `[0, 2pi]`.
    fn bisect(m: f64, e: f64) -> f64 {
        let (mut lo, mut hi) = (0.0f64, 2.0 * PI);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid - e * mid.sin() - m > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn perigee_and_apogee() {
        let (a, e) = (87_000.0, 0.5);
        assert_eq!(altitude_at_phase(0.0, a, e).unwrap(), a * (1.0 - e) - EARTH_RADIUS_KM);
        assert_eq!(altitude_at_phase(0.5, a, e).unwrap(), a * (1.0 + e) - EARTH_RADIUS_KM);
        assert_eq!(altitude_at_phase(1.0, a, e).unwrap(), a * (1.0 - e) - EARTH_RADIUS_KM);
    }

    #[test]
    fn quarter_phase_matches_bisection() {
        let (a, e) = (87_000.0, 0.5);
        let expected = a * (1.0 - e * bisect(PI / 2.0, e).cos()) - EARTH_RADIUS_KM;
        let got = altitude_at_phase(0.25, a, e).unwrap();
        assert!(((got - expected) / expected).abs() < 1e-9, "{got} vs {expected}");
    }

    #[test]
    fn circular_orbit_constant_altitude() {
        for p in [0.0, 0.1, 0.37, 0.5, 0.93] {
            assert_eq!(altitude_at_phase(p, 42_164.0, 0.0).unwrap(), 42_164.0 - EARTH_RADIUS_KM);
        }
    }

    #[test]
    fn single_precision() {
        let alt = altitude_at_phase(0.5f32, 87_000.0, 0.5).unwrap();
        assert!((alt - (130_500.0 - 6371.0)).abs() < 0.1);
        let q = altitude_at_phase(0.25f32, 87_000.0, 0.5).unwrap() as f64;
        let expected = 87_000.0 * (1.0 - 0.5 * bisect(PI / 2.0, 0.5).cos()) - EARTH_RADIUS_KM;
        assert!(((q - expected) / expected).abs() < 1e-5);
    }

    #[test]
    fn bad_inputs() {
        assert!(altitude_at_phase(1.5, 87_000.0, 0.5).is_err());
        assert!(altitude_at_phase(0.5, 87_000.0, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn monotone_toward_apogee(e in 0.0f64..0.95, p in 0.0f64..=0.5) {
            let a = 70_000.0;
            let h0 = altitude_at_phase(0.0, a, e).unwrap();
            let h = altitude_at_phase(p, a, e).unwrap();
            let h_apo = altitude_at_phase(0.5, a, e).unwrap();
            prop_assert!(h0 <= h && h <= h_apo);
        }

        #[test]
        fn matches_bisection(e in 0.0f64..0.9, p in 0.0f64..=1.0) {
            let m = 2.0 * PI * p;
            let got = eccentric_anomaly(m, e).unwrap();
            prop_assert!((got - bisect(m, e)).abs() < 1e-10);
        }
    }
}
