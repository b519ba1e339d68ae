//! Pseudorange measurement model: SNR/elevation variance, class-dependent
//! weights, atmospheric delays and NLOS delay subtraction.

mod atmosphere;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub use atmosphere::{ionospheric_delay, tropospheric_delay, AtmosphereContext, SPEED_OF_LIGHT};

use crate::frames::EcefPosition;
use crate::nlos::{VerdictClass, VisibilityVerdict};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasError {
    #[error("elevation {0} rad is not above the horizon")]
    DegenerateElevation(f64),
    #[error("elevation {0} rad is below the 1 degree tropospheric mask")]
    BelowMask(f64),
    #[error("invalid weight parameters: {0}")]
    InvalidParams(String),
    #[error("invalid observation of {sat_id}: {reason}")]
    InvalidObservation { sat_id: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Constellation {
    Gps,
    Glonass,
    BeiDou,
    Other,
}

impl Constellation {
    pub fn as_str(self) -> &'static str {
        match self {
            Constellation::Gps => "GPS",
            Constellation::Glonass => "GLONASS",
            Constellation::BeiDou => "BeiDou",
            Constellation::Other => "Other",
        }
    }
}

impl fmt::Display for Constellation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Constellation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gps" | "g" => Ok(Constellation::Gps),
            "glonass" | "r" => Ok(Constellation::Glonass),
            "beidou" | "bds" | "c" => Ok(Constellation::BeiDou),
            "other" => Ok(Constellation::Other),
            other => Err(format!("unknown constellation '{other}'")),
        }
    }
}

/// One satellite's measurement at one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct SatelliteObservation {
    pub epoch_s: f64,
    pub sat_id: String,
    pub constellation: Constellation,
    pub pseudorange_m: f64,
    pub snr_dbhz: f64,
    pub sat_pos_ecef: EcefPosition,
    /// Satellite clock bias times the speed of light.
    pub sat_clock_bias_m: f64,
}

impl SatelliteObservation {
    pub fn validate(&self) -> Result<(), MeasError> {
        let bad = |reason: String| MeasError::InvalidObservation {
            sat_id: self.sat_id.clone(),
            reason,
        };
        if !(self.pseudorange_m > 1e7 && self.pseudorange_m < 1e8) {
            return Err(bad(format!("pseudorange {} m out of range", self.pseudorange_m)));
        }
        if !(0.0..=60.0).contains(&self.snr_dbhz) {
            return Err(bad(format!("SNR {} dB-Hz out of range", self.snr_dbhz)));
        }
        if ![self.sat_pos_ecef.x, self.sat_pos_ecef.y, self.sat_pos_ecef.z, self.sat_clock_bias_m]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(bad("non-finite satellite state".into()));
        }
        Ok(())
    }
}

/// Parameters of the SNR/elevation variance model plus the NLOS variance
/// inflation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightParams {
    /// SNR at and above which only the elevation term remains (dB-Hz).
    pub snr_threshold: f64,
    /// SNR floor; values below are clamped (dB-Hz).
    pub snr_floor: f64,
    /// Variance factor at the floor.
    pub amplitude: f64,
    /// Decay constant (dB-Hz).
    pub decay: f64,
    /// Variance inflation for NLOS measurements without a correction.
    pub nlos_scale: f64,
}

impl Default for WeightParams {
    fn default() -> Self {
        Self {
            snr_threshold: 50.0,
            snr_floor: 20.0,
            amplitude: 30.0,
            decay: 30.0,
            nlos_scale: 16.0,
        }
    }
}

impl WeightParams {
    pub fn validate(&self) -> Result<(), MeasError> {
        let bad = |m: &str| Err(MeasError::InvalidParams(m.to_string()));
        if !(self.snr_floor < self.snr_threshold) {
            return bad("snr_F must be below snr_T");
        }
        if !(self.amplitude > 0.0) {
            return bad("snr_A must be positive");
        }
        if !(self.decay > 0.0) {
            return bad("snr_a must be positive");
        }
        if !(self.nlos_scale >= 1.0) {
            return bad("k_w must be at least 1");
        }
        Ok(())
    }
}

/// Relative pseudorange variance from elevation and SNR.
///
/// Below the threshold `T` the SNR term is
/// `10^(-(s-T)/a) * ((A / 10^(-(F-T)/a) - 1) * (s-T)/(F-T) + 1)`, which is
/// 1 at `s = T` and `A` at `s = F`; at or above `T` it is 1. The result is
/// that term divided by `sin²(el)`.
pub fn variance_factor(elevation_rad: f64, snr_dbhz: f64, p: &WeightParams) -> Result<f64, MeasError> {
    if !(elevation_rad > 0.0) {
        return Err(MeasError::DegenerateElevation(elevation_rad));
    }
    let elevation_term = 1.0 / elevation_rad.sin().powi(2);
    if snr_dbhz >= p.snr_threshold {
        return Ok(elevation_term);
    }
    let s = snr_dbhz.max(p.snr_floor);
    let t = p.snr_threshold;
    let f = p.snr_floor;
    let a = p.decay;
    let ratio = p.amplitude / 10f64.powf(-(f - t) / a);
    let snr_term = 10f64.powf(-(s - t) / a) * ((ratio - 1.0) * (s - t) / (f - t) + 1.0);
    Ok(elevation_term * snr_term)
}

/// Inverse-variance weight; FNLOS variance is inflated by `nlos_scale`.
pub fn observation_weight(
    class: VerdictClass,
    elevation_rad: f64,
    snr_dbhz: f64,
    p: &WeightParams,
) -> Result<f64, MeasError> {
    let variance = variance_factor(elevation_rad, snr_dbhz, p)?;
    Ok(match class {
        VerdictClass::Los | VerdictClass::Cnlos => 1.0 / variance,
        VerdictClass::Fnlos => 1.0 / (p.nlos_scale * variance),
    })
}

/// Corrected pseudorange: satellite clock added back, atmosphere removed and,
/// for CNLOS, the estimated reflection delay removed.
pub fn apply_corrections(
    obs: &SatelliteObservation,
    verdict: &VisibilityVerdict,
    tropo_m: f64,
    iono_m: f64,
) -> f64 {
    let nlos = match verdict.class() {
        VerdictClass::Cnlos => verdict.nlos_delay_m().unwrap_or(0.0),
        _ => 0.0,
    };
    obs.pseudorange_m + obs.sat_clock_bias_m - iono_m - tropo_m - nlos
}
