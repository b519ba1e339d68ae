//! Pseudorange and truth synthesis.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{oracle_reflection, oracle_visibility, OracleReflection, SatelliteTrack, SceneSpec};
use crate::frames::{
    ecef_to_geodetic, enu_to_ecef, enu_transform_at, satellite_direction, EcefPosition,
    EnuPosition, GeodeticPosition, SatelliteDirection,
};
use crate::measmodel::{
    ionospheric_delay, tropospheric_delay, AtmosphereContext, Constellation, SatelliteObservation,
};

/// Satellites sit this far from the scene anchor along their direction.
pub const SATELLITE_DISTANCE_M: f64 = 2.2e7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrueClass {
    Los,
    Nlos,
}

impl TrueClass {
    pub fn as_str(self) -> &'static str {
        match self {
            TrueClass::Los => "LOS",
            TrueClass::Nlos => "NLOS",
        }
    }
}

impl fmt::Display for TrueClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TrueClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "LOS" => Ok(TrueClass::Los),
            "NLOS" => Ok(TrueClass::Nlos),
            other => Err(format!("unknown truth class {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SatTruth {
    pub sat_id: String,
    pub constellation: Constellation,
    pub direction: SatelliteDirection,
    pub class: TrueClass,
    pub reflection: Option<OracleReflection>,
    /// Positive only for NLOS with a specular path.
    pub extra_path_m: f64,
    pub geometric_range_m: f64,
    pub noise_m: f64,
    /// Blocked satellites without a specular path are not received.
    pub observed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochTruth {
    pub epoch_s: f64,
    /// LiDAR center / antenna in scene ENU.
    pub rx_enu: EnuPosition,
    pub rx_geodetic: GeodeticPosition,
    pub rx_ecef: EcefPosition,
    pub clock_bias_m: f64,
    pub satellites: Vec<SatTruth>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedEpoch {
    pub observations: Vec<SatelliteObservation>,
    pub truth: EpochTruth,
}

pub fn satellite_ecef(scene: &SceneSpec, track: &SatelliteTrack, t: f64) -> EcefPosition {
    let u = track.direction_at(t).unit_enu();
    let frame = enu_transform_at(&scene.anchor);
    EcefPosition::from_vector(&frame.apply(&(u * SATELLITE_DISTANCE_M)))
}

/// Fixed per-satellite clock offset, spread over a few kilometers.
pub fn satellite_clock_bias_m(index: usize) -> f64 {
    ((index * 7919) % 201) as f64 * 50.0 - 5000.0
}

/// SNR model: lower for low elevations, 15 dB lower again when reflected.
fn synthetic_snr(elevation_rad: f64, class: TrueClass) -> f64 {
    let los = 45.0 - 15.0 * (1.0 - elevation_rad.sin());
    let snr = match class {
        TrueClass::Los => los,
        TrueClass::Nlos => los - 15.0,
    };
    snr.clamp(10.0, 55.0)
}

pub fn synthesize_epoch<R: Rng>(scene: &SceneSpec, t: f64, rng: &mut R) -> SimulatedEpoch {
    let (rx_enu, _) = scene.receiver_state(t);
    let rx = rx_enu.to_vector();
    let rx_ecef = enu_to_ecef(&rx_enu, &scene.anchor);
    let rx_geodetic = ecef_to_geodetic(&rx_ecef).unwrap_or(scene.anchor);
    let clock = scene.clock_bias_m + scene.clock_drift_mps * t;
    let noise = Normal::new(0.0, scene.noise_sigma_m).expect("noise sigma validated");
    let atmosphere = AtmosphereContext {
        klobuchar_alpha: scene.klobuchar_alpha,
        klobuchar_beta: scene.klobuchar_beta,
        rx_geodetic,
        epoch_s: t,
    };

    let mut observations = Vec::new();
    let mut truths = Vec::new();
    for (i, track) in scene.satellites.iter().enumerate() {
        let dir = track.direction_at(t);
        if dir.elevation_rad <= 0.0 {
            continue;
        }
        let sat = satellite_ecef(scene, track, t);
        let (class, reflection) = if oracle_visibility(scene, &rx, &dir, t).is_nlos() {
            (TrueClass::Nlos, oracle_reflection(scene, &rx, &dir, t))
        } else {
            (TrueClass::Los, None)
        };
        let observed = class == TrueClass::Los || reflection.is_some();
        let extra = reflection.map_or(0.0, |r| r.extra_path_m);
        let range = sat.distance(&rx_ecef);
        let eps = if observed { noise.sample(rng) } else { 0.0 };
        if observed {
            let seen = satellite_direction(&sat, &rx_ecef).unwrap_or(dir);
            let (iono, tropo) = if scene.atmosphere {
                (
                    ionospheric_delay(&atmosphere, seen.elevation_rad, seen.azimuth_rad),
                    tropospheric_delay(&atmosphere, seen.elevation_rad).unwrap_or(0.0),
                )
            } else {
                (0.0, 0.0)
            };
            let sat_clock = satellite_clock_bias_m(i);
            observations.push(SatelliteObservation {
                epoch_s: t,
                sat_id: track.sat_id.clone(),
                constellation: track.constellation,
                pseudorange_m: range + clock - sat_clock + iono + tropo + extra + eps,
                snr_dbhz: synthetic_snr(dir.elevation_rad, class),
                sat_pos_ecef: sat,
                sat_clock_bias_m: sat_clock,
            });
        }
        truths.push(SatTruth {
            sat_id: track.sat_id.clone(),
            constellation: track.constellation,
            direction: dir,
            class,
            reflection,
            extra_path_m: extra,
            geometric_range_m: range,
            noise_m: eps,
            observed,
        });
    }
    SimulatedEpoch {
        observations,
        truth: EpochTruth {
            epoch_s: t,
            rx_enu,
            rx_geodetic,
            rx_ecef,
            clock_bias_m: clock,
            satellites: truths,
        },
    }
}

/// Every GNSS epoch of the scene, drawing noise from one generator seeded
/// with the scene seed.
pub fn synthesize_observations(scene: &SceneSpec) -> Vec<SimulatedEpoch> {
    let mut rng = ChaCha8Rng::seed_from_u64(scene.seed);
    scene
        .gnss_times()
        .into_iter()
        .map(|t| synthesize_epoch(scene, t, &mut rng))
        .collect()
}
