//! Run configuration: defaults, `key = value` files and per-key overrides.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::kvfile::{parse_kv, KvEntry, KvError};
use crate::measmodel::WeightParams;
use crate::nlos::DetectionParams;
use crate::solver::{ClockMode, SolverConfig};
use crate::swm::{Calibration, SwmConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{0}")]
    Parse(#[from] KvError),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Mode {
    /// Receiver solutions ingested from a file.
    Ublox,
    /// Every satellite treated as LOS.
    Wls,
    /// Detected NLOS excluded.
    WlsNe,
    /// Detected NLOS kept and de-weighted.
    RWls,
    /// CNLOS corrected, FNLOS de-weighted.
    CrWls,
}

impl Mode {
    pub const SOLVED: [Mode; 4] = [Mode::Wls, Mode::WlsNe, Mode::RWls, Mode::CrWls];
    pub const ALL: [Mode; 5] = [Mode::Ublox, Mode::Wls, Mode::WlsNe, Mode::RWls, Mode::CrWls];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Ublox => "ublox",
            Mode::Wls => "wls",
            Mode::WlsNe => "wls_ne",
            Mode::RWls => "r_wls",
            Mode::CrWls => "cr_wls",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Mode::Ublox => "u-blox",
            Mode::Wls => "WLS",
            Mode::WlsNe => "WLS-NE",
            Mode::RWls => "R-WLS",
            Mode::CrWls => "CR-WLS",
        }
    }

    pub fn uses_detection(self) -> bool {
        matches!(self, Mode::WlsNe | Mode::RWls | Mode::CrWls)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "ublox" | "ublox_passthrough" | "u_blox" => Ok(Mode::Ublox),
            "wls" => Ok(Mode::Wls),
            "wls_ne" => Ok(Mode::WlsNe),
            "r_wls" => Ok(Mode::RWls),
            "cr_wls" => Ok(Mode::CrWls),
            other => Err(format!("unknown mode {other:?} (ublox, wls, wls_ne, r_wls, cr_wls)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub detection: DetectionParams,
    pub weights: WeightParams,
    pub solver: SolverConfig,
    pub swm: SwmConfig,
    pub calibration: Calibration,
    pub elevation_mask_deg: f64,
    pub atmosphere: bool,
    pub klobuchar_alpha: [f64; 4],
    pub klobuchar_beta: [f64; 4],
    pub seed: u64,
    pub sweep_n_sw: Vec<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: Mode::CrWls,
            detection: DetectionParams::default(),
            weights: WeightParams::default(),
            solver: SolverConfig::default(),
            swm: SwmConfig::default(),
            calibration: Calibration::default(),
            elevation_mask_deg: 5.0,
            atmosphere: false,
            klobuchar_alpha: [0.0; 4],
            klobuchar_beta: [0.0; 4],
            seed: 1,
            sweep_n_sw: vec![100, 150, 200, 250],
        }
    }
}

/// Every recognised key with a one-line description.
pub const CONFIG_KEYS: &[(&str, &str)] = &[
    ("mode", "ublox | wls | wls_ne | r_wls | cr_wls"),
    ("n_sw", "frames in the sliding window"),
    ("ground_height_m", "height above the ground below which points are dropped"),
    ("sensor_height_m", "LiDAR height above the ground"),
    ("voxel_m", "voxel size for map thinning (0 disables)"),
    ("delta_d_pix_m", "ray marching step"),
    ("d_thres_m", "ray marching reach"),
    ("n_thres", "neighbors needed to block a step"),
    ("neighbor_radius_m", "neighbor search radius"),
    ("alpha_res_deg", "reflector sweep azimuth resolution"),
    ("self_occlusion_radius_m", "radius ignored around a reflector candidate in its sky check"),
    ("k_w", "FNLOS variance inflation"),
    ("snr_T", "SNR threshold (dB-Hz)"),
    ("snr_F", "SNR floor (dB-Hz)"),
    ("snr_A", "variance amplitude at the SNR floor"),
    ("snr_a", "SNR decay constant"),
    ("elevation_mask_deg", "satellites below are ignored"),
    ("max_iterations", "solver iteration cap"),
    ("convergence_m", "solver step size considered converged"),
    ("clock_mode", "single | per_constellation"),
    ("atmosphere", "remove modelled iono/tropo delays (true/false)"),
    ("klobuchar_alpha", "four broadcast alpha coefficients"),
    ("klobuchar_beta", "four broadcast beta coefficients"),
    ("seed", "random seed"),
    ("sweep_n_sw", "window sizes for the sweep command"),
];

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        self.apply_entry(&KvEntry {
            line: 0,
            key: key.to_string(),
            value: value.to_string(),
        })
    }

    /// Applies a config file body on top of the current values.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for e in parse_kv(text)? {
            self.apply_entry(&e)?;
        }
        Ok(())
    }

    fn apply_entry(&mut self, e: &KvEntry) -> Result<(), ConfigError> {
        match e.key.as_str() {
            "mode" => self.mode = e.parse()?,
            "n_sw" => self.swm.n_sw = e.parse()?,
            "ground_height_m" => self.swm.ground_height_m = e.parse()?,
            "sensor_height_m" => self.swm.sensor_height_m = e.parse()?,
            "voxel_m" => self.swm.voxel_m = e.parse()?,
            "delta_d_pix_m" => self.detection.step_m = e.parse()?,
            "d_thres_m" => self.detection.max_range_m = e.parse()?,
            "n_thres" => self.detection.neighbor_threshold = e.parse()?,
            "neighbor_radius_m" => self.detection.neighbor_radius_m = e.parse()?,
            "alpha_res_deg" => self.detection.azimuth_resolution_rad = e.parse::<f64>()?.to_radians(),
            "self_occlusion_radius_m" => self.detection.self_occlusion_radius_m = e.parse()?,
            "k_w" => self.weights.nlos_scale = e.parse()?,
            "snr_T" => self.weights.snr_threshold = e.parse()?,
            "snr_F" => self.weights.snr_floor = e.parse()?,
            "snr_A" => self.weights.amplitude = e.parse()?,
            "snr_a" => self.weights.decay = e.parse()?,
            "elevation_mask_deg" => self.elevation_mask_deg = e.parse()?,
            "max_iterations" => self.solver.max_iterations = e.parse()?,
            "convergence_m" => self.solver.convergence_m = e.parse()?,
            "clock_mode" => {
                self.solver.clock_mode = match e.value.to_ascii_lowercase().as_str() {
                    "single" => ClockMode::Single,
                    "per_constellation" => ClockMode::PerConstellation,
                    _ => return Err(e.invalid("expected single or per_constellation").into()),
                }
            }
            "atmosphere" => self.atmosphere = e.parse_bool()?,
            "klobuchar_alpha" => self.klobuchar_alpha = e.parse_fixed()?,
            "klobuchar_beta" => self.klobuchar_beta = e.parse_fixed()?,
            "seed" => self.seed = e.parse()?,
            "sweep_n_sw" => {
                self.sweep_n_sw = e
                    .parse_list()?
                    .into_iter()
                    .map(|v| {
                        if v >= 1.0 && v.fract() == 0.0 {
                            Ok(v as usize)
                        } else {
                            Err(e.invalid(format!("window size {v} is not a positive integer")))
                        }
                    })
                    .collect::<Result<_, _>>()?
            }
            _ => return Err(e.unknown().into()),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        self.detection
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.weights
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.swm.n_sw == 0 {
            return bad("n_sw must be at least 1".into());
        }
        if !(self.swm.voxel_m >= 0.0) || !(self.swm.sensor_height_m > 0.0) || !self.swm.ground_height_m.is_finite() {
            return bad("voxel_m must be >= 0, sensor_height_m > 0".into());
        }
        if self.solver.max_iterations == 0 || !(self.solver.convergence_m > 0.0) {
            return bad("max_iterations must be >= 1 and convergence_m > 0".into());
        }
        if !(0.0..90.0).contains(&self.elevation_mask_deg) {
            return bad("elevation_mask_deg must be in [0, 90)".into());
        }
        if self.sweep_n_sw.is_empty() {
            return bad("sweep_n_sw is empty".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = RunConfig::default();
        c.validate().unwrap();
        assert_eq!(c.swm.n_sw, 200);
        assert_eq!(c.detection.neighbor_threshold, 5);
        assert_eq!(c.weights.nlos_scale, 16.0);
    }

    #[test]
    fn file_then_override() {
        let mut c = RunConfig::default();
        c.apply_text("n_sw = 150\nmode = wls_ne\nalpha_res_deg = 2\nclock_mode = per_constellation\n")
            .unwrap();
        assert_eq!(c.swm.n_sw, 150);
        assert_eq!(c.mode, Mode::WlsNe);
        assert!((c.detection.azimuth_resolution_rad - 2f64.to_radians()).abs() < 1e-15);
        assert_eq!(c.solver.clock_mode, ClockMode::PerConstellation);
        c.set("n_sw", "250").unwrap();
        assert_eq!(c.swm.n_sw, 250);
    }

    #[test]
    fn every_documented_key_is_accepted() {
        let sample = |k: &str| match k {
            "mode" => "wls",
            "clock_mode" => "single",
            "atmosphere" => "false",
            "klobuchar_alpha" | "klobuchar_beta" => "0 0 0 0",
            "sweep_n_sw" => "100 200",
            _ => "7",
        };
        for (k, _) in CONFIG_KEYS {
            let mut c = RunConfig::default();
            c.set(k, sample(k)).unwrap_or_else(|e| panic!("{k}: {e}"));
        }
    }

    #[test]
    fn errors() {
        let mut c = RunConfig::default();
        assert!(matches!(c.apply_text("bogus = 1"), Err(ConfigError::Parse(e)) if e.line == 1));
        assert!(c.set("mode", "fast").is_err());
        assert!(c.set("sweep_n_sw", "100 1.5").is_err());
        c.set("n_thres", "0").unwrap();
        assert!(matches!(c.validate(), Err(ConfigError::Invalid(_))));
        assert_eq!("CR-WLS".parse::<Mode>().unwrap(), Mode::CrWls);
    }
}
