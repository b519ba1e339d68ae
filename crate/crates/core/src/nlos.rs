//! Satellite visibility classification by marching through the sliding
//! window map, same-elevation reflector search, and NLOS delay estimation.

use std::f64::consts::{FRAC_PI_2, TAU};
use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rayon::prelude::*;
use thiserror::Error;

use crate::frames::SatelliteDirection;
use crate::swm::SlidingWindowMap;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NlosError {
    #[error("reflecting point is {0:.3e} m from the origin horizontally")]
    DegenerateReflector(f64),
    #[error("elevation {0} rad is outside [0, pi/2]")]
    InvalidElevation(f64),
    #[error("invalid detection parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionParams {
    /// Ray-march increment.
    pub step_m: f64,
    /// Marching stops (LOS) once the travelled distance exceeds this.
    pub max_range_m: f64,
    /// Minimum neighbor count that blocks the ray.
    pub neighbor_threshold: usize,
    pub neighbor_radius_m: f64,
    pub azimuth_resolution_rad: f64,
    /// Map points this close to a candidate reflector are ignored when
    /// checking the candidate's own view of the satellite.
    pub self_occlusion_radius_m: f64,
}

impl Default for DetectionParams {
    fn default() -> Self {
        Self {
            step_m: 1.0,
            max_range_m: 250.0,
            neighbor_threshold: 5,
            neighbor_radius_m: 1.0,
            azimuth_resolution_rad: 1.0_f64.to_radians(),
            self_occlusion_radius_m: 2.0,
        }
    }
}

impl DetectionParams {
    pub fn validate(&self) -> Result<(), NlosError> {
        let bad = |m: &str| Err(NlosError::InvalidParams(m.to_string()));
        if !(self.step_m > 0.0) {
            return bad("step_m must be positive");
        }
        if !(self.max_range_m >= self.step_m) {
            return bad("max_range_m must be at least step_m");
        }
        if self.neighbor_threshold < 1 {
            return bad("neighbor_threshold must be at least 1");
        }
        if !(self.neighbor_radius_m > 0.0) {
            return bad("neighbor_radius_m must be positive");
        }
        if !(self.azimuth_resolution_rad > 0.0) {
            return bad("azimuth_resolution_rad must be positive");
        }
        if !(self.self_occlusion_radius_m >= 0.0) {
            return bad("self_occlusion_radius_m must be non-negative");
        }
        Ok(())
    }

    /// Upper bound on marching steps per ray.
    pub fn max_steps(&self) -> usize {
        (self.max_range_m / self.step_m).ceil() as usize
    }

    /// Upper bound on azimuth sweeps per reflector search.
    pub fn max_sweeps(&self) -> usize {
        (TAU / self.azimuth_resolution_rad).ceil() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VerdictClass {
    Los,
    /// NLOS with a reflector found; the delay is corrected.
    Cnlos,
    /// NLOS without a usable reflector; de-weighted only.
    Fnlos,
}

impl VerdictClass {
    pub fn is_nlos(self) -> bool {
        !matches!(self, VerdictClass::Los)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            VerdictClass::Los => "LOS",
            VerdictClass::Cnlos => "CNLOS",
            VerdictClass::Fnlos => "FNLOS",
        }
    }
}

impl fmt::Display for VerdictClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VerdictClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "LOS" => Ok(VerdictClass::Los),
            "CNLOS" => Ok(VerdictClass::Cnlos),
            "FNLOS" => Ok(VerdictClass::Fnlos),
            other => Err(format!("unknown visibility class '{other}'")),
        }
    }
}

/// Per-satellite outcome. CNLOS always carries a reflector and delay; the
/// other classes never do.
#[derive(Debug, Clone, PartialEq)]
pub struct VisibilityVerdict {
    sat_id: String,
    class: VerdictClass,
    reflecting_point_enu: Option<Vector3<f64>>,
    nlos_delay_m: Option<f64>,
}

impl VisibilityVerdict {
    pub fn los(sat_id: impl Into<String>) -> Self {
        Self {
            sat_id: sat_id.into(),
            class: VerdictClass::Los,
            reflecting_point_enu: None,
            nlos_delay_m: None,
        }
    }

    pub fn fnlos(sat_id: impl Into<String>) -> Self {
        Self {
            class: VerdictClass::Fnlos,
            ..Self::los(sat_id)
        }
    }

    /// Panics if `delay_m` is negative or not finite.
    pub fn cnlos(sat_id: impl Into<String>, reflecting_point_enu: Vector3<f64>, delay_m: f64) -> Self {
        assert!(delay_m.is_finite() && delay_m >= 0.0, "NLOS delay must be >= 0");
        Self {
            sat_id: sat_id.into(),
            class: VerdictClass::Cnlos,
            reflecting_point_enu: Some(reflecting_point_enu),
            nlos_delay_m: Some(delay_m),
        }
    }

    pub fn sat_id(&self) -> &str {
        &self.sat_id
    }

    pub fn class(&self) -> VerdictClass {
        self.class
    }

    pub fn reflecting_point_enu(&self) -> Option<Vector3<f64>> {
        self.reflecting_point_enu
    }

    pub fn nlos_delay_m(&self) -> Option<f64> {
        self.nlos_delay_m
    }

    /// Same verdict with the reflector discarded (CNLOS becomes FNLOS).
    pub fn without_correction(&self) -> Self {
        match self.class {
            VerdictClass::Los => self.clone(),
            _ => Self::fnlos(self.sat_id.clone()),
        }
    }
}

/// Where a marched ray first met enough map points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Blockage {
    /// March point whose neighborhood reached the threshold.
    pub step_point: Vector3<f64>,
    /// Map point nearest to `step_point`.
    pub surface_point: Vector3<f64>,
    /// Number of steps taken.
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Visibility {
    Los,
    Nlos(Blockage),
}

impl Visibility {
    pub fn is_nlos(&self) -> bool {
        matches!(self, Visibility::Nlos(_))
    }
}

/// Advances `p` by `step_m` along `dir`.
pub fn ray_step(p: &Vector3<f64>, dir: &SatelliteDirection, step_m: f64) -> Vector3<f64> {
    let (se, ce) = dir.elevation_rad.sin_cos();
    let (sa, ca) = dir.azimuth_rad.sin_cos();
    Vector3::new(
        p.x + step_m * sa * ce,
        p.y + step_m * ca * ce,
        p.z + step_m * se,
    )
}

/// Marches from `origin` toward the satellite; NLOS at the first step whose
/// neighborhood holds at least `neighbor_threshold` map points, LOS once the
/// travelled distance exceeds `max_range_m`.
pub fn classify_visibility(
    map: &SlidingWindowMap,
    dir: &SatelliteDirection,
    params: &DetectionParams,
    origin: &Vector3<f64>,
) -> Visibility {
    march(map, dir, params, origin, None)
}

fn march(
    map: &SlidingWindowMap,
    dir: &SatelliteDirection,
    params: &DetectionParams,
    origin: &Vector3<f64>,
    exclude: Option<(Vector3<f64>, f64)>,
) -> Visibility {
    let index = map.index();
    if index.is_empty() {
        return Visibility::Los;
    }
    let radius = params.neighbor_radius_m;
    let mut p = *origin;
    let mut k = 1usize;
    while k as f64 * params.step_m <= params.max_range_m {
        p = ray_step(&p, dir, params.step_m);
        let count = match exclude {
            Some((center, r_ex)) if (p - center).norm() < r_ex + radius => {
                let c = [center.x, center.y, center.z];
                let r_ex2 = r_ex * r_ex;
                index.count_within_limited(&p, radius, params.neighbor_threshold, |q| {
                    let d = [q[0] - c[0], q[1] - c[1], q[2] - c[2]];
                    d[0] * d[0] + d[1] * d[1] + d[2] * d[2] > r_ex2
                })
            }
            _ => index.count_within_limited(&p, radius, params.neighbor_threshold, |_| true),
        };
        if count >= params.neighbor_threshold {
            let surface_point = index.nearest(&p).map(|(q, _)| q).unwrap_or(p);
            return Visibility::Nlos(Blockage {
                step_point: p,
                surface_point,
                steps: k,
            });
        }
        k += 1;
    }
    Visibility::Los
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reflector {
    pub point_enu: Vector3<f64>,
    /// Euclidean distance from the search origin.
    pub distance_m: f64,
    pub sweep_azimuth_rad: f64,
    /// Elevation of the sweep that found it; always the satellite's.
    pub sweep_elevation_rad: f64,
}

/// Every same-elevation blocking point that faces the satellite and can see
/// it, in sweep-azimuth order.
pub fn reflector_candidates(
    map: &SlidingWindowMap,
    dir: &SatelliteDirection,
    params: &DetectionParams,
    origin: &Vector3<f64>,
) -> Vec<Reflector> {
    let to_sat = dir.unit_enu();
    (0..params.max_sweeps())
        .into_par_iter()
        .filter_map(|i| {
            let azimuth = i as f64 * params.azimuth_resolution_rad;
            if azimuth >= TAU {
                return None;
            }
            let sweep = SatelliteDirection {
                elevation_rad: dir.elevation_rad,
                azimuth_rad: azimuth,
            };
            let Visibility::Nlos(b) = classify_visibility(map, &sweep, params, origin) else {
                return None;
            };
            let candidate = b.surface_point;
            if !faces_direction(map, &candidate, origin, &to_sat, params.neighbor_radius_m) {
                return None;
            }
            let exclusion = Some((candidate, params.self_occlusion_radius_m));
            match march(map, dir, params, &candidate, exclusion) {
                Visibility::Los => Some(Reflector {
                    point_enu: candidate,
                    distance_m: (candidate - origin).norm(),
                    sweep_azimuth_rad: azimuth,
                    sweep_elevation_rad: sweep.elevation_rad,
                }),
                Visibility::Nlos(_) => None,
            }
        })
        .collect()
}

/// Nearest reflector candidate; equal distances go to the smaller sweep
/// azimuth.
pub fn find_reflector(
    map: &SlidingWindowMap,
    dir: &SatelliteDirection,
    params: &DetectionParams,
    origin: &Vector3<f64>,
) -> Option<Reflector> {
    reflector_candidates(map, dir, params, origin)
        .into_iter()
        .fold(None, |best: Option<Reflector>, c| match best {
            Some(b) if b.distance_m <= c.distance_m => Some(b),
            _ => Some(c),
        })
}

/// True when the local surface at `point` has the origin and the direction
/// `to_sat` on the same side, i.e. a specular bounce toward the origin is
/// geometrically possible. Sparse neighborhoods are given the benefit of the
/// doubt.
fn faces_direction(
    map: &SlidingWindowMap,
    point: &Vector3<f64>,
    origin: &Vector3<f64>,
    to_sat: &Vector3<f64>,
    radius: f64,
) -> bool {
    let neighbors = map.index().within(point, radius);
    if neighbors.len() < 3 {
        return true;
    }
    let n = neighbors.len() as f64;
    let mean = neighbors.iter().sum::<Vector3<f64>>() / n;
    let cov = neighbors
        .iter()
        .map(|q| (q - mean) * (q - mean).transpose())
        .sum::<Matrix3<f64>>()
        / n;
    let eig = SymmetricEigen::new(cov);
    let imin = eig.eigenvalues.imin();
    let mut normal: Vector3<f64> = eig.eigenvectors.column(imin).into();
    if normal.dot(&(origin - point)) < 0.0 {
        normal = -normal;
    }
    normal.dot(to_sat) > 0.0
}

/// Extra path of a signal reflected once at `reflecting_point` before
/// reaching `origin`, for a satellite at `elevation_rad`: twice the
/// horizontal reflector distance times the cosine of the elevation.
pub fn nlos_delay(
    reflecting_point: &Vector3<f64>,
    origin: &Vector3<f64>,
    elevation_rad: f64,
) -> Result<f64, NlosError> {
    if !(0.0..=FRAC_PI_2).contains(&elevation_rad) {
        return Err(NlosError::InvalidElevation(elevation_rad));
    }
    let d = reflecting_point - origin;
    let horizontal = d.x.hypot(d.y);
    if !(horizontal >= 1e-6) {
        return Err(NlosError::DegenerateReflector(horizontal));
    }
    Ok((2.0 * horizontal * elevation_rad.cos()).max(0.0))
}

/// Full detection for one satellite from the map's LiDAR center.
pub fn classify_and_correct(
    map: &SlidingWindowMap,
    sat_id: &str,
    dir: &SatelliteDirection,
    params: &DetectionParams,
) -> Result<VisibilityVerdict, NlosError> {
    params.validate()?;
    let origin = map.lidar_center();
    if !classify_visibility(map, dir, params, &origin).is_nlos() {
        return Ok(VisibilityVerdict::los(sat_id));
    }
    match find_reflector(map, dir, params, &origin) {
        Some(r) => {
            let delay = nlos_delay(&r.point_enu, &origin, dir.elevation_rad)?;
            Ok(VisibilityVerdict::cnlos(sat_id, r.point_enu, delay))
        }
        None => Ok(VisibilityVerdict::fnlos(sat_id)),
    }
}
