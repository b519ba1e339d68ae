//! Earth-fixed, geodetic and local east-north-up frames.
//!
//! All angles are radians. Azimuth is measured clockwise from north, so a
//! direction `(elevation, azimuth)` has ENU components
//! `(sin az cos el, cos az cos el, sin el)`.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

/// WGS-84 semi-major axis (m).
pub const WGS84_A: f64 = 6_378_137.0;
/// WGS-84 flattening.
pub const WGS84_F: f64 = 1.0 / 298.257_223_563;
/// WGS-84 first eccentricity squared.
pub const WGS84_E2: f64 = WGS84_F * (2.0 - WGS84_F);
/// WGS-84 semi-minor axis (m).
pub const WGS84_B: f64 = WGS84_A * (1.0 - WGS84_F);

const MIN_GEOCENTRIC_RADIUS_M: f64 = 6.0e6;
const MIN_SATELLITE_SEPARATION_M: f64 = 1.0e3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FrameError {
    #[error("position {0:.3} m from the geocenter is not above the Earth's surface")]
    DegeneratePosition(f64),
    #[error("satellite and receiver are {0:.3} m apart")]
    DegenerateGeometry(f64),
}

/// Earth-centered, earth-fixed position in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EcefPosition {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl EcefPosition {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new(v.x, v.y, v.z)
    }

    pub fn to_vector(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn norm(&self) -> f64 {
        self.to_vector().norm()
    }

    pub fn distance(&self, other: &EcefPosition) -> f64 {
        (self.to_vector() - other.to_vector()).norm()
    }
}

/// WGS-84 latitude/longitude in radians and ellipsoidal height in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GeodeticPosition {
    pub latitude_rad: f64,
    pub longitude_rad: f64,
    pub height_m: f64,
}

impl GeodeticPosition {
    pub const fn new(latitude_rad: f64, longitude_rad: f64, height_m: f64) -> Self {
        Self {
            latitude_rad,
            longitude_rad,
            height_m,
        }
    }

    pub fn from_degrees(lat_deg: f64, lon_deg: f64, height_m: f64) -> Self {
        Self::new(lat_deg.to_radians(), lon_deg.to_radians(), height_m)
    }

    pub fn is_valid(&self) -> bool {
        self.latitude_rad.abs() <= FRAC_PI_2
            && self.longitude_rad.abs() <= PI
            && self.height_m.is_finite()
    }
}

/// Local east/north/up offset from an anchor, meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnuPosition {
    pub east_m: f64,
    pub north_m: f64,
    pub up_m: f64,
}

impl EnuPosition {
    pub const fn new(east_m: f64, north_m: f64, up_m: f64) -> Self {
        Self {
            east_m,
            north_m,
            up_m,
        }
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new(v.x, v.y, v.z)
    }

    pub fn to_vector(&self) -> Vector3<f64> {
        Vector3::new(self.east_m, self.north_m, self.up_m)
    }
}

/// Rigid transform `p' = R p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for FrameTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl FrameTransform {
    pub const ORTHONORMAL_TOLERANCE: f64 = 1e-10;

    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        Self::new(Matrix3::identity(), Vector3::zeros())
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self::new(Matrix3::identity(), translation)
    }

    /// Body-to-ENU rotation for a level vehicle whose body x axis points
    /// forward, y left and z up, heading clockwise from north.
    pub fn from_heading(heading_rad: f64) -> Self {
        let (s, c) = heading_rad.sin_cos();
        // body x -> (sin h, cos h, 0), body y -> (-cos h, sin h, 0)
        let rotation = Matrix3::new(s, -c, 0.0, c, s, 0.0, 0.0, 0.0, 1.0);
        Self::new(rotation, Vector3::zeros())
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn apply_rotation(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    /// `self ∘ inner`: first `inner`, then `self`.
    pub fn compose(&self, inner: &FrameTransform) -> FrameTransform {
        FrameTransform::new(
            self.rotation * inner.rotation,
            self.rotation * inner.translation + self.translation,
        )
    }

    /// Inverse of a rigid transform; assumes an orthonormal rotation.
    pub fn inverse(&self) -> FrameTransform {
        let rt = self.rotation.transpose();
        FrameTransform::new(rt, -(rt * self.translation))
    }

    pub fn is_orthonormal(&self) -> bool {
        let err = self.rotation.transpose() * self.rotation - Matrix3::identity();
        let max_err = err.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let det = self.rotation.determinant();
        max_err < Self::ORTHONORMAL_TOLERANCE
            && (det - 1.0).abs() < Self::ORTHONORMAL_TOLERANCE
            && self.translation.iter().all(|v| v.is_finite())
    }
}

/// Elevation above the local horizon and azimuth clockwise from north.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SatelliteDirection {
    pub elevation_rad: f64,
    pub azimuth_rad: f64,
}

impl SatelliteDirection {
    /// Builds a direction, wrapping the azimuth into `[0, 2π)`.
    pub fn new(elevation_rad: f64, azimuth_rad: f64) -> Self {
        Self {
            elevation_rad,
            azimuth_rad: normalize_azimuth(azimuth_rad),
        }
    }

    pub fn from_degrees(elevation_deg: f64, azimuth_deg: f64) -> Self {
        Self::new(elevation_deg.to_radians(), azimuth_deg.to_radians())
    }

    /// Unit line-of-sight vector in ENU.
    pub fn unit_enu(&self) -> Vector3<f64> {
        let (se, ce) = self.elevation_rad.sin_cos();
        let (sa, ca) = self.azimuth_rad.sin_cos();
        Vector3::new(sa * ce, ca * ce, se)
    }

    /// Direction of an ENU vector. The azimuth of a vertical vector is 0.
    pub fn from_enu_vector(v: &Vector3<f64>) -> Self {
        let norm = v.norm();
        let horizontal = v.x.hypot(v.y);
        let elevation = (v.z / norm).clamp(-1.0, 1.0).asin();
        let azimuth = if horizontal <= 1e-12 * norm {
            0.0
        } else {
            v.x.atan2(v.y)
        };
        Self::new(elevation, azimuth)
    }
}

fn normalize_azimuth(az: f64) -> f64 {
    let wrapped = az.rem_euclid(TAU);
    if wrapped >= TAU {
        0.0
    } else {
        wrapped
    }
}

pub fn geodetic_to_ecef(g: &GeodeticPosition) -> EcefPosition {
    let (sin_lat, cos_lat) = g.latitude_rad.sin_cos();
    let (sin_lon, cos_lon) = g.longitude_rad.sin_cos();
    let n = WGS84_A / (1.0 - WGS84_E2 * sin_lat * sin_lat).sqrt();
    EcefPosition::new(
        (n + g.height_m) * cos_lat * cos_lon,
        (n + g.height_m) * cos_lat * sin_lon,
        (n * (1.0 - WGS84_E2) + g.height_m) * sin_lat,
    )
}

/// Fixed-point iteration on the prime-vertical radius; converges to well
/// below a micrometer in a handful of iterations and is stable at the poles.
pub fn ecef_to_geodetic(p: &EcefPosition) -> Result<GeodeticPosition, FrameError> {
    let radius = p.norm();
    if !(radius > MIN_GEOCENTRIC_RADIUS_M) {
        return Err(FrameError::DegeneratePosition(radius));
    }
    let r2 = p.x * p.x + p.y * p.y;
    let mut z = p.z;
    let mut n = WGS84_A;
    for _ in 0..50 {
        let sin_lat = z / (r2 + z * z).sqrt();
        n = WGS84_A / (1.0 - WGS84_E2 * sin_lat * sin_lat).sqrt();
        let next = p.z + n * WGS84_E2 * sin_lat;
        let done = (next - z).abs() < 1e-10;
        z = next;
        if done {
            break;
        }
    }
    let (latitude, longitude) = if r2 > 1e-12 {
        ((z / r2.sqrt()).atan(), p.y.atan2(p.x))
    } else if p.z > 0.0 {
        (FRAC_PI_2, 0.0)
    } else {
        (-FRAC_PI_2, 0.0)
    };
    Ok(GeodeticPosition::new(
        latitude,
        longitude,
        (r2 + z * z).sqrt() - n,
    ))
}

/// ENU-to-ECEF rotation at the given latitude/longitude; columns are the
/// east, north and up axes expressed in ECEF.
pub fn enu_rotation(latitude_rad: f64, longitude_rad: f64) -> Matrix3<f64> {
    let (sp, cp) = latitude_rad.sin_cos();
    let (sl, cl) = longitude_rad.sin_cos();
    Matrix3::new(
        -sl,
        -sp * cl,
        cp * cl,
        cl,
        -sp * sl,
        cp * sl,
        0.0,
        cp,
        sp,
    )
}

/// Transform mapping ENU coordinates at `anchor` into ECEF.
pub fn enu_transform_at(anchor: &GeodeticPosition) -> FrameTransform {
    FrameTransform::new(
        enu_rotation(anchor.latitude_rad, anchor.longitude_rad),
        geodetic_to_ecef(anchor).to_vector(),
    )
}

pub fn ecef_to_enu(p: &EcefPosition, anchor: &GeodeticPosition) -> EnuPosition {
    let t = enu_transform_at(anchor);
    EnuPosition::from_vector(&(t.rotation.transpose() * (p.to_vector() - t.translation)))
}

pub fn enu_to_ecef(p: &EnuPosition, anchor: &GeodeticPosition) -> EcefPosition {
    EcefPosition::from_vector(&enu_transform_at(anchor).apply(&p.to_vector()))
}

/// Elevation/azimuth of `sat` seen from `rx`. Below-horizon satellites get a
/// negative elevation; masking is up to the caller.
pub fn satellite_direction(
    sat: &EcefPosition,
    rx: &EcefPosition,
) -> Result<SatelliteDirection, FrameError> {
    let los = sat.to_vector() - rx.to_vector();
    let range = los.norm();
    if !(range > MIN_SATELLITE_SEPARATION_M) {
        return Err(FrameError::DegenerateGeometry(range));
    }
    let g = ecef_to_geodetic(rx)?;
    let enu = enu_rotation(g.latitude_rad, g.longitude_rad).transpose() * los;
    Ok(SatelliteDirection::from_enu_vector(&enu))
}
