//! Broadcast ionosphere (Klobuchar, L1) and standard-atmosphere
//! Saastamoinen troposphere.

use std::f64::consts::PI;

use super::MeasError;
use crate::frames::GeodeticPosition;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

const TROPO_MASK_RAD: f64 = PI / 180.0;
const RELATIVE_HUMIDITY: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtmosphereContext {
    pub klobuchar_alpha: [f64; 4],
    pub klobuchar_beta: [f64; 4],
    pub rx_geodetic: GeodeticPosition,
    /// GPS time in seconds; only the time of day matters.
    pub epoch_s: f64,
}

/// Slant tropospheric delay in meters (hydrostatic + wet), standard
/// atmosphere with 70 % humidity.
pub fn tropospheric_delay(ctx: &AtmosphereContext, elevation_rad: f64) -> Result<f64, MeasError> {
    if !(elevation_rad > TROPO_MASK_RAD) {
        return Err(MeasError::BelowMask(elevation_rad));
    }
    let pos = &ctx.rx_geodetic;
    if pos.height_m < -100.0 || pos.height_m > 1e4 {
        return Ok(0.0);
    }
    let hgt = pos.height_m.max(0.0);
    let pressure = 1013.25 * (1.0 - 2.2557e-5 * hgt).powf(5.2568);
    let temperature = 15.0 - 6.5e-3 * hgt + 273.16;
    let vapor = 6.108
        * RELATIVE_HUMIDITY
        * ((17.15 * temperature - 4684.0) / (temperature - 38.45)).exp();
    let zenith_angle = PI / 2.0 - elevation_rad;
    let hydrostatic = 0.002_276_8 * pressure
        / (1.0 - 0.002_66 * (2.0 * pos.latitude_rad).cos() - 0.000_28 * hgt / 1e3)
        / zenith_angle.cos();
    let wet = 0.002_277 * (1255.0 / temperature + 0.05) * vapor / zenith_angle.cos();
    Ok(hydrostatic + wet)
}

/// L1 ionospheric group delay in meters from the eight broadcast
/// coefficients.
pub fn ionospheric_delay(ctx: &AtmosphereContext, elevation_rad: f64, azimuth_rad: f64) -> f64 {
    let pos = &ctx.rx_geodetic;
    if pos.height_m < -1e3 || elevation_rad <= 0.0 {
        return 0.0;
    }
    let a = &ctx.klobuchar_alpha;
    let b = &ctx.klobuchar_beta;
    // earth-centered angle (semicircles)
    let psi = 0.0137 / (elevation_rad / PI + 0.11) - 0.022;
    // ionospheric pierce point latitude/longitude (semicircles)
    let phi_i = (pos.latitude_rad / PI + psi * azimuth_rad.cos()).clamp(-0.416, 0.416);
    let lam_i = pos.longitude_rad / PI + psi * azimuth_rad.sin() / (phi_i * PI).cos();
    // geomagnetic latitude
    let phi_m = phi_i + 0.064 * ((lam_i - 1.617) * PI).cos();
    let local_time = (43_200.0 * lam_i + ctx.epoch_s).rem_euclid(86_400.0);
    let obliquity = 1.0 + 16.0 * (0.53 - elevation_rad / PI).powi(3);
    let amp = (a[0] + phi_m * (a[1] + phi_m * (a[2] + phi_m * a[3]))).max(0.0);
    let per = (b[0] + phi_m * (b[1] + phi_m * (b[2] + phi_m * b[3]))).max(72_000.0);
    let x = 2.0 * PI * (local_time - 50_400.0) / per;
    let vertical = if x.abs() < 1.57 {
        5e-9 + amp * (1.0 + x * x * (-0.5 + x * x / 24.0))
    } else {
        5e-9
    };
    SPEED_OF_LIGHT * obliquity * vertical
}
