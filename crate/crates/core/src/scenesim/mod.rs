//! Synthetic urban canyons: vertical building faces, a receiver trajectory,
//! fixed-direction satellites, an exact ray-tracing oracle, a FOV-limited
//! LiDAR and a pseudorange synthesizer.

mod lidar;
mod oracle;
mod synth;

use std::path::Path;

use nalgebra::{Vector2, Vector3};
use thiserror::Error;

pub use lidar::{sample_faces, sample_pointcloud, LidarModel};
pub use oracle::{
    edge_clearance, intersect_face, oracle_reflection, oracle_visibility, OracleHit, OracleReflection,
    OracleVisibility,
};
pub use synth::{
    satellite_clock_bias_m, satellite_ecef, synthesize_epoch, synthesize_observations, EpochTruth, SatTruth,
    SimulatedEpoch, TrueClass, SATELLITE_DISTANCE_M,
};

use crate::frames::{EnuPosition, FrameTransform, GeodeticPosition, SatelliteDirection};
use crate::kvfile::{parse_kv, KvError};
use crate::measmodel::Constellation;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("{0}")]
    Parse(#[from] KvError),
    #[error("invalid scene: {0}")]
    Invalid(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Vertical rectangle standing on the ground along a baseline segment.
#[derive(Debug, Clone, PartialEq)]
pub struct Face {
    /// Baseline end points (east, north).
    pub start: Vector2<f64>,
    pub end: Vector2<f64>,
    pub height_m: f64,
    /// Present only during `[from, to]` seconds when set.
    pub active_s: Option<(f64, f64)>,
}

impl Face {
    pub fn new(start: [f64; 2], end: [f64; 2], height_m: f64) -> Self {
        Self {
            start: Vector2::from(start),
            end: Vector2::from(end),
            height_m,
            active_s: None,
        }
    }

    /// The four walls of an axis-aligned box footprint.
    pub fn box_faces(min: [f64; 2], max: [f64; 2], height_m: f64) -> Vec<Face> {
        let [x0, y0] = min;
        let [x1, y1] = max;
        vec![
            Face::new([x0, y0], [x1, y0], height_m),
            Face::new([x1, y0], [x1, y1], height_m),
            Face::new([x1, y1], [x0, y1], height_m),
            Face::new([x0, y1], [x0, y0], height_m),
        ]
    }

    pub fn length(&self) -> f64 {
        (self.end - self.start).norm()
    }

    pub fn is_active(&self, t: f64) -> bool {
        self.active_s.is_none_or(|(a, b)| t >= a && t <= b)
    }

    /// Unit horizontal normal (left of start→end) as a 3-vector.
    pub fn normal(&self) -> Vector3<f64> {
        let d = (self.end - self.start) / self.length();
        Vector3::new(-d.y, d.x, 0.0)
    }

    /// Horizontal distance from a point to the baseline segment.
    pub fn horizontal_distance(&self, p: &Vector3<f64>) -> f64 {
        let q = Vector2::new(p.x, p.y);
        let e = self.end - self.start;
        let s = ((q - self.start).dot(&e) / e.norm_squared()).clamp(0.0, 1.0);
        (q - (self.start + e * s)).norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waypoint {
    pub time_s: f64,
    pub east_m: f64,
    pub north_m: f64,
    /// Clockwise from north; derived from the motion when absent.
    pub heading_deg: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SatelliteTrack {
    pub sat_id: String,
    pub constellation: Constellation,
    pub elevation_deg: f64,
    pub azimuth_deg: f64,
    pub elevation_rate_dps: f64,
    pub azimuth_rate_dps: f64,
}

impl SatelliteTrack {
    pub fn direction_at(&self, t: f64) -> SatelliteDirection {
        let el = (self.elevation_deg + self.elevation_rate_dps * t).clamp(0.0, 90.0);
        SatelliteDirection::from_degrees(el, self.azimuth_deg + self.azimuth_rate_dps * t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub anchor: GeodeticPosition,
    pub faces: Vec<Face>,
    pub trajectory: Vec<Waypoint>,
    pub satellites: Vec<SatelliteTrack>,
    pub lidar: LidarModel,
    /// LiDAR center (and antenna) height above the ground.
    pub sensor_height_m: f64,
    pub noise_sigma_m: f64,
    pub seed: u64,
    pub atmosphere: bool,
    pub klobuchar_alpha: [f64; 4],
    pub klobuchar_beta: [f64; 4],
    pub clock_bias_m: f64,
    pub clock_drift_mps: f64,
    pub lidar_rate_hz: f64,
    pub gnss_rate_hz: f64,
    pub gnss_start_s: f64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            anchor: GeodeticPosition::from_degrees(22.3, 114.2, 5.0),
            faces: Vec::new(),
            trajectory: vec![Waypoint {
                time_s: 0.0,
                east_m: 0.0,
                north_m: 0.0,
                heading_deg: None,
            }],
            satellites: Vec::new(),
            lidar: LidarModel::default(),
            sensor_height_m: 1.8,
            noise_sigma_m: 0.0,
            seed: 1,
            atmosphere: false,
            klobuchar_alpha: [0.1118e-07, -0.7451e-08, -0.5961e-07, 0.1192e-06],
            klobuchar_beta: [0.1167e+06, -0.2294e+06, -0.1311e+06, 0.1049e+07],
            clock_bias_m: 100.0,
            clock_drift_mps: 0.0,
            lidar_rate_hz: 10.0,
            gnss_rate_hz: 1.0,
            gnss_start_s: 0.0,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<(), SceneError> {
        let bad = |m: String| Err(SceneError::Invalid(m));
        if !self.anchor.is_valid() {
            return bad("anchor is not a valid geodetic position".into());
        }
        for (i, f) in self.faces.iter().enumerate() {
            if !(f.height_m > 0.0) {
                return bad(format!("face {i} has non-positive height"));
            }
            if !(f.length() > 1e-6) {
                return bad(format!("face {i} has a degenerate baseline"));
            }
        }
        if self.trajectory.is_empty() {
            return bad("trajectory is empty".into());
        }
        for w in self.trajectory.windows(2) {
            if !(w[1].time_s > w[0].time_s) {
                return bad(format!("waypoint times not increasing at {}", w[1].time_s));
            }
        }
        let mut ids: Vec<_> = self.satellites.iter().map(|s| s.sat_id.as_str()).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return bad("duplicate satellite id".into());
        }
        for s in &self.satellites {
            if !(0.0..=90.0).contains(&s.elevation_deg) {
                return bad(format!("{} elevation outside [0, 90]", s.sat_id));
            }
        }
        self.lidar.validate().map_err(SceneError::Invalid)?;
        if !(self.sensor_height_m > 0.0) || !(self.noise_sigma_m >= 0.0) {
            return bad("sensor height must be positive and noise non-negative".into());
        }
        if !(self.lidar_rate_hz > 0.0) || !(self.gnss_rate_hz > 0.0) {
            return bad("rates must be positive".into());
        }
        Ok(())
    }

    pub fn end_time_s(&self) -> f64 {
        self.trajectory.last().map_or(0.0, |w| w.time_s)
    }

    /// LiDAR frame timestamps from the first waypoint to the last.
    pub fn lidar_times(&self) -> Vec<f64> {
        sample_times(self.trajectory[0].time_s, self.end_time_s(), self.lidar_rate_hz)
    }

    pub fn gnss_times(&self) -> Vec<f64> {
        sample_times(
            self.gnss_start_s.max(self.trajectory[0].time_s),
            self.end_time_s(),
            self.gnss_rate_hz,
        )
    }

    /// LiDAR center in scene ENU and heading (rad) at time `t`.
    pub fn receiver_state(&self, t: f64) -> (EnuPosition, f64) {
        let traj = &self.trajectory;
        let up = self.sensor_height_m;
        let i = traj.partition_point(|w| w.time_s <= t);
        let (a, b) = match i {
            0 => (&traj[0], traj.get(1)),
            n if n >= traj.len() => (&traj[traj.len() - 1], None),
            n => (&traj[n - 1], Some(&traj[n])),
        };
        let Some(b) = b else {
            let heading = a.heading_deg.map(f64::to_radians).unwrap_or_else(|| {
                traj.len()
                    .checked_sub(2)
                    .map_or(0.0, |k| motion_heading(&traj[k], &traj[k + 1]))
            });
            return (EnuPosition::new(a.east_m, a.north_m, up), heading);
        };
        let s = ((t - a.time_s) / (b.time_s - a.time_s)).clamp(0.0, 1.0);
        let east = a.east_m + s * (b.east_m - a.east_m);
        let north = a.north_m + s * (b.north_m - a.north_m);
        let heading = a.heading_deg.map(f64::to_radians).unwrap_or_else(|| motion_heading(a, b));
        (EnuPosition::new(east, north, up), heading)
    }

    /// LiDAR body to scene ENU at time `t`.
    pub fn lidar_pose(&self, t: f64) -> FrameTransform {
        let (p, heading) = self.receiver_state(t);
        let mut pose = FrameTransform::from_heading(heading);
        pose.translation = p.to_vector();
        pose
    }

    pub fn active_faces(&self, t: f64) -> impl Iterator<Item = (usize, &Face)> + '_ {
        self.faces.iter().enumerate().filter(move |(_, f)| f.is_active(t))
    }

    pub fn from_file(path: &Path) -> Result<Self, SceneError> {
        let text = std::fs::read_to_string(path).map_err(|source| SceneError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Parses the scene text format. `building`, `face`, `bus`, `waypoint`
    /// and `satellite` may repeat; every other key is a scalar setting.
    pub fn parse(text: &str) -> Result<Self, SceneError> {
        let mut s = SceneSpec {
            trajectory: Vec::new(),
            ..Default::default()
        };
        for e in parse_kv(text)? {
            match e.key.as_str() {
                "anchor" => {
                    let [lat, lon, h] = e.parse_fixed::<3>()?;
                    s.anchor = GeodeticPosition::from_degrees(lat, lon, h);
                }
                "building" => {
                    let [x0, y0, x1, y1, h] = e.parse_fixed::<5>()?;
                    s.faces.extend(Face::box_faces([x0.min(x1), y0.min(y1)], [x0.max(x1), y0.max(y1)], h));
                }
                "face" => {
                    let [x0, y0, x1, y1, h] = e.parse_fixed::<5>()?;
                    s.faces.push(Face::new([x0, y0], [x1, y1], h));
                }
                "bus" => {
                    let [x0, y0, x1, y1, h, from, to] = e.parse_fixed::<7>()?;
                    for mut f in Face::box_faces([x0.min(x1), y0.min(y1)], [x0.max(x1), y0.max(y1)], h) {
                        f.active_s = Some((from, to));
                        s.faces.push(f);
                    }
                }
                "waypoint" => {
                    let v = e.parse_list()?;
                    if !(3..=4).contains(&v.len()) {
                        return Err(e.invalid("expected t east north [heading_deg]").into());
                    }
                    s.trajectory.push(Waypoint {
                        time_s: v[0],
                        east_m: v[1],
                        north_m: v[2],
                        heading_deg: v.get(3).copied(),
                    });
                }
                "satellite" => {
                    let parts: Vec<&str> = e.value.split_whitespace().collect();
                    if !(4..=6).contains(&parts.len()) {
                        return Err(e
                            .invalid("expected id constellation el_deg az_deg [el_rate az_rate]")
                            .into());
                    }
                    let num = |i: usize| -> Result<f64, KvError> {
                        parts
                            .get(i)
                            .map_or(Ok(0.0), |p| p.parse().map_err(|_| e.invalid(format!("bad number {p:?}"))))
                    };
                    s.satellites.push(SatelliteTrack {
                        sat_id: parts[0].to_string(),
                        constellation: parts[1].parse().map_err(|m| e.invalid(m))?,
                        elevation_deg: num(2)?,
                        azimuth_deg: num(3)?,
                        elevation_rate_dps: num(4)?,
                        azimuth_rate_dps: num(5)?,
                    });
                }
                "sensor_height_m" => s.sensor_height_m = e.parse()?,
                "noise_sigma_m" => s.noise_sigma_m = e.parse()?,
                "seed" => s.seed = e.parse()?,
                "atmosphere" => s.atmosphere = e.parse_bool()?,
                "klobuchar_alpha" => s.klobuchar_alpha = e.parse_fixed()?,
                "klobuchar_beta" => s.klobuchar_beta = e.parse_fixed()?,
                "clock_bias_m" => s.clock_bias_m = e.parse()?,
                "clock_drift_mps" => s.clock_drift_mps = e.parse()?,
                "lidar_rate_hz" => s.lidar_rate_hz = e.parse()?,
                "gnss_rate_hz" => s.gnss_rate_hz = e.parse()?,
                "gnss_start_s" => s.gnss_start_s = e.parse()?,
                "lidar_vertical_fov_deg" => s.lidar.vertical_fov_deg = e.parse_fixed()?,
                "lidar_rings" => s.lidar.n_scan_rings = e.parse()?,
                "lidar_horizontal_resolution_deg" => s.lidar.horizontal_resolution_deg = e.parse()?,
                "lidar_max_range_m" => s.lidar.max_range_m = e.parse()?,
                "lidar_ground" => s.lidar.ground_returns = e.parse_bool()?,
                _ => return Err(e.unknown().into()),
            }
        }
        if s.trajectory.is_empty() {
            s.trajectory = SceneSpec::default().trajectory;
        }
        s.validate()?;
        Ok(s)
    }
}

fn motion_heading(a: &Waypoint, b: &Waypoint) -> f64 {
    let de = b.east_m - a.east_m;
    let dn = b.north_m - a.north_m;
    if de.hypot(dn) < 1e-9 {
        return a.heading_deg.map_or(0.0, f64::to_radians);
    }
    de.atan2(dn)
}

fn sample_times(start: f64, end: f64, rate_hz: f64) -> Vec<f64> {
    // integer tick counts keep the grids of different rates aligned
    let first = (start * rate_hz - 1e-9).ceil() as i64;
    let last = (end * rate_hz + 1e-9).floor() as i64;
    (first..=last).map(|k| k as f64 / rate_hz).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const TEXT: &str = "
# small test scene
anchor = 22.3 114.2 5
building = -30 -50 -8 200 25
face = 8 -50 8 200 12
bus = 3 20 5 32 4 10 20
waypoint = 0 0 0
waypoint = 20 0 100
satellite = G01 GPS 35 90
satellite = C02 BeiDou 60 10 0.01 0.1
noise_sigma_m = 2
seed = 7
lidar_vertical_fov_deg = -30 10
lidar_rings = 16
";

    #[test]
    fn parses_scene_text() {
        let s = SceneSpec::parse(TEXT).unwrap();
        assert_eq!(s.faces.len(), 4 + 1 + 4);
        assert!(s.faces[5..].iter().all(|f| f.active_s == Some((10.0, 20.0))));
        assert_eq!(s.trajectory.len(), 2);
        assert_eq!(s.satellites[1].constellation, Constellation::BeiDou);
        assert_eq!(s.satellites[1].azimuth_rate_dps, 0.1);
        assert_eq!(s.lidar.n_scan_rings, 16);
        assert_eq!(s.seed, 7);
    }

    #[test]
    fn rejects_bad_scenes() {
        assert!(matches!(SceneSpec::parse("unknown = 1"), Err(SceneError::Parse(e)) if e.line == 1));
        assert!(matches!(SceneSpec::parse("face = 0 0 1 1 -3"), Err(SceneError::Invalid(_))));
        assert!(SceneSpec::parse("waypoint = 5 0 0\nwaypoint = 5 1 1").is_err());
        assert!(SceneSpec::parse("satellite = G01 GPS 35").is_err());
        assert!(SceneSpec::parse("satellite = G01 XYZ 35 0").is_err());
    }

    #[test]
    fn trajectory_interpolation() {
        let s = SceneSpec::parse(TEXT).unwrap();
        let (p, h) = s.receiver_state(10.0);
        assert_abs_diff_eq!(p.north_m, 50.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.up_m, 1.8);
        assert_abs_diff_eq!(h, 0.0);
        let (p, _) = s.receiver_state(100.0);
        assert_abs_diff_eq!(p.north_m, 100.0);
        let pose = s.lidar_pose(10.0);
        // body x points along the motion (north)
        let fwd = pose.apply_rotation(&Vector3::x());
        assert_abs_diff_eq!(fwd.y, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn time_grids_align() {
        let mut s = SceneSpec::parse(TEXT).unwrap();
        s.gnss_start_s = 2.5;
        let lidar = s.lidar_times();
        let gnss = s.gnss_times();
        assert_eq!(lidar.len(), 201);
        assert_eq!(gnss.first(), Some(&3.0));
        assert_eq!(gnss.len(), 18);
        for t in gnss {
            assert!(lidar.iter().any(|l| (l - t).abs() < 1e-9));
        }
    }

    #[test]
    fn face_geometry() {
        let f = Face::new([0.0, 0.0], [10.0, 0.0], 5.0);
        assert_abs_diff_eq!(f.normal(), Vector3::new(0.0, 1.0, 0.0));
        assert_abs_diff_eq!(f.horizontal_distance(&Vector3::new(5.0, 3.0, 9.0)), 3.0);
        assert_abs_diff_eq!(f.horizontal_distance(&Vector3::new(13.0, 4.0, 0.0)), 5.0);
        let mut g = f.clone();
        g.active_s = Some((1.0, 2.0));
        assert!(!g.is_active(0.5) && g.is_active(1.5));
    }
}
