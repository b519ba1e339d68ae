//! Sliding window map: the last `n_sw` LiDAR frames registered into the
//! newest frame, rotated into local ENU, ground-filtered, voxel-thinned and
//! indexed for radius queries.

mod kdtree;

use std::borrow::Borrow;
use std::collections::HashSet;

use nalgebra::Vector3;
use thiserror::Error;

pub use kdtree::KdTree;

use crate::frames::{FrameTransform, GeodeticPosition};

/// Maximum plausible LiDAR return range.
pub const MAX_POINT_RANGE_M: f64 = 300.0;
/// Upper bound on the receiver lever arm.
pub const MAX_LEVER_ARM_M: f64 = 10.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SwmError {
    #[error("sliding window contains no frames")]
    EmptyWindow,
    #[error("window holds {got} frames but n_sw is {n_sw}")]
    WindowOverflow { got: usize, n_sw: usize },
    #[error("bad pose: {0}")]
    BadPose(String),
    #[error("invalid point {index} in frame at t={timestamp_s}: {reason}")]
    InvalidPoint {
        timestamp_s: f64,
        index: usize,
        reason: &'static str,
    },
    #[error("invalid calibration: {0}")]
    BadCalibration(String),
}

/// One LiDAR sweep in the LiDAR body frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloudFrame {
    pub timestamp_s: f64,
    pub points: Vec<Vector3<f64>>,
}

impl PointCloudFrame {
    /// Validates that every point is finite and inside the sensor range.
    pub fn new(timestamp_s: f64, points: Vec<Vector3<f64>>) -> Result<Self, SwmError> {
        for (index, p) in points.iter().enumerate() {
            if !p.iter().all(|v| v.is_finite()) {
                return Err(SwmError::InvalidPoint {
                    timestamp_s,
                    index,
                    reason: "non-finite coordinate",
                });
            }
            if p.norm() >= MAX_POINT_RANGE_M {
                return Err(SwmError::InvalidPoint {
                    timestamp_s,
                    index,
                    reason: "beyond LiDAR range",
                });
            }
        }
        Ok(Self {
            timestamp_s,
            points,
        })
    }
}

/// Maps a frame's body coordinates into the body frame of the newest frame
/// in the window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegistrationPose {
    pub timestamp_s: f64,
    pub transform: FrameTransform,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    /// LiDAR body to receiver body.
    pub lidar_to_receiver: FrameTransform,
    /// Receiver body origin in the map ENU frame.
    pub receiver_lever_arm_enu: Vector3<f64>,
}

impl Default for Calibration {
    fn default() -> Self {
        Self {
            lidar_to_receiver: FrameTransform::identity(),
            receiver_lever_arm_enu: Vector3::zeros(),
        }
    }
}

impl Calibration {
    pub fn validate(&self) -> Result<(), SwmError> {
        if !self.lidar_to_receiver.is_orthonormal() {
            return Err(SwmError::BadCalibration(
                "extrinsic rotation is not orthonormal".into(),
            ));
        }
        if !(self.receiver_lever_arm_enu.norm() < MAX_LEVER_ARM_M) {
            return Err(SwmError::BadCalibration(format!(
                "lever arm {:.3} m exceeds {MAX_LEVER_ARM_M} m",
                self.receiver_lever_arm_enu.norm()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwmConfig {
    pub n_sw: usize,
    /// Points lower than this above the ground are discarded.
    pub ground_height_m: f64,
    /// LiDAR height above the ground.
    pub sensor_height_m: f64,
    /// Voxel edge for thinning; `0` keeps every point.
    pub voxel_m: f64,
}

impl Default for SwmConfig {
    fn default() -> Self {
        Self {
            n_sw: 200,
            ground_height_m: 0.5,
            sensor_height_m: 1.8,
            voxel_m: 0.2,
        }
    }
}

/// Immutable, indexed point map in ENU around the current receiver.
#[derive(Debug, Clone)]
pub struct SlidingWindowMap {
    anchor: GeodeticPosition,
    window_size: usize,
    lidar_center_enu: Vector3<f64>,
    index: KdTree,
}

impl SlidingWindowMap {
    /// Indexes ENU points as-is, without ground removal or thinning.
    pub fn from_enu_points(
        points: &[Vector3<f64>],
        lidar_center_enu: Vector3<f64>,
        anchor: GeodeticPosition,
        window_size: usize,
    ) -> Self {
        Self {
            anchor,
            window_size,
            lidar_center_enu,
            index: KdTree::build(points),
        }
    }

    pub fn empty() -> Self {
        Self::from_enu_points(&[], Vector3::zeros(), GeodeticPosition::default(), 0)
    }

    pub fn anchor(&self) -> &GeodeticPosition {
        &self.anchor
    }

    pub fn window_size(&self) -> usize {
        self.window_size
    }

    /// LiDAR center in the map frame; the default search origin.
    pub fn lidar_center(&self) -> Vector3<f64> {
        self.lidar_center_enu
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn points(&self) -> impl Iterator<Item = Vector3<f64>> + '_ {
        self.index.points()
    }

    pub fn index(&self) -> &KdTree {
        &self.index
    }
}

/// LiDAR body point to receiver body frame.
pub fn transform_point_to_receiver_frame(p_bl: &Vector3<f64>, calib: &Calibration) -> Vector3<f64> {
    calib.lidar_to_receiver.apply(p_bl)
}

/// LiDAR body point to ENU: extrinsics, then the body-to-ENU orientation,
/// then the receiver lever arm.
pub fn transform_point_to_enu(
    p_bl: &Vector3<f64>,
    ahrs_rotation: &FrameTransform,
    calib: &Calibration,
) -> Vector3<f64> {
    ahrs_rotation.apply(&transform_point_to_receiver_frame(p_bl, calib)) + calib.receiver_lever_arm_enu
}

/// Builds the map from the window frames, newest last.
///
/// Frames are merged newest first and the first point to land in a voxel is
/// kept, so a longer window only ever adds points to a shorter one.
pub fn build_swm<F: Borrow<PointCloudFrame>>(
    frames: &[(F, RegistrationPose)],
    ahrs_rotation: &FrameTransform,
    calib: &Calibration,
    cfg: &SwmConfig,
    anchor: GeodeticPosition,
) -> Result<SlidingWindowMap, SwmError> {
    if frames.is_empty() {
        return Err(SwmError::EmptyWindow);
    }
    if frames.len() > cfg.n_sw {
        return Err(SwmError::WindowOverflow {
            got: frames.len(),
            n_sw: cfg.n_sw,
        });
    }
    calib.validate()?;
    if !ahrs_rotation.is_orthonormal() {
        return Err(SwmError::BadPose("AHRS rotation is not orthonormal".into()));
    }
    for pair in frames.windows(2) {
        if !(pair[1].1.timestamp_s > pair[0].1.timestamp_s) {
            return Err(SwmError::BadPose(format!(
                "pose timestamps not increasing at t={}",
                pair[1].1.timestamp_s
            )));
        }
    }
    for (_, pose) in frames {
        if !pose.transform.is_orthonormal() {
            return Err(SwmError::BadPose(format!(
                "registration rotation at t={} is not orthonormal",
                pose.timestamp_s
            )));
        }
    }

    let lidar_center = transform_point_to_enu(&Vector3::zeros(), ahrs_rotation, calib);
    let min_up = lidar_center.z - cfg.sensor_height_m + cfg.ground_height_m;
    // Registration, extrinsics, orientation and lever arm fold into one
    // rigid transform per frame.
    let body_to_map = ahrs_rotation.compose(&calib.lidar_to_receiver);
    let capacity: usize = frames.iter().map(|(f, _)| f.borrow().points.len()).sum();
    let mut points = Vec::with_capacity(if cfg.voxel_m > 0.0 { capacity / 4 } else { capacity });
    let mut occupied: HashSet<(i64, i64, i64)> = HashSet::new();

    for (frame, pose) in frames.iter().rev() {
        let t = body_to_map.compose(&pose.transform);
        for p in &frame.borrow().points {
            let q = t.apply(p) + calib.receiver_lever_arm_enu;
            if q.z < min_up {
                continue;
            }
            if cfg.voxel_m > 0.0 {
                let key = (
                    (q.x / cfg.voxel_m).floor() as i64,
                    (q.y / cfg.voxel_m).floor() as i64,
                    (q.z / cfg.voxel_m).floor() as i64,
                );
                if !occupied.insert(key) {
                    continue;
                }
            }
            points.push(q);
        }
    }

    Ok(SlidingWindowMap::from_enu_points(
        &points,
        lidar_center,
        anchor,
        cfg.n_sw,
    ))
}

/// Exact count of map points within `radius_m` of `center`.
pub fn query_neighbors(map: &SlidingWindowMap, center: &Vector3<f64>, radius_m: f64) -> usize {
    map.index.count_within(center, radius_m)
}

/// Parses a frame file body: one `x y z` triple per line, `#` comments.
pub fn parse_frame_text(text: &str) -> Result<Vec<Vector3<f64>>, (usize, String)> {
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split_whitespace();
        let mut coords = [0.0; 3];
        for c in coords.iter_mut() {
            let tok = fields
                .next()
                .ok_or_else(|| (i + 1, format!("expected 3 values, got '{line}'")))?;
            *c = tok
                .parse()
                .map_err(|_| (i + 1, format!("invalid number '{tok}'")))?;
        }
        if fields.next().is_some() {
            return Err((i + 1, format!("expected 3 values, got '{line}'")));
        }
        points.push(Vector3::new(coords[0], coords[1], coords[2]));
    }
    Ok(points)
}

pub fn format_frame_text(points: &[Vector3<f64>]) -> String {
    let mut out = String::with_capacity(points.len() * 28);
    out.push_str("# x y z (m, LiDAR body frame)\n");
    for p in points {
        out.push_str(&format!("{:.4} {:.4} {:.4}\n", p.x, p.y, p.z));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::{Matrix3, Matrix4};
    use rand::{Rng, SeedableRng};

    fn pose(t: f64, transform: FrameTransform) -> RegistrationPose {
        RegistrationPose {
            timestamp_s: t,
            transform,
        }
    }

    fn homogeneous(t: &FrameTransform) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&t.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&t.translation);
        m
    }

    #[test]
    fn receiver_frame_identity_and_translation() {
        let p = Vector3::new(3.0, -2.0, 1.0);
        assert_eq!(transform_point_to_receiver_frame(&p, &Calibration::default()), p);
        let calib = Calibration {
            lidar_to_receiver: FrameTransform::from_translation(Vector3::new(1.0, 2.0, 3.0)),
            ..Default::default()
        };
        assert_eq!(
            transform_point_to_receiver_frame(&Vector3::zeros(), &calib),
            Vector3::new(1.0, 2.0, 3.0)
        );
    }

    #[test]
    fn receiver_frame_matches_homogeneous_composition() {
        let yaw = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        let ext = FrameTransform::new(yaw, Vector3::new(0.5, -0.2, 0.3));
        let calib = Calibration {
            lidar_to_receiver: ext,
            ..Default::default()
        };
        let p = Vector3::new(4.0, 1.0, -0.5);
        let h = homogeneous(&ext) * nalgebra::Vector4::new(p.x, p.y, p.z, 1.0);
        let got = transform_point_to_receiver_frame(&p, &calib);
        assert_abs_diff_eq!(got, Vector3::new(h.x, h.y, h.z), epsilon = 1e-12);
        assert_abs_diff_eq!(got, Vector3::new(-0.5, 3.8, -0.2), epsilon = 1e-12);
    }

    #[test]
    fn enu_chain() {
        let p = Vector3::new(1.0, 2.0, 3.0);
        let id = FrameTransform::identity();
        assert_eq!(transform_point_to_enu(&p, &id, &Calibration::default()), p);

        let lever = Vector3::new(0.1, 0.2, 0.3);
        let calib = Calibration {
            receiver_lever_arm_enu: lever,
            ..Default::default()
        };
        let north = FrameTransform::from_heading(0.0);
        let got = transform_point_to_enu(&Vector3::new(10.0, 0.0, 0.0), &north, &calib);
        assert_abs_diff_eq!(got, Vector3::new(0.0, 10.0, 0.0) + lever, epsilon = 1e-12);

        let calib = Calibration {
            lidar_to_receiver: FrameTransform::new(
                Matrix3::new(0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0),
                Vector3::new(0.4, 0.0, -0.1),
            ),
            receiver_lever_arm_enu: lever,
        };
        let ahrs = FrameTransform::from_heading(0.7);
        let via_receiver = ahrs.apply(&transform_point_to_receiver_frame(&p, &calib)) + lever;
        assert_abs_diff_eq!(transform_point_to_enu(&p, &ahrs, &calib), via_receiver, epsilon = 1e-12);
    }

    #[test]
    fn single_frame_identity() {
        let lever = Vector3::new(0.0, 0.5, 0.2);
        let calib = Calibration {
            receiver_lever_arm_enu: lever,
            ..Default::default()
        };
        let pts = vec![Vector3::new(5.0, 0.0, 0.0), Vector3::new(0.0, 7.0, 2.0)];
        let frame = PointCloudFrame::new(0.0, pts.clone()).unwrap();
        let cfg = SwmConfig {
            voxel_m: 0.0,
            ..Default::default()
        };
        let map = build_swm(
            &[(frame, pose(0.0, FrameTransform::identity()))],
            &FrameTransform::identity(),
            &calib,
            &cfg,
            GeodeticPosition::default(),
        )
        .unwrap();
        let mut got: Vec<_> = map.points().collect();
        got.sort_by(|a, b| a.x.total_cmp(&b.x));
        let mut want: Vec<_> = pts.iter().map(|p| p + lever).collect();
        want.sort_by(|a, b| a.x.total_cmp(&b.x));
        assert_eq!(got, want);
        // anchor consistency: LiDAR origin lands on the lever arm
        assert_abs_diff_eq!(map.lidar_center(), lever, epsilon = 1e-9);
    }

    #[test]
    fn shifted_frames_collapse_with_inverse_poses() {
        let base: Vec<_> = (0..50)
            .map(|i| Vector3::new(10.0 + 0.5 * i as f64, 3.0, 1.0 + 0.3 * (i % 7) as f64))
            .collect();
        let frames: Vec<_> = (0..3)
            .map(|k| {
                let shift = Vector3::new(k as f64, 0.0, 0.0);
                let pts = base.iter().map(|p| p + shift).collect();
                (
                    PointCloudFrame::new(k as f64 * 0.1, pts).unwrap(),
                    pose(k as f64 * 0.1, FrameTransform::from_translation(-shift)),
                )
            })
            .collect();
        let map = build_swm(
            &frames,
            &FrameTransform::identity(),
            &Calibration::default(),
            &SwmConfig::default(),
            GeodeticPosition::default(),
        )
        .unwrap();
        assert_eq!(map.len(), base.len());
    }

    #[test]
    fn ground_points_are_removed() {
        let pts = (0..20)
            .map(|i| Vector3::new(i as f64, 1.0, -1.6))
            .collect();
        let map = build_swm(
            &[(PointCloudFrame::new(0.0, pts).unwrap(), pose(0.0, FrameTransform::identity()))],
            &FrameTransform::identity(),
            &Calibration::default(),
            &SwmConfig::default(),
            GeodeticPosition::default(),
        )
        .unwrap();
        assert!(map.is_empty());
    }

    #[test]
    fn build_errors() {
        let cfg = SwmConfig::default();
        let id = FrameTransform::identity();
        let calib = Calibration::default();
        assert_eq!(
            build_swm::<PointCloudFrame>(&[], &id, &calib, &cfg, GeodeticPosition::default()).unwrap_err(),
            SwmError::EmptyWindow
        );
        let bad = FrameTransform::new(Matrix3::identity() * 2.0, Vector3::zeros());
        let frame = PointCloudFrame::new(0.0, vec![Vector3::new(1.0, 0.0, 0.0)]).unwrap();
        let err = build_swm(
            &[(frame, pose(0.0, bad))],
            &id,
            &calib,
            &cfg,
            GeodeticPosition::default(),
        )
        .unwrap_err();
        assert!(matches!(err, SwmError::BadPose(_)));
        assert!(PointCloudFrame::new(0.0, vec![Vector3::new(400.0, 0.0, 0.0)]).is_err());
        assert!(PointCloudFrame::new(0.0, vec![Vector3::new(f64::NAN, 0.0, 0.0)]).is_err());
    }

    #[test]
    fn window_bound_and_monotone_growth() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let frames: Vec<_> = (0..6)
            .map(|k| {
                let pts = (0..200)
                    .map(|_| {
                        Vector3::new(
                            rng.random_range(-30.0..30.0),
                            rng.random_range(-30.0..30.0),
                            rng.random_range(-1.0..15.0),
                        )
                    })
                    .collect();
                let shift = Vector3::new(0.0, -0.5 * (5 - k) as f64, 0.0);
                (
                    PointCloudFrame::new(k as f64, pts).unwrap(),
                    pose(k as f64, FrameTransform::from_translation(shift)),
                )
            })
            .collect();
        let cfg = SwmConfig {
            n_sw: 6,
            ..Default::default()
        };
        let id = FrameTransform::identity();
        let calib = Calibration::default();
        let short = build_swm(&frames[3..], &id, &calib, &cfg, GeodeticPosition::default()).unwrap();
        let long = build_swm(&frames, &id, &calib, &cfg, GeodeticPosition::default()).unwrap();
        assert!(long.len() <= 6 * 200);
        let long_pts: HashSet<_> = long.points().map(|p| (p.x.to_bits(), p.y.to_bits(), p.z.to_bits())).collect();
        assert!(short
            .points()
            .all(|p| long_pts.contains(&(p.x.to_bits(), p.y.to_bits(), p.z.to_bits()))));
    }

    #[test]
    fn neighbor_queries() {
        let empty = SlidingWindowMap::empty();
        assert_eq!(query_neighbors(&empty, &Vector3::zeros(), 1.0), 0);
        let map = SlidingWindowMap::from_enu_points(
            &[Vector3::new(0.5, 0.0, 0.0)],
            Vector3::zeros(),
            GeodeticPosition::default(),
            1,
        );
        assert_eq!(query_neighbors(&map, &Vector3::zeros(), 1.0), 1);

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<_> = (0..1000)
            .map(|_| {
                Vector3::new(
                    rng.random_range(-10.0..10.0),
                    rng.random_range(-10.0..10.0),
                    rng.random_range(-10.0..10.0),
                )
            })
            .collect();
        let map = SlidingWindowMap::from_enu_points(&pts, Vector3::zeros(), GeodeticPosition::default(), 1);
        for _ in 0..100 {
            let c = Vector3::new(
                rng.random_range(-10.0..10.0),
                rng.random_range(-10.0..10.0),
                rng.random_range(-10.0..10.0),
            );
            let r = rng.random_range(0.2..5.0);
            let brute = pts.iter().filter(|p| (*p - c).norm_squared() <= r * r).count();
            assert_eq!(query_neighbors(&map, &c, r), brute);
        }
    }

    #[test]
    fn frame_text_parsing() {
        let pts = parse_frame_text("# header\n1 2 3\n\n 4.5 -1 0 \n").unwrap();
        assert_eq!(pts, vec![Vector3::new(1.0, 2.0, 3.0), Vector3::new(4.5, -1.0, 0.0)]);
        assert_eq!(parse_frame_text("1 2\n").unwrap_err().0, 1);
        assert_eq!(parse_frame_text("1 2 3\n1 x 3\n").unwrap_err().0, 2);
    }
}
