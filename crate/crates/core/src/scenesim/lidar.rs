//! Spinning multi-ring LiDAR: first returns from the scene faces (and
//! optionally the ground plane) on a ring/azimuth grid.

use nalgebra::Vector3;

use super::{intersect_face, SceneSpec};
use crate::frames::FrameTransform;
use crate::swm::{PointCloudFrame, MAX_POINT_RANGE_M};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LidarModel {
    /// Lowest and highest ring elevation in degrees.
    pub vertical_fov_deg: [f64; 2],
    pub n_scan_rings: usize,
    pub horizontal_resolution_deg: f64,
    pub max_range_m: f64,
    pub ground_returns: bool,
}

impl Default for LidarModel {
    fn default() -> Self {
        Self {
            vertical_fov_deg: [-30.0, 10.0],
            n_scan_rings: 32,
            horizontal_resolution_deg: 0.4,
            max_range_m: 100.0,
            ground_returns: true,
        }
    }
}

impl LidarModel {
    pub fn validate(&self) -> Result<(), String> {
        let [lo, hi] = self.vertical_fov_deg;
        if !(lo < hi) || lo < -90.0 || hi > 90.0 {
            return Err(format!("vertical FOV [{lo}, {hi}] is invalid"));
        }
        if self.n_scan_rings == 0 {
            return Err("need at least one scan ring".into());
        }
        if !(self.horizontal_resolution_deg > 0.0 && self.horizontal_resolution_deg <= 90.0) {
            return Err("horizontal resolution must be in (0, 90] degrees".into());
        }
        if !(self.max_range_m > 0.0 && self.max_range_m <= MAX_POINT_RANGE_M) {
            return Err(format!("max range must be in (0, {MAX_POINT_RANGE_M}] m"));
        }
        Ok(())
    }

    fn ring_elevations(&self) -> Vec<f64> {
        let [lo, hi] = self.vertical_fov_deg;
        let n = self.n_scan_rings;
        (0..n)
            .map(|i| {
                let f = if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 };
                (lo + f * (hi - lo)).to_radians()
            })
            .collect()
    }

    fn azimuth_count(&self) -> usize {
        (360.0 / self.horizontal_resolution_deg).round().max(1.0) as usize
    }
}

/// One sweep from the sensor at `pose` (body to scene ENU) at time `t`.
/// Points are in the body frame: x forward, y left, z up.
pub fn sample_pointcloud(scene: &SceneSpec, pose: &FrameTransform, t: f64, lidar: &LidarModel) -> PointCloudFrame {
    let origin = pose.translation;
    let faces: Vec<_> = scene
        .active_faces(t)
        .filter(|(_, f)| f.horizontal_distance(&origin) <= lidar.max_range_m)
        .map(|(_, f)| f)
        .collect();
    let n_az = lidar.azimuth_count();
    let mut points = Vec::new();
    for phi in lidar.ring_elevations() {
        let (sp, cp) = phi.sin_cos();
        for j in 0..n_az {
            let beta = (j as f64 / n_az as f64) * std::f64::consts::TAU;
            let (sb, cb) = beta.sin_cos();
            let body = Vector3::new(cp * cb, cp * sb, sp);
            let world = pose.apply_rotation(&body);
            let mut best = lidar.max_range_m;
            let mut hit = false;
            for f in &faces {
                if let Some(tau) = intersect_face(f, &origin, &world) {
                    if tau < best {
                        best = tau;
                        hit = true;
                    }
                }
            }
            if lidar.ground_returns && world.z < 0.0 {
                let tau = -origin.z / world.z;
                if tau > 0.0 && tau < best {
                    best = tau;
                    hit = true;
                }
            }
            if hit {
                points.push(body * best);
            }
        }
    }
    PointCloudFrame {
        timestamp_s: t,
        points,
    }
}

/// Regular grid over every active face, spacing at most `spacing_m`, edges
/// included. Scene ENU coordinates.
pub fn sample_faces(scene: &SceneSpec, t: f64, spacing_m: f64) -> Vec<Vector3<f64>> {
    let mut out = Vec::new();
    for (_, f) in scene.active_faces(t) {
        let ns = (f.length() / spacing_m).ceil() as usize + 1;
        let nz = (f.height_m / spacing_m).ceil() as usize + 1;
        for i in 0..ns {
            let s = i as f64 / (ns - 1) as f64;
            let b = f.start + (f.end - f.start) * s;
            for k in 0..nz {
                let z = f.height_m * k as f64 / (nz - 1) as f64;
                out.push(Vector3::new(b.x, b.y, z));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenesim::Face;
    use approx::assert_abs_diff_eq;

    fn scene(faces: Vec<Face>) -> SceneSpec {
        SceneSpec {
            faces,
            ..Default::default()
        }
    }

    fn pose_at(e: f64, n: f64, up: f64) -> FrameTransform {
        let mut p = FrameTransform::identity();
        p.translation = Vector3::new(e, n, up);
        p
    }

    #[test]
    fn fov_truncates_tall_wall() {
        // narrow 30 m tall wall 10 m ahead (+x body = east with identity pose)
        let s = scene(vec![Face::new([10.0, -0.5], [10.0, 0.5], 30.0)]);
        let lidar = LidarModel {
            ground_returns: false,
            n_scan_rings: 64,
            ..Default::default()
        };
        let frame = sample_pointcloud(&s, &pose_at(0.0, 0.0, 1.8), 0.0, &lidar);
        assert!(!frame.points.is_empty());
        let top = frame.points.iter().map(|p| p.z + 1.8).fold(f64::MIN, f64::max);
        let expected = 10.0 * 10f64.to_radians().tan() + 1.8;
        assert!((top - expected).abs() < 0.01, "{top} vs {expected}");
        assert!(top < 30.0);
        for p in &frame.points {
            assert_abs_diff_eq!(p.x, 10.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn empty_scene_ground_only() {
        let s = scene(vec![]);
        let on = sample_pointcloud(&s, &pose_at(0.0, 0.0, 1.8), 0.0, &LidarModel::default());
        assert!(!on.points.is_empty());
        assert!(on.points.iter().all(|p| (p.z + 1.8).abs() < 1e-9 && p.norm() <= 100.0 + 1e-9));
        let off = LidarModel {
            ground_returns: false,
            ..Default::default()
        };
        assert!(sample_pointcloud(&s, &pose_at(0.0, 0.0, 1.8), 0.0, &off).points.is_empty());
    }

    #[test]
    fn resolution_scales_point_count() {
        let s = scene(vec![Face::new([-20.0, 15.0], [20.0, 15.0], 20.0)]);
        let coarse = LidarModel {
            ground_returns: false,
            horizontal_resolution_deg: 0.8,
            ..Default::default()
        };
        let fine = LidarModel {
            horizontal_resolution_deg: 0.4,
            ..coarse
        };
        let a = sample_pointcloud(&s, &pose_at(0.0, 0.0, 1.8), 0.0, &coarse).points.len() as f64;
        let b = sample_pointcloud(&s, &pose_at(0.0, 0.0, 1.8), 0.0, &fine).points.len() as f64;
        assert!((b / a - 2.0).abs() < 0.1, "{a} {b}");
    }

    #[test]
    fn body_frame_follows_heading() {
        // facing north, a wall to the north shows up straight ahead
        let s = scene(vec![Face::new([-5.0, 10.0], [5.0, 10.0], 10.0)]);
        let mut pose = FrameTransform::from_heading(0.0);
        pose.translation = Vector3::new(0.0, 0.0, 1.8);
        let lidar = LidarModel {
            ground_returns: false,
            ..Default::default()
        };
        let frame = sample_pointcloud(&s, &pose, 0.0, &lidar);
        assert!(frame.points.iter().all(|p| (p.x - 10.0).abs() < 1e-9));
        // mapping back lands on the face plane
        for p in &frame.points {
            assert_abs_diff_eq!(pose.apply(p).y, 10.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn face_grid_spacing() {
        let s = scene(vec![Face::new([0.0, 0.0], [10.0, 0.0], 5.0)]);
        let pts = sample_faces(&s, 0.0, 0.25);
        assert_eq!(pts.len(), 41 * 21);
        assert!(pts.iter().any(|p| p.z == 5.0 && p.x == 10.0));
    }
}
