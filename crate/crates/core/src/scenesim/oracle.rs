//! Exact ray/face geometry: visibility, mirror-image reflections and edge
//! clearance. Works on the analytic faces only, never on sampled points.

use nalgebra::{Vector2, Vector3};

use super::{Face, SceneSpec};
use crate::frames::SatelliteDirection;

/// Horizontal reach of the visibility test.
const MAX_HORIZONTAL_M: f64 = 250.0;
const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleHit {
    pub point: Vector3<f64>,
    pub face: usize,
    /// Distance along the ray.
    pub distance_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OracleVisibility {
    Los,
    Nlos(OracleHit),
}

impl OracleVisibility {
    pub fn is_nlos(&self) -> bool {
        matches!(self, OracleVisibility::Nlos(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleReflection {
    pub point: Vector3<f64>,
    pub face: usize,
    pub extra_path_m: f64,
}

fn cross2(a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Ray parameter (in units of `dir`) where `origin + τ·dir` crosses the
/// face rectangle, if it does for some τ > 0.
pub fn intersect_face(face: &Face, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<f64> {
    let d = Vector2::new(dir.x, dir.y);
    let e = face.end - face.start;
    let denom = cross2(&d, &e);
    if denom.abs() < 1e-12 {
        return None;
    }
    let w = face.start - Vector2::new(origin.x, origin.y);
    let tau = cross2(&w, &e) / denom;
    let s = cross2(&w, &d) / denom;
    if tau <= EPS || !(0.0..=1.0).contains(&s) {
        return None;
    }
    let z = origin.z + tau * dir.z;
    (0.0..=face.height_m).contains(&z).then_some(tau)
}

/// Nearest face crossing of a unit-direction ray within the given reach.
fn first_hit(
    scene: &SceneSpec,
    origin: &Vector3<f64>,
    u: &Vector3<f64>,
    t: f64,
    exclude: Option<usize>,
    max_distance: f64,
) -> Option<OracleHit> {
    let horizontal = u.x.hypot(u.y);
    let reach = if horizontal > EPS {
        max_distance.min(MAX_HORIZONTAL_M / horizontal)
    } else {
        max_distance
    };
    scene
        .active_faces(t)
        .filter(|(i, _)| Some(*i) != exclude)
        .filter_map(|(i, f)| {
            intersect_face(f, origin, u)
                .filter(|tau| *tau <= reach)
                .map(|tau| OracleHit {
                    point: origin + u * tau,
                    face: i,
                    distance_m: tau,
                })
        })
        .min_by(|a, b| a.distance_m.total_cmp(&b.distance_m))
}

/// LOS unless the ray toward the satellite crosses a face within 250 m
/// horizontally; NLOS carries the nearest crossing.
pub fn oracle_visibility(
    scene: &SceneSpec,
    rx: &Vector3<f64>,
    dir: &SatelliteDirection,
    t: f64,
) -> OracleVisibility {
    match first_hit(scene, rx, &dir.unit_enu(), t, None, f64::INFINITY) {
        Some(h) => OracleVisibility::Nlos(h),
        None => OracleVisibility::Los,
    }
}

/// Shortest single-bounce specular path off any face, found by mirroring
/// the receiver across the face plane.
pub fn oracle_reflection(
    scene: &SceneSpec,
    rx: &Vector3<f64>,
    dir: &SatelliteDirection,
    t: f64,
) -> Option<OracleReflection> {
    let u = dir.unit_enu();
    scene
        .active_faces(t)
        .filter_map(|(i, f)| {
            let mut n = f.normal();
            let a = Vector3::new(f.start.x, f.start.y, 0.0);
            let mut d = n.dot(&(rx - a));
            if d < 0.0 {
                n = -n;
                d = -d;
            }
            let cos_inc = n.dot(&u);
            if d <= EPS || cos_inc <= EPS {
                return None;
            }
            let mirror = rx - n * (2.0 * d);
            let p = mirror + u * (d / cos_inc);
            // inside the rectangle
            let e = f.end - f.start;
            let s = (Vector2::new(p.x, p.y) - f.start).dot(&e) / e.norm_squared();
            if !(0.0..=1.0).contains(&s) || !(0.0..=f.height_m).contains(&p.z) {
                return None;
            }
            // receiver leg
            let leg = p - rx;
            let leg_len = leg.norm();
            if first_hit(scene, rx, &(leg / leg_len), t, Some(i), leg_len - 1e-6).is_some() {
                return None;
            }
            // satellite leg
            if first_hit(scene, &p, &u, t, Some(i), f64::INFINITY).is_some() {
                return None;
            }
            Some(OracleReflection {
                point: p,
                face: i,
                extra_path_m: 2.0 * d * cos_inc,
            })
        })
        .min_by(|a, b| a.extra_path_m.total_cmp(&b.extra_path_m))
}

/// Closest distance between segments `p0-p1` and `q0-q1`.
fn segment_distance(p0: &Vector3<f64>, p1: &Vector3<f64>, q0: &Vector3<f64>, q1: &Vector3<f64>) -> f64 {
    let d1 = p1 - p0;
    let d2 = q1 - q0;
    let r = p0 - q0;
    let a = d1.norm_squared();
    let e = d2.norm_squared();
    let f = d2.dot(&r);
    let (s, t) = if a <= EPS && e <= EPS {
        (0.0, 0.0)
    } else if a <= EPS {
        (0.0, (f / e).clamp(0.0, 1.0))
    } else {
        let c = d1.dot(&r);
        if e <= EPS {
            ((-c / a).clamp(0.0, 1.0), 0.0)
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            let mut s = if denom > EPS { ((b * f - c * e) / denom).clamp(0.0, 1.0) } else { 0.0 };
            let mut t = (b * s + f) / e;
            if t < 0.0 {
                t = 0.0;
                s = (-c / a).clamp(0.0, 1.0);
            } else if t > 1.0 {
                t = 1.0;
                s = ((b - c) / a).clamp(0.0, 1.0);
            }
            (s, t)
        }
    };
    ((p0 + d1 * s) - (q0 + d2 * t)).norm()
}

/// Smallest distance from the first `length_m` of the ray to any edge of
/// any active face: how far the ray stays from a visibility boundary.
pub fn edge_clearance(
    scene: &SceneSpec,
    rx: &Vector3<f64>,
    dir: &SatelliteDirection,
    t: f64,
    length_m: f64,
) -> f64 {
    let end = rx + dir.unit_enu() * length_m;
    scene
        .active_faces(t)
        .flat_map(|(_, f)| {
            let a0 = Vector3::new(f.start.x, f.start.y, 0.0);
            let b0 = Vector3::new(f.end.x, f.end.y, 0.0);
            let a1 = Vector3::new(f.start.x, f.start.y, f.height_m);
            let b1 = Vector3::new(f.end.x, f.end.y, f.height_m);
            [(a1, b1), (a0, a1), (b0, b1), (a0, b0)]
        })
        .map(|(q0, q1)| segment_distance(rx, &end, &q0, &q1))
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};

    fn scene(faces: Vec<Face>) -> SceneSpec {
        SceneSpec {
            faces,
            ..Default::default()
        }
    }

    #[test]
    fn empty_scene_is_los() {
        let s = scene(vec![]);
        let rx = Vector3::new(0.0, 0.0, 1.8);
        assert_eq!(oracle_visibility(&s, &rx, &SatelliteDirection::from_degrees(10.0, 0.0), 0.0), OracleVisibility::Los);
        assert!(oracle_reflection(&s, &rx, &SatelliteDirection::from_degrees(10.0, 0.0), 0.0).is_none());
    }

    #[test]
    fn tangent_threshold() {
        // wall top 20 m, 10 m north of a ground-level receiver
        let s = scene(vec![Face::new([-50.0, 10.0], [50.0, 10.0], 20.0)]);
        let rx = Vector3::zeros();
        let edge = (20.0_f64 / 10.0).atan().to_degrees();
        let below = oracle_visibility(&s, &rx, &SatelliteDirection::from_degrees(edge - 0.01, 0.0), 0.0);
        let above = oracle_visibility(&s, &rx, &SatelliteDirection::from_degrees(edge + 0.01, 0.0), 0.0);
        assert!(below.is_nlos());
        assert_eq!(above, OracleVisibility::Los);
    }

    #[test]
    fn hit_points_lie_on_faces() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut hits = 0;
        for _ in 0..200 {
            let faces: Vec<Face> = (0..4)
                .map(|_| {
                    Face::new(
                        [rng.random_range(-60.0..60.0), rng.random_range(-60.0..60.0)],
                        [rng.random_range(-60.0..60.0), rng.random_range(-60.0..60.0)],
                        rng.random_range(5.0..50.0),
                    )
                })
                .collect();
            let s = scene(faces);
            let rx = Vector3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), 1.8);
            let dir = SatelliteDirection::from_degrees(rng.random_range(1.0..80.0), rng.random_range(0.0..360.0));
            if let OracleVisibility::Nlos(h) = oracle_visibility(&s, &rx, &dir, 0.0) {
                hits += 1;
                let f = &s.faces[h.face];
                let n = f.normal();
                let plane = n.dot(&(h.point - Vector3::new(f.start.x, f.start.y, 0.0)));
                assert!(plane.abs() < 1e-9);
                assert!(h.point.z >= -1e-9 && h.point.z <= f.height_m + 1e-9);
            }
        }
        assert!(hits > 20);
    }

    #[test]
    fn head_on_reflection() {
        // reflecting wall 15 m west, the satellite due east behind a blocker
        let s = scene(vec![
            Face::new([-15.0, -100.0], [-15.0, 100.0], 40.0),
            Face::new([10.0, -100.0], [10.0, 100.0], 8.0),
        ]);
        let rx = Vector3::new(0.0, 0.0, 1.8);
        let dir = SatelliteDirection::from_degrees(20.0, 90.0);
        assert!(oracle_visibility(&s, &rx, &dir, 0.0).is_nlos());
        let r = oracle_reflection(&s, &rx, &dir, 0.0).unwrap();
        assert_eq!(r.face, 0);
        assert_abs_diff_eq!(r.extra_path_m, 2.0 * 15.0 * 20f64.to_radians().cos(), epsilon = 1e-9);
        assert_abs_diff_eq!(r.extra_path_m, 28.19, epsilon = 0.01);
        assert_abs_diff_eq!(r.point.x, -15.0, epsilon = 1e-9);
        // the bounce point sits on the satellite's elevation seen from rx
        let v = r.point - rx;
        assert_abs_diff_eq!(v.z / v.x.hypot(v.y), 20f64.to_radians().tan(), epsilon = 1e-9);
    }

    #[test]
    fn reflection_matches_path_lengths() {
        // oblique geometry: extra path equals the explicit path difference
        let s = scene(vec![Face::new([-12.0, -100.0], [-12.0, 100.0], 60.0)]);
        let rx = Vector3::new(0.0, 0.0, 1.8);
        let dir = SatelliteDirection::from_degrees(30.0, 60.0);
        let r = oracle_reflection(&s, &rx, &dir, 0.0).unwrap();
        let u = dir.unit_enu();
        let sat = rx + u * 2.0e7;
        let explicit = (sat - r.point).norm() + (r.point - rx).norm() - (sat - rx).norm();
        // finite satellite distance leaves a ~1e-5 m parallax term
        assert_abs_diff_eq!(r.extra_path_m, explicit, epsilon = 1e-4);
        assert_abs_diff_eq!(r.point.x, -12.0, epsilon = 1e-9);
    }

    #[test]
    fn no_reflection_from_faces_turned_away() {
        // only face is behind the satellite direction
        let s = scene(vec![Face::new([10.0, -100.0], [10.0, 100.0], 40.0)]);
        let rx = Vector3::new(0.0, 0.0, 1.8);
        assert!(oracle_reflection(&s, &rx, &SatelliteDirection::from_degrees(20.0, 90.0), 0.0).is_none());
    }

    #[test]
    fn blocked_reflection_legs() {
        // the reflected leg toward the satellite is blocked by a tall east wall
        let s = scene(vec![
            Face::new([-15.0, -100.0], [-15.0, 100.0], 40.0),
            Face::new([10.0, -100.0], [10.0, 100.0], 80.0),
        ]);
        let rx = Vector3::new(0.0, 0.0, 1.8);
        assert!(oracle_reflection(&s, &rx, &SatelliteDirection::from_degrees(20.0, 90.0), 0.0).is_none());
    }

    #[test]
    fn transient_faces() {
        let mut f = Face::new([-50.0, 10.0], [50.0, 10.0], 20.0);
        f.active_s = Some((5.0, 6.0));
        let s = scene(vec![f]);
        let rx = Vector3::new(0.0, 0.0, 1.8);
        let dir = SatelliteDirection::from_degrees(30.0, 0.0);
        assert!(oracle_visibility(&s, &rx, &dir, 5.5).is_nlos());
        assert!(!oracle_visibility(&s, &rx, &dir, 7.0).is_nlos());
    }

    #[test]
    fn clearance_distances() {
        let s = scene(vec![Face::new([-50.0, 10.0], [50.0, 10.0], 20.0)]);
        let rx = Vector3::new(0.0, 0.0, 0.0);
        // straight up: nearest edge is the top/bottom edges 10 m away
        let c = edge_clearance(&s, &rx, &SatelliteDirection::from_degrees(90.0, 0.0), 0.0, 250.0);
        assert_abs_diff_eq!(c, 10.0, epsilon = 1e-9);
        // aimed exactly at the top edge
        let el = 2f64.atan().to_degrees();
        let c = edge_clearance(&s, &rx, &SatelliteDirection::from_degrees(el, 0.0), 0.0, 250.0);
        assert!(c < 1e-9);
        assert_abs_diff_eq!(
            segment_distance(&Vector3::zeros(), &Vector3::x(), &Vector3::new(0.5, 1.0, 0.0), &Vector3::new(0.5, 1.0, 3.0)),
            1.0,
            epsilon = 1e-12
        );
    }
}
