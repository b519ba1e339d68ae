//! Per-epoch orchestration: window map → visibility → correction and
//! weighting → WLS, plus dataset I/O, metrics and the command line.

mod cli;
mod config;
mod io;
mod metrics;

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use nalgebra::Vector3;
use rayon::prelude::*;
use thiserror::Error;

pub use cli::cli_main;
pub use config::{ConfigError, Mode, RunConfig, CONFIG_KEYS};
pub use io::{
    load_dataset, parse_observations, parse_poses, parse_sat_truth, parse_skyplot, parse_solutions, parse_truth,
    parse_verdicts, solutions_path, verdict_rows, verdicts_path, write_dataset, write_observations, write_poses,
    write_results, write_sat_truth, write_solutions, write_truth, write_verdicts, DirectoryFrames, SatTruthRow,
    SkyplotRow, SolutionRow, VerdictRow,
};
pub use metrics::{
    compute_detection_report, compute_position_metrics, detection_table, position_table, sweep_table,
    DetectionBin, DetectionReport, DetectionSample, MetricsError, PositionMetrics,
};

use crate::frames::{
    ecef_to_enu, ecef_to_geodetic, satellite_direction, EcefPosition, FrameTransform, GeodeticPosition,
    SatelliteDirection,
};
use crate::measmodel::{
    apply_corrections, ionospheric_delay, observation_weight, tropospheric_delay, AtmosphereContext,
    SatelliteObservation,
};
use crate::nlos::{classify_and_correct, classify_visibility, VerdictClass, VisibilityVerdict};
use crate::scenesim::{sample_pointcloud, synthesize_observations, SceneError, SceneSpec, SimulatedEpoch, TrueClass};
use crate::solver::{wls_solve, ReceiverSolution, SolveStatus, SolverConfig, WeightedObservation};
use crate::swm::{build_swm, PointCloudFrame, RegistrationPose, SlidingWindowMap, SwmConfig, SwmError};

/// Frames whose timestamp is within this of an epoch belong to it.
const TIME_TOLERANCE_S: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },
    #[error("{path}: missing column {column:?}")]
    MissingColumn { path: String, column: String },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("map: {0}")]
    Map(#[from] SwmError),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// A LiDAR sweep in its body frame with the body-to-ENU pose.
#[derive(Debug, Clone, PartialEq)]
pub struct LidarFrame {
    pub cloud: PointCloudFrame,
    pub pose: FrameTransform,
}

pub trait FrameSource {
    /// Frame timestamps, ascending.
    fn times(&self) -> &[f64];
    fn load(&self, index: usize) -> Result<LidarFrame, PipelineError>;
}

/// Frames rendered on demand from a scene.
pub struct SimulatedFrames<'a> {
    scene: &'a SceneSpec,
    times: Vec<f64>,
}

impl<'a> SimulatedFrames<'a> {
    pub fn new(scene: &'a SceneSpec) -> Self {
        Self {
            scene,
            times: scene.lidar_times(),
        }
    }
}

impl FrameSource for SimulatedFrames<'_> {
    fn times(&self) -> &[f64] {
        &self.times
    }

    fn load(&self, index: usize) -> Result<LidarFrame, PipelineError> {
        let t = self.times[index];
        let pose = self.scene.lidar_pose(t);
        Ok(LidarFrame {
            cloud: sample_pointcloud(self.scene, &pose, t, &self.scene.lidar),
            pose,
        })
    }
}

/// Keeps the frames of the current window loaded while epochs advance.
pub struct FrameWindow<'a> {
    source: &'a dyn FrameSource,
    cache: BTreeMap<usize, Arc<LidarFrame>>,
}

impl<'a> FrameWindow<'a> {
    pub fn new(source: &'a dyn FrameSource) -> Self {
        Self {
            source,
            cache: BTreeMap::new(),
        }
    }

    /// The last `n` frames at or before `t`, oldest first.
    pub fn frames_until(&mut self, t: f64, n: usize) -> Result<Vec<Arc<LidarFrame>>, PipelineError> {
        let end = self.source.times().partition_point(|x| *x <= t + TIME_TOLERANCE_S);
        let start = end.saturating_sub(n);
        self.cache = self.cache.split_off(&start);
        let mut out = Vec::with_capacity(end - start);
        for i in start..end {
            let frame = match self.cache.get(&i) {
                Some(f) => f.clone(),
                None => {
                    let f = Arc::new(self.source.load(i)?);
                    self.cache.insert(i, f.clone());
                    f
                }
            };
            out.push(frame);
        }
        Ok(out)
    }
}

/// Registers the frames into the newest one and rotates into ENU with the
/// newest pose's orientation.
pub fn build_epoch_map(
    frames: &[Arc<LidarFrame>],
    cfg: &RunConfig,
    anchor: GeodeticPosition,
) -> Result<SlidingWindowMap, PipelineError> {
    let Some(newest) = frames.last() else {
        return Ok(SlidingWindowMap::empty());
    };
    let to_newest = newest.pose.inverse();
    let window: Vec<(&PointCloudFrame, RegistrationPose)> = frames
        .iter()
        .map(|f| {
            (
                &f.cloud,
                RegistrationPose {
                    timestamp_s: f.cloud.timestamp_s,
                    transform: to_newest.compose(&f.pose),
                },
            )
        })
        .collect();
    let ahrs = FrameTransform::new(newest.pose.rotation, Vector3::zeros());
    let swm = SwmConfig {
        n_sw: cfg.swm.n_sw.max(frames.len()),
        ..cfg.swm
    };
    Ok(build_swm(&window, &ahrs, &cfg.calibration, &swm, anchor)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SatelliteState {
    pub observation: SatelliteObservation,
    pub direction: SatelliteDirection,
    pub verdict: VisibilityVerdict,
}

/// Everything known about an epoch before a mode is applied.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochDetection {
    pub epoch_s: f64,
    /// Unweighted, uncorrected solution used for directions and atmosphere.
    pub rough: ReceiverSolution,
    pub rough_geodetic: Option<GeodeticPosition>,
    /// Satellites above the elevation mask.
    pub satellites: Vec<SatelliteState>,
}

/// Rough fix, directions and the elevation mask; verdicts start as LOS.
pub fn prepare_epoch(cfg: &RunConfig, epoch_s: f64, observations: &[SatelliteObservation]) -> EpochDetection {
    let usable: Vec<WeightedObservation> = observations
        .iter()
        .filter(|o| o.validate().is_ok())
        .map(|o| WeightedObservation {
            observation: o.clone(),
            corrected_pseudorange_m: o.pseudorange_m + o.sat_clock_bias_m,
            weight: 1.0,
        })
        .collect();
    let rough = wls_solve(&usable, &cfg.solver);
    let rough_geodetic = rough
        .is_converged()
        .then(|| ecef_to_geodetic(&rough.position_ecef).ok())
        .flatten();
    let mask = cfg.elevation_mask_deg.to_radians();
    let satellites = match rough_geodetic {
        None => Vec::new(),
        Some(_) => usable
            .into_iter()
            .filter_map(|w| {
                let dir = satellite_direction(&w.observation.sat_pos_ecef, &rough.position_ecef).ok()?;
                (dir.elevation_rad >= mask && dir.elevation_rad > 0.0).then(|| SatelliteState {
                    verdict: VisibilityVerdict::los(w.observation.sat_id.clone()),
                    observation: w.observation,
                    direction: dir,
                })
            })
            .collect(),
    };
    EpochDetection {
        epoch_s,
        rough,
        rough_geodetic,
        satellites,
    }
}

/// Runs visibility classification and reflector search for every satellite.
pub fn classify_epoch(det: &mut EpochDetection, cfg: &RunConfig, map: &SlidingWindowMap) {
    det.satellites.par_iter_mut().for_each(|s| {
        s.verdict = classify_and_correct(map, &s.observation.sat_id, &s.direction, &cfg.detection)
            .unwrap_or_else(|_| VisibilityVerdict::fnlos(s.observation.sat_id.clone()));
    });
}

#[derive(Debug, Clone, PartialEq)]
pub struct SatelliteRecord {
    pub sat_id: String,
    pub direction: SatelliteDirection,
    /// Verdict as the mode treated it.
    pub verdict: VisibilityVerdict,
    pub used: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochResult {
    pub epoch_s: f64,
    pub mode: Mode,
    pub solution: ReceiverSolution,
    pub satellites: Vec<SatelliteRecord>,
    pub n_sats: usize,
    pub n_los: usize,
    pub n_cnlos: usize,
    pub n_fnlos: usize,
    pub error_2d_m: Option<f64>,
}

/// Horizontal error in the ENU frame at the truth position.
pub fn horizontal_error(solution: &EcefPosition, truth: &EcefPosition) -> Option<f64> {
    let g = ecef_to_geodetic(truth).ok()?;
    let d = ecef_to_enu(solution, &g);
    Some(d.east_m.hypot(d.north_m))
}

fn mode_verdict(mode: Mode, v: &VisibilityVerdict) -> Option<VisibilityVerdict> {
    match mode {
        Mode::Wls | Mode::Ublox => Some(VisibilityVerdict::los(v.sat_id())),
        Mode::WlsNe => (!v.class().is_nlos()).then(|| v.clone()),
        Mode::RWls => Some(v.without_correction()),
        Mode::CrWls => Some(v.clone()),
    }
}

/// Applies a mode's treatment of the verdicts and solves.
pub fn solve_epoch(cfg: &RunConfig, mode: Mode, det: &EpochDetection, truth: Option<&EcefPosition>) -> EpochResult {
    let atmosphere = det.rough_geodetic.filter(|_| cfg.atmosphere).map(|g| AtmosphereContext {
        klobuchar_alpha: cfg.klobuchar_alpha,
        klobuchar_beta: cfg.klobuchar_beta,
        rx_geodetic: g,
        epoch_s: det.epoch_s,
    });
    let mut records = Vec::with_capacity(det.satellites.len());
    let mut weighted = Vec::with_capacity(det.satellites.len());
    for s in &det.satellites {
        let effective = mode_verdict(mode, &s.verdict);
        let shown = effective.clone().unwrap_or_else(|| s.verdict.clone());
        let mut used = false;
        if let Some(v) = effective {
            let (iono, tropo) = atmosphere.as_ref().map_or((0.0, 0.0), |ctx| {
                (
                    ionospheric_delay(ctx, s.direction.elevation_rad, s.direction.azimuth_rad),
                    tropospheric_delay(ctx, s.direction.elevation_rad).unwrap_or(0.0),
                )
            });
            if let Ok(w) = observation_weight(v.class(), s.direction.elevation_rad, s.observation.snr_dbhz, &cfg.weights)
            {
                weighted.push(WeightedObservation {
                    observation: s.observation.clone(),
                    corrected_pseudorange_m: apply_corrections(&s.observation, &v, tropo, iono),
                    weight: w,
                });
                used = true;
            }
        }
        records.push(SatelliteRecord {
            sat_id: s.observation.sat_id.clone(),
            direction: s.direction,
            verdict: shown,
            used,
        });
    }
    let solution = if det.rough.is_converged() {
        wls_solve(&weighted, &cfg.solver)
    } else {
        wls_solve(&[], &cfg.solver)
    };
    let count = |c: VerdictClass| records.iter().filter(|r| r.verdict.class() == c).count();
    let error_2d_m = truth
        .filter(|_| solution.status == SolveStatus::Converged)
        .and_then(|t| horizontal_error(&solution.position_ecef, t));
    EpochResult {
        epoch_s: det.epoch_s,
        mode,
        n_sats: records.len(),
        n_los: count(VerdictClass::Los),
        n_cnlos: count(VerdictClass::Cnlos),
        n_fnlos: count(VerdictClass::Fnlos),
        solution,
        satellites: records,
        error_2d_m,
    }
}

/// One epoch end to end with the configured mode.
pub fn run_epoch(
    cfg: &RunConfig,
    map: &SlidingWindowMap,
    epoch_s: f64,
    observations: &[SatelliteObservation],
    truth: Option<&EcefPosition>,
) -> EpochResult {
    let mut det = prepare_epoch(cfg, epoch_s, observations);
    if cfg.mode.uses_detection() {
        classify_epoch(&mut det, cfg, map);
    }
    solve_epoch(cfg, cfg.mode, &det, truth)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SatLabel {
    pub sat_id: String,
    pub class: TrueClass,
    pub delay_m: f64,
    /// True elevation when known; otherwise the computed one is used.
    pub elevation_deg: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetEpoch {
    pub epoch_s: f64,
    pub observations: Vec<SatelliteObservation>,
    pub truth_ecef: Option<EcefPosition>,
    pub labels: Vec<SatLabel>,
}

/// Observations and truth of every GNSS epoch of a scene.
pub fn simulated_dataset(scene: &SceneSpec) -> Vec<DatasetEpoch> {
    simulated_dataset_from(synthesize_observations(scene).iter())
}

pub fn simulated_dataset_from<'a>(epochs: impl Iterator<Item = &'a SimulatedEpoch>) -> Vec<DatasetEpoch> {
    epochs
        .map(|e| DatasetEpoch {
            epoch_s: e.truth.epoch_s,
            observations: e.observations.clone(),
            truth_ecef: Some(e.truth.rx_ecef),
            labels: e
                .truth
                .satellites
                .iter()
                .filter(|s| s.observed)
                .map(|s| SatLabel {
                    sat_id: s.sat_id.clone(),
                    class: s.class,
                    delay_m: s.extra_path_m,
                    elevation_deg: Some(s.direction.elevation_rad.to_degrees()),
                })
                .collect(),
        })
        .collect()
}

/// Detection and solving for several modes sharing one detection pass.
pub fn run_modes(
    cfg: &RunConfig,
    source: &dyn FrameSource,
    epochs: &[DatasetEpoch],
    modes: &[Mode],
) -> Result<BTreeMap<Mode, Vec<EpochResult>>, PipelineError> {
    cfg.validate()?;
    let detect = modes.iter().any(|m| m.uses_detection());
    let mut window = FrameWindow::new(source);
    let mut out: BTreeMap<Mode, Vec<EpochResult>> = modes.iter().map(|m| (*m, Vec::new())).collect();
    for e in epochs {
        let mut det = prepare_epoch(cfg, e.epoch_s, &e.observations);
        if detect {
            if let Some(anchor) = det.rough_geodetic {
                let frames = window.frames_until(e.epoch_s, cfg.swm.n_sw)?;
                let map = build_epoch_map(&frames, cfg, anchor)?;
                classify_epoch(&mut det, cfg, &map);
            }
        }
        for (mode, results) in out.iter_mut() {
            results.push(solve_epoch(cfg, *mode, &det, e.truth_ecef.as_ref()));
        }
    }
    Ok(out)
}

/// Pairs verdicts with truth labels for the detection report.
pub fn detection_samples(results: &[EpochResult], epochs: &[DatasetEpoch]) -> Vec<DetectionSample> {
    let by_epoch: HashMap<u64, &DatasetEpoch> = epochs.iter().map(|e| (e.epoch_s.to_bits(), e)).collect();
    let mut out = Vec::new();
    for r in results {
        let Some(e) = by_epoch.get(&r.epoch_s.to_bits()) else {
            continue;
        };
        for s in &r.satellites {
            if let Some(l) = e.labels.iter().find(|l| l.sat_id == s.sat_id) {
                out.push(DetectionSample {
                    elevation_deg: l.elevation_deg.unwrap_or(s.direction.elevation_rad.to_degrees()),
                    true_nlos: l.class == TrueClass::Nlos,
                    detected_nlos: s.verdict.class().is_nlos(),
                });
            }
        }
    }
    out
}

/// Visibility classification only, repeated for each window size.
pub fn detection_sweep(
    cfg: &RunConfig,
    source: &dyn FrameSource,
    epochs: &[DatasetEpoch],
    window_sizes: &[usize],
) -> Result<Vec<(usize, DetectionReport)>, PipelineError> {
    cfg.validate()?;
    let longest = window_sizes.iter().copied().max().unwrap_or(0);
    let mut window = FrameWindow::new(source);
    let mut samples: Vec<Vec<DetectionSample>> = vec![Vec::new(); window_sizes.len()];
    for e in epochs {
        let det = prepare_epoch(cfg, e.epoch_s, &e.observations);
        let Some(anchor) = det.rough_geodetic else {
            continue;
        };
        let frames = window.frames_until(e.epoch_s, longest)?;
        for (k, &n) in window_sizes.iter().enumerate() {
            let tail = &frames[frames.len().saturating_sub(n)..];
            let map = build_epoch_map(tail, cfg, anchor)?;
            let origin = map.lidar_center();
            for s in &det.satellites {
                let Some(l) = e.labels.iter().find(|l| l.sat_id == s.observation.sat_id) else {
                    continue;
                };
                samples[k].push(DetectionSample {
                    elevation_deg: l.elevation_deg.unwrap_or(s.direction.elevation_rad.to_degrees()),
                    true_nlos: l.class == TrueClass::Nlos,
                    detected_nlos: classify_visibility(&map, &s.direction, &cfg.detection, &origin).is_nlos(),
                });
            }
        }
    }
    window_sizes
        .iter()
        .zip(samples)
        .map(|(n, s)| Ok((*n, compute_detection_report(&s)?)))
        .collect()
}

pub fn position_metrics_for(results: &[EpochResult]) -> Result<PositionMetrics, MetricsError> {
    let errors: Vec<Option<f64>> = results.iter().map(|r| r.error_2d_m).collect();
    compute_position_metrics(&errors)
}

/// Solver settings used for every mode; exposed for tests.
pub fn solver_config(cfg: &RunConfig) -> SolverConfig {
    cfg.solver
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::enu_to_ecef;
    use crate::scenesim::{Face, SatelliteTrack, Waypoint};
    use crate::measmodel::Constellation;

    fn track(id: &str, el: f64, az: f64) -> SatelliteTrack {
        SatelliteTrack {
            sat_id: id.into(),
            constellation: Constellation::Gps,
            elevation_deg: el,
            azimuth_deg: az,
            elevation_rate_dps: 0.0,
            azimuth_rate_dps: 0.0,
        }
    }

    fn base_scene() -> SceneSpec {
        SceneSpec {
            satellites: vec![
                track("G01", 80.0, 0.0),
                track("G02", 50.0, 20.0),
                track("G03", 35.0, 90.0),
                track("G04", 45.0, 190.0),
                track("G05", 60.0, 260.0),
                track("G06", 55.0, 320.0),
                track("G07", 70.0, 140.0),
            ],
            trajectory: vec![
                Waypoint {
                    time_s: 0.0,
                    east_m: 0.0,
                    north_m: 0.0,
                    heading_deg: None,
                },
                Waypoint {
                    time_s: 4.0,
                    east_m: 0.0,
                    north_m: 8.0,
                    heading_deg: None,
                },
            ],
            gnss_start_s: 3.0,
            // wide enough to see the walls beside the receiver up to the
            // heights the satellite rays cross them
            lidar: crate::scenesim::LidarModel {
                vertical_fov_deg: [-20.0, 60.0],
                ground_returns: false,
                n_scan_rings: 40,
                horizontal_resolution_deg: 0.5,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    /// East wall blocks G03 (35° east); tall west wall reflects it.
    fn canyon_scene() -> SceneSpec {
        SceneSpec {
            faces: [
                Face::box_faces([8.0, -100.0], [20.0, 100.0], 12.0),
                Face::box_faces([-20.0, -100.0], [-8.0, 100.0], 25.0),
            ]
            .concat(),
            ..base_scene()
        }
    }

    #[test]
    fn open_sky_modes_agree() {
        let scene = base_scene();
        let data = simulated_dataset(&scene);
        let source = SimulatedFrames::new(&scene);
        let cfg = RunConfig::default();
        let runs = run_modes(&cfg, &source, &data, &Mode::SOLVED).unwrap();
        let wls = &runs[&Mode::Wls];
        assert_eq!(wls.len(), 2);
        for m in Mode::SOLVED {
            for (a, b) in runs[&m].iter().zip(wls) {
                assert!(a.solution.is_converged());
                assert!(a.solution.position_ecef.distance(&b.solution.position_ecef) < 1e-9);
                assert!(a.error_2d_m.unwrap() < 1e-6);
            }
        }
    }

    #[test]
    fn canyon_correction_is_exact_without_noise() {
        let scene = canyon_scene();
        let data = simulated_dataset(&scene);
        let e = &data[0];
        let g03 = e.labels.iter().find(|l| l.sat_id == "G03").unwrap();
        assert_eq!(g03.class, TrueClass::Nlos);
        let source = SimulatedFrames::new(&scene);
        let cfg = RunConfig::default();
        let runs = run_modes(&cfg, &source, &data, &Mode::SOLVED).unwrap();
        let cr = &runs[&Mode::CrWls][0];
        let wls = &runs[&Mode::Wls][0];
        let rec = cr.satellites.iter().find(|s| s.sat_id == "G03").unwrap();
        assert_eq!(rec.verdict.class(), VerdictClass::Cnlos);
        let delay = rec.verdict.nlos_delay_m().unwrap();
        // head-on wall: the map-derived delay is within millimetres
        assert!((delay - g03.delay_m).abs() < 0.01, "{delay} vs {}", g03.delay_m);
        assert!(cr.error_2d_m.unwrap() < 1e-3, "{:?}", cr.error_2d_m);
        assert!(wls.error_2d_m.unwrap() > 1.0);
        assert!(runs[&Mode::RWls][0].error_2d_m.unwrap() < wls.error_2d_m.unwrap());
        assert_eq!(cr.n_sats, cr.n_los + cr.n_cnlos + cr.n_fnlos);
    }

    #[test]
    fn exclusion_can_leave_too_few() {
        // four satellites, one reflected: excluding it leaves three
        let mut scene = canyon_scene();
        scene.satellites = vec![
            track("G01", 80.0, 0.0),
            track("G02", 50.0, 20.0),
            track("G03", 35.0, 90.0),
            track("G04", 45.0, 190.0),
        ];
        let data = simulated_dataset(&scene);
        assert_eq!(data[0].observations.len(), 4);
        let source = SimulatedFrames::new(&scene);
        let runs = run_modes(&RunConfig::default(), &source, &data, &Mode::SOLVED).unwrap();
        assert_eq!(runs[&Mode::WlsNe][0].solution.status, SolveStatus::Unavailable);
        for m in [Mode::Wls, Mode::RWls, Mode::CrWls] {
            assert!(runs[&m][0].solution.is_converged(), "{m}");
        }
    }

    #[test]
    fn empty_epoch_is_unavailable() {
        let cfg = RunConfig::default();
        let r = run_epoch(&cfg, &SlidingWindowMap::empty(), 0.0, &[], None);
        assert_eq!(r.solution.status, SolveStatus::Unavailable);
        assert_eq!(r.n_sats, 0);
        assert!(r.error_2d_m.is_none());
    }

    #[test]
    fn window_cache_slides() {
        let scene = base_scene();
        let source = SimulatedFrames::new(&scene);
        let mut w = FrameWindow::new(&source);
        let a = w.frames_until(2.0, 5).unwrap();
        assert_eq!(a.len(), 5);
        assert!((a[4].cloud.timestamp_s - 2.0).abs() < 1e-9);
        assert!((a[0].cloud.timestamp_s - 1.6).abs() < 1e-9);
        let b = w.frames_until(3.0, 5).unwrap();
        assert!((b[0].cloud.timestamp_s - 2.6).abs() < 1e-9);
        assert_eq!(w.cache.len(), 5);
        assert_eq!(w.frames_until(0.0, 5).unwrap().len(), 1);
    }

    #[test]
    fn epoch_map_is_centered_on_newest_frame() {
        let scene = canyon_scene();
        let source = SimulatedFrames::new(&scene);
        let mut w = FrameWindow::new(&source);
        let frames = w.frames_until(3.0, 20).unwrap();
        let map = build_epoch_map(&frames, &RunConfig::default(), scene.anchor).unwrap();
        assert!(map.lidar_center().norm() < 1e-12);
        // east wall face is 8 m east of the track
        let (rx, _) = scene.receiver_state(3.0);
        let east: Vec<_> = map.points().filter(|p| p.x > 0.0).collect();
        assert!(!east.is_empty());
        for p in east {
            assert!((p.x + rx.east_m - 8.0).abs() < 1e-6);
        }
        let _ = enu_to_ecef;
    }

    #[test]
    fn horizontal_error_ignores_height() {
        let g = GeodeticPosition::from_degrees(22.3, 114.2, 10.0);
        let truth = crate::frames::geodetic_to_ecef(&g);
        let off = enu_to_ecef(&crate::frames::EnuPosition::new(3.0, 4.0, 12.0), &g);
        assert!((horizontal_error(&off, &truth).unwrap() - 5.0).abs() < 1e-6);
    }
}
