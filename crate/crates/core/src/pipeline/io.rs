//! Dataset and result files.
//!
//! A dataset directory holds `observations.csv`, `poses.csv`,
//! `frames/frame_NNNNNN.txt` (one per pose row), and for simulated data
//! `truth.csv`, `sat_truth.csv` and `dataset.cfg`. Results are written per
//! mode as `solutions_<mode>.csv`, `verdicts_<mode>.csv` and
//! `skyplot_<mode>.csv`.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use csv::{ReaderBuilder, Trim};
use nalgebra::{Quaternion, Rotation3, UnitQuaternion, Vector3};

use super::{DatasetEpoch, EpochResult, FrameSource, LidarFrame, Mode, PipelineError, SatLabel};
use crate::frames::{ecef_to_geodetic, geodetic_to_ecef, EcefPosition, FrameTransform, GeodeticPosition};
use crate::measmodel::{Constellation, SatelliteObservation};
use crate::nlos::VerdictClass;
use crate::scenesim::{sample_pointcloud, synthesize_observations, SceneSpec, TrueClass};
use crate::solver::SolveStatus;
use crate::swm::{format_frame_text, parse_frame_text, PointCloudFrame};

pub const OBSERVATIONS_HEADER: [&str; 9] = [
    "epoch_s",
    "sat_id",
    "constellation",
    "pseudorange_m",
    "snr_dbhz",
    "sat_x_m",
    "sat_y_m",
    "sat_z_m",
    "sat_clock_bias_m",
];
pub const POSES_HEADER: [&str; 8] = ["epoch_s", "x", "y", "z", "qw", "qx", "qy", "qz"];
pub const TRUTH_HEADER: [&str; 4] = ["epoch_s", "lat_deg", "lon_deg", "h_m"];
pub const SAT_TRUTH_HEADER: [&str; 4] = ["epoch_s", "sat_id", "true_class", "true_delay_m"];
pub const SOLUTIONS_HEADER: [&str; 14] = [
    "epoch_s",
    "status",
    "x_m",
    "y_m",
    "z_m",
    "lat_deg",
    "lon_deg",
    "h_m",
    "clock_m",
    "iterations",
    "n_sats",
    "n_los",
    "n_cnlos",
    "n_fnlos",
];
pub const VERDICTS_HEADER: [&str; 10] = [
    "epoch_s",
    "sat_id",
    "elevation_deg",
    "azimuth_deg",
    "class",
    "used",
    "delay_m",
    "refl_e_m",
    "refl_n_m",
    "refl_u_m",
];
pub const SKYPLOT_HEADER: [&str; 5] = ["epoch_s", "sat_id", "elevation_deg", "azimuth_deg", "class"];

pub fn frame_path(dir: &Path, index: usize) -> PathBuf {
    dir.join("frames").join(format!("frame_{index:06}.txt"))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub(crate) fn read_text(path: &Path) -> Result<String, PipelineError> {
    fs::read_to_string(path).map_err(io_err(path))
}

fn write_text(path: &Path, text: &str) -> Result<(), PipelineError> {
    fs::write(path, text).map_err(io_err(path))
}

/// A header-checked CSV file read record by record.
struct Table {
    path: String,
    columns: Vec<usize>,
    reader: csv::Reader<File>,
}

impl Table {
    fn open(path: &Path, columns: &[&str]) -> Result<Self, PipelineError> {
        let file = File::open(path).map_err(io_err(path))?;
        let mut reader = ReaderBuilder::new().trim(Trim::All).from_reader(file);
        let shown = path.display().to_string();
        let headers = reader.headers().map_err(|e| csv_error(&shown, e))?.clone();
        let columns = columns
            .iter()
            .map(|c| {
                headers
                    .iter()
                    .position(|h| h == *c)
                    .ok_or_else(|| PipelineError::MissingColumn {
                        path: shown.clone(),
                        column: c.to_string(),
                    })
            })
            .collect::<Result<_, _>>()?;
        Ok(Self {
            path: shown,
            columns,
            reader,
        })
    }

    fn rows(mut self) -> Result<Vec<Row>, PipelineError> {
        let mut rows = Vec::new();
        for rec in self.reader.records() {
            let rec = rec.map_err(|e| csv_error(&self.path, e))?;
            let line = rec.position().map_or(0, |p| p.line());
            let fields = self
                .columns
                .iter()
                .map(|&i| rec.get(i).unwrap_or("").to_string())
                .collect();
            rows.push(Row {
                line,
                fields,
                path: self.path.clone(),
            });
        }
        Ok(rows)
    }
}

fn csv_error(path: &str, e: csv::Error) -> PipelineError {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(source) => PipelineError::Io {
            path: path.to_string(),
            source,
        },
        kind => PipelineError::Parse {
            path: path.to_string(),
            line,
            message: format!("{kind:?}"),
        },
    }
}

/// Fields of one record, in the order the columns were requested.
struct Row {
    line: u64,
    fields: Vec<String>,
    path: String,
}

impl Row {
    fn error(&self, message: String) -> PipelineError {
        PipelineError::Parse {
            path: self.path.clone(),
            line: self.line,
            message,
        }
    }

    fn get<T: FromStr>(&self, i: usize, name: &str) -> Result<T, PipelineError> {
        let raw = &self.fields[i];
        raw.parse()
            .map_err(|_| self.error(format!("invalid {name} {raw:?}")))
    }

    fn finite(&self, i: usize, name: &str) -> Result<f64, PipelineError> {
        let v: f64 = self.get(i, name)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(self.error(format!("non-finite {name}")))
        }
    }

    /// Empty field means absent.
    fn optional(&self, i: usize, name: &str) -> Result<Option<f64>, PipelineError> {
        if self.fields[i].is_empty() {
            Ok(None)
        } else {
            self.finite(i, name).map(Some)
        }
    }

    fn text(&self, i: usize) -> &str {
        &self.fields[i]
    }
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), PipelineError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let shown = path.display().to_string();
    w.write_record(header).map_err(|e| csv_error(&shown, e))?;
    for r in rows {
        w.write_record(&r).map_err(|e| csv_error(&shown, e))?;
    }
    w.flush().map_err(io_err(path))
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn opt_num(v: Option<f64>) -> String {
    v.map_or_else(String::new, num)
}

fn parse_with<T>(row: &Row, i: usize, name: &str, f: impl FnOnce(&str) -> Result<T, String>) -> Result<T, PipelineError> {
    f(row.text(i)).map_err(|e| row.error(format!("{name}: {e}")))
}

/// Observations grouped by epoch, epochs ascending.
pub fn parse_observations(path: &Path) -> Result<Vec<(f64, Vec<SatelliteObservation>)>, PipelineError> {
    let rows = Table::open(path, &OBSERVATIONS_HEADER)?.rows()?;
    let mut obs = Vec::with_capacity(rows.len());
    for r in &rows {
        obs.push(SatelliteObservation {
            epoch_s: r.finite(0, "epoch_s")?,
            sat_id: r.text(1).to_string(),
            constellation: parse_with(r, 2, "constellation", Constellation::from_str)?,
            pseudorange_m: r.finite(3, "pseudorange_m")?,
            snr_dbhz: r.finite(4, "snr_dbhz")?,
            sat_pos_ecef: EcefPosition::new(r.finite(5, "sat_x_m")?, r.finite(6, "sat_y_m")?, r.finite(7, "sat_z_m")?),
            sat_clock_bias_m: r.finite(8, "sat_clock_bias_m")?,
        });
        if r.text(1).is_empty() {
            return Err(r.error("empty sat_id".into()));
        }
    }
    obs.sort_by(|a, b| a.epoch_s.total_cmp(&b.epoch_s));
    let mut out: Vec<(f64, Vec<SatelliteObservation>)> = Vec::new();
    for o in obs {
        match out.last_mut() {
            Some((t, group)) if *t == o.epoch_s => group.push(o),
            _ => out.push((o.epoch_s, vec![o])),
        }
    }
    Ok(out)
}

pub fn write_observations(path: &Path, epochs: &[DatasetEpoch]) -> Result<(), PipelineError> {
    write_csv(
        path,
        &OBSERVATIONS_HEADER,
        epochs.iter().flat_map(|e| &e.observations).map(|o| {
            vec![
                num(o.epoch_s),
                o.sat_id.clone(),
                o.constellation.to_string(),
                num(o.pseudorange_m),
                num(o.snr_dbhz),
                num(o.sat_pos_ecef.x),
                num(o.sat_pos_ecef.y),
                num(o.sat_pos_ecef.z),
                num(o.sat_clock_bias_m),
            ]
        }),
    )
}

/// Body-to-ENU poses, timestamps strictly ascending.
pub fn parse_poses(path: &Path) -> Result<Vec<(f64, FrameTransform)>, PipelineError> {
    let rows = Table::open(path, &POSES_HEADER)?.rows()?;
    let mut out: Vec<(f64, FrameTransform)> = Vec::with_capacity(rows.len());
    for r in &rows {
        let t = r.finite(0, "epoch_s")?;
        if out.last().is_some_and(|(prev, _)| *prev >= t) {
            return Err(r.error(format!("pose time {t} is not after the previous one")));
        }
        let translation = Vector3::new(r.finite(1, "x")?, r.finite(2, "y")?, r.finite(3, "z")?);
        let q = Quaternion::new(r.finite(4, "qw")?, r.finite(5, "qx")?, r.finite(6, "qy")?, r.finite(7, "qz")?);
        if !(q.norm() > 1e-6) {
            return Err(r.error("zero quaternion".into()));
        }
        let rotation = UnitQuaternion::from_quaternion(q).to_rotation_matrix().into_inner();
        out.push((t, FrameTransform::new(rotation, translation)));
    }
    Ok(out)
}

pub fn write_poses(path: &Path, poses: &[(f64, FrameTransform)]) -> Result<(), PipelineError> {
    write_csv(
        path,
        &POSES_HEADER,
        poses.iter().map(|(t, p)| {
            let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(p.rotation));
            vec![
                num(*t),
                num(p.translation.x),
                num(p.translation.y),
                num(p.translation.z),
                num(q.w),
                num(q.i),
                num(q.j),
                num(q.k),
            ]
        }),
    )
}

pub fn parse_truth(path: &Path) -> Result<Vec<(f64, GeodeticPosition)>, PipelineError> {
    let rows = Table::open(path, &TRUTH_HEADER)?.rows()?;
    rows.iter()
        .map(|r| {
            let g = GeodeticPosition::from_degrees(r.finite(1, "lat_deg")?, r.finite(2, "lon_deg")?, r.finite(3, "h_m")?);
            if !g.is_valid() {
                return Err(r.error("latitude out of range".into()));
            }
            Ok((r.finite(0, "epoch_s")?, g))
        })
        .collect()
}

pub fn write_truth(path: &Path, rows: &[(f64, GeodeticPosition)]) -> Result<(), PipelineError> {
    write_csv(
        path,
        &TRUTH_HEADER,
        rows.iter().map(|(t, g)| {
            vec![
                num(*t),
                num(g.latitude_rad.to_degrees()),
                num(g.longitude_rad.to_degrees()),
                num(g.height_m),
            ]
        }),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct SatTruthRow {
    pub epoch_s: f64,
    pub label: SatLabel,
}

pub fn parse_sat_truth(path: &Path) -> Result<Vec<SatTruthRow>, PipelineError> {
    let rows = Table::open(path, &SAT_TRUTH_HEADER)?.rows()?;
    rows.iter()
        .map(|r| {
            Ok(SatTruthRow {
                epoch_s: r.finite(0, "epoch_s")?,
                label: SatLabel {
                    sat_id: r.text(1).to_string(),
                    class: parse_with(r, 2, "true_class", TrueClass::from_str)?,
                    delay_m: r.finite(3, "true_delay_m")?,
                    elevation_deg: None,
                },
            })
        })
        .collect()
}

pub fn write_sat_truth(path: &Path, epochs: &[DatasetEpoch]) -> Result<(), PipelineError> {
    write_csv(
        path,
        &SAT_TRUTH_HEADER,
        epochs.iter().flat_map(|e| {
            e.labels
                .iter()
                .map(|l| vec![num(e.epoch_s), l.sat_id.clone(), l.class.as_str().to_string(), num(l.delay_m)])
        }),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionRow {
    pub epoch_s: f64,
    pub status: SolveStatus,
    /// Present only for converged solutions.
    pub position_ecef: Option<EcefPosition>,
    pub clock_m: Option<f64>,
    pub iterations: usize,
    pub n_sats: usize,
    pub n_los: usize,
    pub n_cnlos: usize,
    pub n_fnlos: usize,
}

impl SolutionRow {
    pub fn from_result(r: &EpochResult) -> Self {
        let ok = r.solution.is_converged();
        Self {
            epoch_s: r.epoch_s,
            status: r.solution.status,
            position_ecef: ok.then_some(r.solution.position_ecef),
            clock_m: r.solution.clock_bias_m.values().next().copied().filter(|_| ok),
            iterations: r.solution.iterations,
            n_sats: r.n_sats,
            n_los: r.n_los,
            n_cnlos: r.n_cnlos,
            n_fnlos: r.n_fnlos,
        }
    }

    /// A receiver-reported fix with nothing else known about it.
    pub fn external(epoch_s: f64, g: &GeodeticPosition) -> Self {
        Self {
            epoch_s,
            status: SolveStatus::Converged,
            position_ecef: Some(geodetic_to_ecef(g)),
            clock_m: None,
            iterations: 0,
            n_sats: 0,
            n_los: 0,
            n_cnlos: 0,
            n_fnlos: 0,
        }
    }
}

pub fn parse_solutions(path: &Path) -> Result<Vec<SolutionRow>, PipelineError> {
    let rows = Table::open(path, &SOLUTIONS_HEADER)?.rows()?;
    rows.iter()
        .map(|r| {
            let status: SolveStatus = parse_with(r, 1, "status", SolveStatus::from_str)?;
            let xyz = [r.optional(2, "x_m")?, r.optional(3, "y_m")?, r.optional(4, "z_m")?];
            let position_ecef = match xyz {
                [Some(x), Some(y), Some(z)] => Some(EcefPosition::new(x, y, z)),
                [None, None, None] => None,
                _ => return Err(r.error("partial position".into())),
            };
            if (status == SolveStatus::Converged) != position_ecef.is_some() {
                return Err(r.error("position must be present exactly for converged epochs".into()));
            }
            Ok(SolutionRow {
                epoch_s: r.finite(0, "epoch_s")?,
                status,
                position_ecef,
                clock_m: r.optional(8, "clock_m")?,
                iterations: r.get(9, "iterations")?,
                n_sats: r.get(10, "n_sats")?,
                n_los: r.get(11, "n_los")?,
                n_cnlos: r.get(12, "n_cnlos")?,
                n_fnlos: r.get(13, "n_fnlos")?,
            })
        })
        .collect()
}

pub fn write_solutions(path: &Path, rows: &[SolutionRow]) -> Result<(), PipelineError> {
    write_csv(
        path,
        &SOLUTIONS_HEADER,
        rows.iter().map(|s| {
            let geo = s.position_ecef.and_then(|p| ecef_to_geodetic(&p).ok());
            vec![
                num(s.epoch_s),
                s.status.as_str().to_string(),
                opt_num(s.position_ecef.map(|p| p.x)),
                opt_num(s.position_ecef.map(|p| p.y)),
                opt_num(s.position_ecef.map(|p| p.z)),
                opt_num(geo.map(|g| g.latitude_rad.to_degrees())),
                opt_num(geo.map(|g| g.longitude_rad.to_degrees())),
                opt_num(geo.map(|g| g.height_m)),
                opt_num(s.clock_m),
                s.iterations.to_string(),
                s.n_sats.to_string(),
                s.n_los.to_string(),
                s.n_cnlos.to_string(),
                s.n_fnlos.to_string(),
            ]
        }),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerdictRow {
    pub epoch_s: f64,
    pub sat_id: String,
    pub elevation_deg: f64,
    pub azimuth_deg: f64,
    pub class: VerdictClass,
    pub used: bool,
    pub delay_m: Option<f64>,
    pub reflecting_point_enu: Option<Vector3<f64>>,
}

pub fn verdict_rows(results: &[EpochResult]) -> Vec<VerdictRow> {
    results
        .iter()
        .flat_map(|r| {
            r.satellites.iter().map(|s| VerdictRow {
                epoch_s: r.epoch_s,
                sat_id: s.sat_id.clone(),
                elevation_deg: s.direction.elevation_rad.to_degrees(),
                azimuth_deg: s.direction.azimuth_rad.to_degrees(),
                class: s.verdict.class(),
                used: s.used,
                delay_m: s.verdict.nlos_delay_m(),
                reflecting_point_enu: s.verdict.reflecting_point_enu(),
            })
        })
        .collect()
}

pub fn parse_verdicts(path: &Path) -> Result<Vec<VerdictRow>, PipelineError> {
    let rows = Table::open(path, &VERDICTS_HEADER)?.rows()?;
    rows.iter()
        .map(|r| {
            let refl = [r.optional(7, "refl_e_m")?, r.optional(8, "refl_n_m")?, r.optional(9, "refl_u_m")?];
            let reflecting_point_enu = match refl {
                [Some(e), Some(n), Some(u)] => Some(Vector3::new(e, n, u)),
                [None, None, None] => None,
                _ => return Err(r.error("partial reflecting point".into())),
            };
            Ok(VerdictRow {
                epoch_s: r.finite(0, "epoch_s")?,
                sat_id: r.text(1).to_string(),
                elevation_deg: r.finite(2, "elevation_deg")?,
                azimuth_deg: r.finite(3, "azimuth_deg")?,
                class: parse_with(r, 4, "class", VerdictClass::from_str)?,
                used: match r.text(5) {
                    "1" => true,
                    "0" => false,
                    other => return Err(r.error(format!("invalid used {other:?}"))),
                },
                delay_m: r.optional(6, "delay_m")?,
                reflecting_point_enu,
            })
        })
        .collect()
}

pub fn write_verdicts(path: &Path, rows: &[VerdictRow]) -> Result<(), PipelineError> {
    write_csv(
        path,
        &VERDICTS_HEADER,
        rows.iter().map(|v| {
            let p = v.reflecting_point_enu;
            vec![
                num(v.epoch_s),
                v.sat_id.clone(),
                num(v.elevation_deg),
                num(v.azimuth_deg),
                v.class.as_str().to_string(),
                if v.used { "1" } else { "0" }.to_string(),
                opt_num(v.delay_m),
                opt_num(p.map(|p| p.x)),
                opt_num(p.map(|p| p.y)),
                opt_num(p.map(|p| p.z)),
            ]
        }),
    )
}

/// (epoch, satellite, elevation°, azimuth°, class) for sky plots.
pub type SkyplotRow = (f64, String, f64, f64, VerdictClass);

pub fn parse_skyplot(path: &Path) -> Result<Vec<SkyplotRow>, PipelineError> {
    let rows = Table::open(path, &SKYPLOT_HEADER)?.rows()?;
    rows.iter()
        .map(|r| {
            Ok((
                r.finite(0, "epoch_s")?,
                r.text(1).to_string(),
                r.finite(2, "elevation_deg")?,
                r.finite(3, "azimuth_deg")?,
                parse_with(r, 4, "class", VerdictClass::from_str)?,
            ))
        })
        .collect()
}

pub fn write_skyplot(path: &Path, rows: &[VerdictRow]) -> Result<(), PipelineError> {
    write_csv(
        path,
        &SKYPLOT_HEADER,
        rows.iter().map(|v| {
            vec![
                num(v.epoch_s),
                v.sat_id.clone(),
                num(v.elevation_deg),
                num(v.azimuth_deg),
                v.class.as_str().to_string(),
            ]
        }),
    )
}

pub fn solutions_path(dir: &Path, mode: Mode) -> PathBuf {
    dir.join(format!("solutions_{mode}.csv"))
}

pub fn verdicts_path(dir: &Path, mode: Mode) -> PathBuf {
    dir.join(format!("verdicts_{mode}.csv"))
}

/// Writes the three per-mode result files.
pub fn write_results(dir: &Path, mode: Mode, results: &[EpochResult]) -> Result<(), PipelineError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let solutions: Vec<SolutionRow> = results.iter().map(SolutionRow::from_result).collect();
    write_solutions(&solutions_path(dir, mode), &solutions)?;
    let verdicts = verdict_rows(results);
    write_verdicts(&verdicts_path(dir, mode), &verdicts)?;
    write_skyplot(&dir.join(format!("skyplot_{mode}.csv")), &verdicts)
}

/// Renders a scene into a dataset directory. Returns the number of GNSS
/// epochs written.
pub fn write_dataset(dir: &Path, scene: &SceneSpec) -> Result<usize, PipelineError> {
    let frames_dir = dir.join("frames");
    fs::create_dir_all(&frames_dir).map_err(io_err(&frames_dir))?;
    let epochs = synthesize_observations(scene);
    let dataset: Vec<DatasetEpoch> = super::simulated_dataset_from(epochs.iter());
    write_observations(&dir.join("observations.csv"), &dataset)?;
    write_truth(
        &dir.join("truth.csv"),
        &epochs.iter().map(|e| (e.truth.epoch_s, e.truth.rx_geodetic)).collect::<Vec<_>>(),
    )?;
    write_sat_truth(&dir.join("sat_truth.csv"), &dataset)?;

    let mut poses = Vec::new();
    for (i, t) in scene.lidar_times().into_iter().enumerate() {
        let pose = scene.lidar_pose(t);
        let cloud = sample_pointcloud(scene, &pose, t, &scene.lidar);
        write_text(&frame_path(dir, i), &format_frame_text(&cloud.points))?;
        poses.push((t, pose));
    }
    write_poses(&dir.join("poses.csv"), &poses)?;

    let mut cfg = String::from("# receiver settings of the simulated dataset\n");
    let list = |v: &[f64; 4]| v.iter().map(|x| num(*x)).collect::<Vec<_>>().join(" ");
    cfg.push_str(&format!("atmosphere = {}\n", scene.atmosphere));
    cfg.push_str(&format!("klobuchar_alpha = {}\n", list(&scene.klobuchar_alpha)));
    cfg.push_str(&format!("klobuchar_beta = {}\n", list(&scene.klobuchar_beta)));
    cfg.push_str(&format!("sensor_height_m = {}\n", num(scene.sensor_height_m)));
    cfg.push_str(&format!("seed = {}\n", scene.seed));
    write_text(&dir.join("dataset.cfg"), &cfg)?;
    Ok(dataset.len())
}

/// Frames read lazily from a dataset directory.
pub struct DirectoryFrames {
    dir: PathBuf,
    times: Vec<f64>,
    poses: Vec<FrameTransform>,
}

impl DirectoryFrames {
    pub fn open(dir: &Path) -> Result<Self, PipelineError> {
        let (times, poses) = parse_poses(&dir.join("poses.csv"))?.into_iter().unzip();
        Ok(Self {
            dir: dir.to_path_buf(),
            times,
            poses,
        })
    }
}

impl FrameSource for DirectoryFrames {
    fn times(&self) -> &[f64] {
        &self.times
    }

    fn load(&self, index: usize) -> Result<LidarFrame, PipelineError> {
        let path = frame_path(&self.dir, index);
        let text = read_text(&path)?;
        let points = parse_frame_text(&text).map_err(|(line, message)| PipelineError::Parse {
            path: path.display().to_string(),
            line: line as u64,
            message,
        })?;
        let cloud = PointCloudFrame::new(self.times[index], points).map_err(|e| PipelineError::Parse {
            path: path.display().to_string(),
            line: 0,
            message: e.to_string(),
        })?;
        Ok(LidarFrame {
            cloud,
            pose: self.poses[index],
        })
    }
}

/// Observations joined with truth files when present.
pub fn load_dataset(dir: &Path) -> Result<Vec<DatasetEpoch>, PipelineError> {
    let observations = parse_observations(&dir.join("observations.csv"))?;
    let truth_path = dir.join("truth.csv");
    let truth: BTreeMap<u64, EcefPosition> = if truth_path.exists() {
        parse_truth(&truth_path)?
            .into_iter()
            .map(|(t, g)| (t.to_bits(), geodetic_to_ecef(&g)))
            .collect()
    } else {
        BTreeMap::new()
    };
    let labels_path = dir.join("sat_truth.csv");
    let mut labels: BTreeMap<u64, Vec<SatLabel>> = BTreeMap::new();
    if labels_path.exists() {
        for row in parse_sat_truth(&labels_path)? {
            labels.entry(row.epoch_s.to_bits()).or_default().push(row.label);
        }
    }
    Ok(observations
        .into_iter()
        .map(|(t, obs)| DatasetEpoch {
            epoch_s: t,
            observations: obs,
            truth_ecef: truth.get(&t.to_bits()).copied(),
            labels: labels.remove(&t.to_bits()).unwrap_or_default(),
        })
        .collect())
}

pub(crate) fn write_report(path: &Path, text: &str) -> Result<(), PipelineError> {
    let mut f = File::create(path).map_err(io_err(path))?;
    f.write_all(text.as_bytes()).map_err(io_err(path))
}
