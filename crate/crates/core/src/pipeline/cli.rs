//! `simulate`, `run`, `eval` and `sweep` subcommands.

use std::collections::{BTreeMap, HashMap};
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Arg, ArgAction, ArgMatches, Command};

use super::io::{
    frame_path, load_dataset, parse_sat_truth, parse_solutions, parse_truth, parse_verdicts, read_text,
    solutions_path, verdicts_path, write_dataset, write_report, write_results, write_solutions, DirectoryFrames,
    SolutionRow,
};
use super::{
    compute_detection_report, compute_position_metrics, detection_sweep, detection_table, horizontal_error,
    position_table, run_modes, sweep_table, ConfigError, DetectionReport, DetectionSample, Mode, PipelineError,
    RunConfig, CONFIG_KEYS,
};
use super::FrameSource;
use crate::frames::geodetic_to_ecef;
use crate::scenesim::{SceneError, SceneSpec, TrueClass};
use crate::solver::SolveStatus;

const EXIT_USAGE: i32 = 1;
const EXIT_IO: i32 = 2;
const EXIT_PARSE: i32 = 3;
const EXIT_CONFIG: i32 = 4;

fn exit_code(e: &PipelineError) -> i32 {
    match e {
        PipelineError::Io { .. } => EXIT_IO,
        PipelineError::Parse { .. } | PipelineError::MissingColumn { .. } | PipelineError::Map(_) => EXIT_PARSE,
        PipelineError::Config(ConfigError::Parse(_)) => EXIT_PARSE,
        PipelineError::Config(ConfigError::Invalid(_)) => EXIT_CONFIG,
        PipelineError::Scene(SceneError::Io { .. }) => EXIT_IO,
        PipelineError::Scene(SceneError::Parse(_)) => EXIT_PARSE,
        PipelineError::Scene(SceneError::Invalid(_)) => EXIT_CONFIG,
        PipelineError::Metrics(_) => EXIT_CONFIG,
    }
}

fn dir_arg(name: &'static str, help: &'static str) -> Arg {
    Arg::new(name)
        .long(name)
        .value_name("DIR")
        .value_parser(clap::value_parser!(PathBuf))
        .help(help)
}

fn with_config_flags(cmd: Command) -> Command {
    let cmd = cmd.arg(
        Arg::new("config")
            .long("config")
            .value_name("FILE")
            .value_parser(clap::value_parser!(PathBuf))
            .help("key = value file applied over the dataset settings"),
    );
    CONFIG_KEYS.iter().fold(cmd, |c, (key, help)| {
        c.arg(
            Arg::new(*key)
                .long(*key)
                .value_name("VALUE")
                .help(*help)
                .help_heading("Settings"),
        )
    })
}

fn command() -> Command {
    Command::new("swm-gnss")
        .about("LiDAR sliding-window-map aided GNSS NLOS detection and positioning")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .subcommand(
            Command::new("simulate")
                .about("Render a scene file into a dataset directory")
                .arg(
                    Arg::new("scene")
                        .long("scene")
                        .value_name("FILE")
                        .required(true)
                        .value_parser(clap::value_parser!(PathBuf)),
                )
                .arg(dir_arg("out", "dataset directory to create").required(true)),
        )
        .subcommand(with_config_flags(
            Command::new("run")
                .about("Position every epoch of a dataset")
                .arg(dir_arg("data", "dataset directory").required(true))
                .arg(dir_arg("results", "output directory (defaults to the dataset)"))
                .arg(
                    Arg::new("all-modes")
                        .long("all-modes")
                        .action(ArgAction::SetTrue)
                        .help("run wls, wls_ne, r_wls and cr_wls over one detection pass"),
                )
                .arg(
                    Arg::new("ublox")
                        .long("ublox")
                        .value_name("FILE")
                        .value_parser(clap::value_parser!(PathBuf))
                        .help("receiver solutions (epoch_s,lat_deg,lon_deg,h_m) to tabulate as u-blox"),
                ),
        ))
        .subcommand(
            Command::new("eval")
                .about("Position and detection metrics of the results against truth")
                .arg(dir_arg("data", "dataset directory").required(true))
                .arg(dir_arg("results", "results directory (defaults to the dataset)")),
        )
        .subcommand(with_config_flags(
            Command::new("sweep")
                .about("Detection accuracy for several window sizes")
                .arg(dir_arg("data", "dataset directory").required(true))
                .arg(dir_arg("results", "output directory (defaults to the dataset)")),
        ))
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    0
                }
                _ => {
                    eprint!("{}", e.render());
                    EXIT_USAGE
                }
            };
        }
    };
    let result = match matches.subcommand() {
        Some(("simulate", m)) => simulate(m),
        Some(("run", m)) => run(m),
        Some(("eval", m)) => eval(m),
        Some(("sweep", m)) => sweep(m),
        _ => unreachable!("subcommand is required"),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn path<'a>(m: &'a ArgMatches, name: &str) -> &'a Path {
    m.get_one::<PathBuf>(name).expect("required argument")
}

fn results_dir(m: &ArgMatches) -> PathBuf {
    m.get_one::<PathBuf>("results")
        .cloned()
        .unwrap_or_else(|| path(m, "data").to_path_buf())
}

/// Defaults, then `dataset.cfg`, then `--config`, then `--key value` flags.
fn load_config(m: &ArgMatches, data: &Path) -> Result<RunConfig, PipelineError> {
    let mut cfg = RunConfig::default();
    let dataset_cfg = data.join("dataset.cfg");
    if dataset_cfg.exists() {
        apply_file(&mut cfg, &dataset_cfg)?;
    }
    if let Some(p) = m.get_one::<PathBuf>("config") {
        apply_file(&mut cfg, p)?;
    }
    for (key, _) in CONFIG_KEYS {
        if let Some(v) = m.get_one::<String>(key) {
            cfg.set(key, v)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn apply_file(cfg: &mut RunConfig, p: &Path) -> Result<(), PipelineError> {
    cfg.apply_text(&read_text(p)?).map_err(|e| match e {
        ConfigError::Parse(k) => PipelineError::Parse {
            path: p.display().to_string(),
            line: k.line as u64,
            message: k.message,
        },
        other => other.into(),
    })
}

fn simulate(m: &ArgMatches) -> Result<(), PipelineError> {
    let scene = SceneSpec::from_file(path(m, "scene"))?;
    let out = path(m, "out");
    let n = write_dataset(out, &scene)?;
    println!("simulate: {n} epochs, {} frames -> {}", scene.lidar_times().len(), out.display());
    Ok(())
}

fn run(m: &ArgMatches) -> Result<(), PipelineError> {
    let data = path(m, "data");
    let out = results_dir(m);
    let cfg = load_config(m, data)?;
    let ublox = m.get_one::<PathBuf>("ublox");
    if cfg.mode == Mode::Ublox && ublox.is_none() && !m.get_flag("all-modes") {
        return Err(ConfigError::Invalid("mode ublox needs --ublox <FILE> with receiver solutions".into()).into());
    }
    std::fs::create_dir_all(&out).map_err(|source| PipelineError::Io {
        path: out.display().to_string(),
        source,
    })?;
    if let Some(p) = ublox {
        let rows: Vec<SolutionRow> = parse_truth(p)?
            .iter()
            .map(|(t, g)| SolutionRow::external(*t, g))
            .collect();
        write_solutions(&solutions_path(&out, Mode::Ublox), &rows)?;
        println!("run: {} u-blox epochs", rows.len());
    }
    let modes: Vec<Mode> = if m.get_flag("all-modes") {
        Mode::SOLVED.to_vec()
    } else if cfg.mode == Mode::Ublox {
        return Ok(());
    } else {
        vec![cfg.mode]
    };
    let epochs = load_dataset(data)?;
    let frames = if modes.iter().any(|m| m.uses_detection()) {
        let f = DirectoryFrames::open(data)?;
        if !f.times().is_empty() {
            // fail early on a missing frame directory
            let first = frame_path(data, 0);
            if !first.exists() {
                return Err(PipelineError::Io {
                    path: first.display().to_string(),
                    source: std::io::ErrorKind::NotFound.into(),
                });
            }
        }
        Some(f)
    } else {
        None
    };
    let empty = EmptyFrames;
    let source: &dyn FrameSource = match &frames {
        Some(f) => f,
        None => &empty,
    };
    let runs = run_modes(&cfg, source, &epochs, &modes)?;
    for (mode, results) in &runs {
        write_results(&out, *mode, results)?;
        let converged = results.iter().filter(|r| r.solution.is_converged()).count();
        println!("run: {mode}: {} epochs, {converged} converged -> {}", results.len(), out.display());
    }
    Ok(())
}

struct EmptyFrames;

impl FrameSource for EmptyFrames {
    fn times(&self) -> &[f64] {
        &[]
    }

    fn load(&self, _: usize) -> Result<super::LidarFrame, PipelineError> {
        unreachable!("no frames")
    }
}

fn eval(m: &ArgMatches) -> Result<(), PipelineError> {
    let data = path(m, "data");
    let out = results_dir(m);
    let truth: HashMap<u64, _> = parse_truth(&data.join("truth.csv"))?
        .into_iter()
        .map(|(t, g)| (t.to_bits(), geodetic_to_ecef(&g)))
        .collect();

    let mut rows = Vec::new();
    let mut csv_text = String::from("mode,mean_2d_m,std_2d_m,max_2d_m,availability_pct,epochs,solved\n");
    for mode in Mode::ALL {
        let p = solutions_path(&out, mode);
        if !p.exists() {
            continue;
        }
        let errors: Vec<Option<f64>> = parse_solutions(&p)?
            .iter()
            .filter_map(|s| {
                let t = truth.get(&s.epoch_s.to_bits())?;
                Some(
                    s.position_ecef
                        .filter(|_| s.status == SolveStatus::Converged)
                        .and_then(|pos| horizontal_error(&pos, t)),
                )
            })
            .collect();
        let metrics = compute_position_metrics(&errors)?;
        let opt = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:.6}"));
        csv_text.push_str(&format!(
            "{mode},{},{},{},{:.6},{},{}\n",
            opt(metrics.mean_2d_m),
            opt(metrics.std_2d_m),
            opt(metrics.max_2d_m),
            metrics.availability_pct,
            metrics.epochs,
            metrics.solved
        ));
        rows.push((mode.label().to_string(), metrics));
    }
    if rows.is_empty() {
        return Err(PipelineError::Io {
            path: solutions_path(&out, Mode::CrWls).display().to_string(),
            source: std::io::ErrorKind::NotFound.into(),
        });
    }
    let table = position_table(&rows);
    write_report(&out.join("metrics.csv"), &csv_text)?;
    write_report(&out.join("metrics.txt"), &table)?;
    print!("{table}");

    let labels_path = data.join("sat_truth.csv");
    let detector = [Mode::CrWls, Mode::RWls, Mode::WlsNe]
        .into_iter()
        .find(|m| verdicts_path(&out, *m).exists());
    if let (true, Some(mode)) = (labels_path.exists(), detector) {
        let labels: BTreeMap<(u64, String), TrueClass> = parse_sat_truth(&labels_path)?
            .into_iter()
            .map(|r| ((r.epoch_s.to_bits(), r.label.sat_id), r.label.class))
            .collect();
        let samples: Vec<DetectionSample> = parse_verdicts(&verdicts_path(&out, mode))?
            .into_iter()
            .filter_map(|v| {
                let class = labels.get(&(v.epoch_s.to_bits(), v.sat_id))?;
                Some(DetectionSample {
                    elevation_deg: v.elevation_deg,
                    true_nlos: *class == TrueClass::Nlos,
                    detected_nlos: v.class.is_nlos(),
                })
            })
            .collect();
        let report = compute_detection_report(&samples)?;
        let table = detection_table(&report);
        write_report(&out.join("detection.csv"), &detection_csv(&report))?;
        write_report(&out.join("detection.txt"), &table)?;
        println!();
        print!("{table}");
    }
    Ok(())
}

fn detection_csv(report: &DetectionReport) -> String {
    let mut s = String::from("bin_lo_deg,bin_hi_deg,true_nlos,detected,share_pct,accuracy_pct\n");
    let opt = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:.6}"));
    for b in &report.bins {
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            b.lo_deg,
            b.hi_deg,
            b.true_nlos,
            b.detected,
            opt(b.share_pct),
            opt(b.accuracy_pct)
        ));
    }
    s
}

fn sweep(m: &ArgMatches) -> Result<(), PipelineError> {
    let data = path(m, "data");
    let out = results_dir(m);
    let cfg = load_config(m, data)?;
    let epochs = load_dataset(data)?;
    let frames = DirectoryFrames::open(data)?;
    let reports = detection_sweep(&cfg, &frames, &epochs, &cfg.sweep_n_sw)?;
    std::fs::create_dir_all(&out).map_err(|source| PipelineError::Io {
        path: out.display().to_string(),
        source,
    })?;
    let mut csv_text = String::from("n_sw,bin_lo_deg,bin_hi_deg,true_nlos,detected,accuracy_pct\n");
    for (n, r) in &reports {
        for b in &r.bins {
            csv_text.push_str(&format!(
                "{n},{},{},{},{},{}\n",
                b.lo_deg,
                b.hi_deg,
                b.true_nlos,
                b.detected,
                b.accuracy_pct.map_or_else(String::new, |x| format!("{x:.6}"))
            ));
        }
    }
    let table = sweep_table(&reports);
    write_report(&out.join("sweep.csv"), &csv_text)?;
    write_report(&out.join("sweep.txt"), &table)?;
    print!("{table}");
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_is_well_formed() {
        command().debug_assert();
    }

    #[test]
    fn usage_errors() {
        assert_eq!(cli_main(["swm-gnss", "frobnicate"]), EXIT_USAGE);
        assert_eq!(cli_main(["swm-gnss"]), EXIT_USAGE);
        assert_eq!(cli_main(["swm-gnss", "run"]), EXIT_USAGE);
        assert_eq!(cli_main(["swm-gnss", "--help"]), 0);
    }

    #[test]
    fn missing_inputs_are_io_errors() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("absent.cfg");
        let code = cli_main([
            "swm-gnss",
            "simulate",
            "--scene",
            missing.to_str().unwrap(),
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert_eq!(code, EXIT_IO);
        assert_eq!(cli_main(["swm-gnss", "run", "--data", dir.path().to_str().unwrap(), "--mode", "wls"]), EXIT_IO);
    }

    #[test]
    fn bad_settings_are_config_errors() {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path().to_str().unwrap();
        assert_eq!(cli_main(["swm-gnss", "run", "--data", d, "--n_thres", "0"]), EXIT_CONFIG);
        assert_eq!(cli_main(["swm-gnss", "run", "--data", d, "--n_sw", "many"]), EXIT_PARSE);
    }
}
