//! Position error statistics and elevation-binned NLOS detection rates.

use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("no epochs to evaluate")]
    NoEpochs,
    #[error("no truth labels to evaluate against")]
    NoTruth,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionMetrics {
    /// `None` when no epoch produced a solution.
    pub mean_2d_m: Option<f64>,
    /// Population standard deviation.
    pub std_2d_m: Option<f64>,
    pub max_2d_m: Option<f64>,
    pub availability_pct: f64,
    pub epochs: usize,
    pub solved: usize,
}

/// One entry per epoch: the 2-D error when a converged solution exists,
/// `None` otherwise.
pub fn compute_position_metrics(errors: &[Option<f64>]) -> Result<PositionMetrics, MetricsError> {
    if errors.is_empty() {
        return Err(MetricsError::NoEpochs);
    }
    let solved: Vec<f64> = errors.iter().flatten().copied().collect();
    let n = solved.len();
    let (mean, std, max) = if n == 0 {
        (None, None, None)
    } else {
        let mean = solved.iter().sum::<f64>() / n as f64;
        let var = solved.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n as f64;
        (
            Some(mean),
            Some(var.sqrt()),
            Some(solved.iter().copied().fold(f64::MIN, f64::max)),
        )
    };
    Ok(PositionMetrics {
        mean_2d_m: mean,
        std_2d_m: std,
        max_2d_m: max,
        availability_pct: 100.0 * n as f64 / errors.len() as f64,
        epochs: errors.len(),
        solved: n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionSample {
    pub elevation_deg: f64,
    pub true_nlos: bool,
    pub detected_nlos: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionBin {
    pub lo_deg: f64,
    pub hi_deg: f64,
    pub true_nlos: usize,
    pub detected: usize,
    /// Share of all true NLOS that fall in this bin.
    pub share_pct: Option<f64>,
    /// Detected share of this bin's true NLOS; `None` when the bin has none.
    pub accuracy_pct: Option<f64>,
}

impl DetectionBin {
    pub fn label(&self) -> String {
        let close = if self.hi_deg >= 90.0 { ']' } else { ')' };
        format!("[{:.0}, {:.0}{close}", self.lo_deg, self.hi_deg)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionReport {
    pub bins: [DetectionBin; 3],
    pub total_true_nlos: usize,
    pub total_detected: usize,
}

impl DetectionReport {
    pub fn overall_accuracy_pct(&self) -> Option<f64> {
        (self.total_true_nlos > 0).then(|| 100.0 * self.total_detected as f64 / self.total_true_nlos as f64)
    }
}

const BIN_EDGES: [(f64, f64); 3] = [(0.0, 30.0), (30.0, 60.0), (60.0, 90.0)];

fn bin_of(elevation_deg: f64) -> usize {
    if elevation_deg < 30.0 {
        0
    } else if elevation_deg < 60.0 {
        1
    } else {
        2
    }
}

pub fn compute_detection_report(samples: &[DetectionSample]) -> Result<DetectionReport, MetricsError> {
    if samples.is_empty() {
        return Err(MetricsError::NoTruth);
    }
    let mut nlos = [0usize; 3];
    let mut hit = [0usize; 3];
    for s in samples.iter().filter(|s| s.true_nlos) {
        let b = bin_of(s.elevation_deg);
        nlos[b] += 1;
        hit[b] += usize::from(s.detected_nlos);
    }
    let total: usize = nlos.iter().sum();
    let bins = std::array::from_fn(|i| DetectionBin {
        lo_deg: BIN_EDGES[i].0,
        hi_deg: BIN_EDGES[i].1,
        true_nlos: nlos[i],
        detected: hit[i],
        share_pct: (total > 0).then(|| 100.0 * nlos[i] as f64 / total as f64),
        accuracy_pct: (nlos[i] > 0).then(|| 100.0 * hit[i] as f64 / nlos[i] as f64),
    });
    Ok(DetectionReport {
        bins,
        total_true_nlos: total,
        total_detected: hit.iter().sum(),
    })
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.2}"))
}

/// Aligned text table of per-mode position metrics.
pub fn position_table(rows: &[(String, PositionMetrics)]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<8} {:>10} {:>10} {:>10} {:>10} {:>7}",
        "method", "mean (m)", "std (m)", "max (m)", "avail (%)", "epochs"
    );
    for (name, m) in rows {
        let _ = writeln!(
            s,
            "{:<8} {:>10} {:>10} {:>10} {:>10.2} {:>7}",
            name,
            fmt_opt(m.mean_2d_m),
            fmt_opt(m.std_2d_m),
            fmt_opt(m.max_2d_m),
            m.availability_pct,
            m.epochs
        );
    }
    s
}

pub fn detection_table(report: &DetectionReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<10} {:>9} {:>9} {:>12} {:>13}",
        "elevation", "nlos", "detected", "share (%)", "accuracy (%)"
    );
    for b in &report.bins {
        let _ = writeln!(
            s,
            "{:<10} {:>9} {:>9} {:>12} {:>13}",
            b.label(),
            b.true_nlos,
            b.detected,
            fmt_opt(b.share_pct),
            fmt_opt(b.accuracy_pct)
        );
    }
    let _ = writeln!(
        s,
        "{:<10} {:>9} {:>9} {:>12} {:>13}",
        "all",
        report.total_true_nlos,
        report.total_detected,
        fmt_opt((report.total_true_nlos > 0).then_some(100.0)),
        fmt_opt(report.overall_accuracy_pct())
    );
    s
}

/// One column per window size, one row per elevation bin.
pub fn sweep_table(rows: &[(usize, DetectionReport)]) -> String {
    let mut s = String::new();
    let _ = write!(s, "{:<10}", "elevation");
    for (n, _) in rows {
        let _ = write!(s, " {:>10}", format!("n_sw={n}"));
    }
    s.push('\n');
    for i in 0..3 {
        let _ = write!(s, "{:<10}", rows.first().map_or(String::new(), |(_, r)| r.bins[i].label()));
        for (_, r) in rows {
            let _ = write!(s, " {:>10}", fmt_opt(r.bins[i].accuracy_pct));
        }
        s.push('\n');
    }
    let _ = write!(s, "{:<10}", "all");
    for (_, r) in rows {
        let _ = write!(s, " {:>10}", fmt_opt(r.overall_accuracy_pct()));
    }
    s.push('\n');
    s
}
