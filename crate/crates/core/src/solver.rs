//! Iterative weighted least squares single point positioning.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector, Matrix3, SymmetricEigen};
use thiserror::Error;

use crate::frames::{ecef_to_geodetic, enu_rotation, EcefPosition, FrameError};
use crate::measmodel::{Constellation, SatelliteObservation};

const MIN_RANGE_M: f64 = 1.0e6;
const MAX_CONDITION: f64 = 1.0e12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("satellite is only {0:.1} m from the receiver")]
    DegenerateGeometry(f64),
    #[error("geometry matrix is singular")]
    SingularGeometry,
    #[error(transparent)]
    Frame(#[from] FrameError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    Diverged,
    Unavailable,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Converged => "Converged",
            SolveStatus::Diverged => "Diverged",
            SolveStatus::Unavailable => "Unavailable",
        }
    }
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SolveStatus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "converged" => Ok(SolveStatus::Converged),
            "diverged" => Ok(SolveStatus::Diverged),
            "unavailable" => Ok(SolveStatus::Unavailable),
            other => Err(format!("unknown solve status {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClockMode {
    /// One receiver clock shared by every constellation.
    Single,
    /// One clock state per constellation present.
    PerConstellation,
}

/// Which clock state a bias belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ClockGroup {
    Common,
    System(Constellation),
}

impl fmt::Display for ClockGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClockGroup::Common => f.write_str("common"),
            ClockGroup::System(c) => write!(f, "{c}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub max_iterations: usize,
    pub convergence_m: f64,
    pub initial_guess: EcefPosition,
    pub clock_mode: ClockMode,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iterations: 20,
            convergence_m: 1e-4,
            initial_guess: EcefPosition::default(),
            clock_mode: ClockMode::Single,
        }
    }
}

/// Observation prepared for the solver: corrected pseudorange and weight.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedObservation {
    pub observation: SatelliteObservation,
    pub corrected_pseudorange_m: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReceiverSolution {
    /// Final iterate; meaningful only when converged.
    pub position_ecef: EcefPosition,
    pub clock_bias_m: BTreeMap<ClockGroup, f64>,
    /// State covariance `(GᵀWG)⁻¹`, position first, then clocks in
    /// `clock_bias_m` order.
    pub covariance: DMatrix<f64>,
    pub iterations: usize,
    pub status: SolveStatus,
}

impl ReceiverSolution {
    fn unavailable(cfg: &SolverConfig) -> Self {
        Self {
            position_ecef: cfg.initial_guess,
            clock_bias_m: BTreeMap::new(),
            covariance: DMatrix::zeros(0, 0),
            iterations: 0,
            status: SolveStatus::Unavailable,
        }
    }

    pub fn is_converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }
}

/// Geometric range plus receiver clock.
pub fn predict_pseudorange(
    rx: &EcefPosition,
    clock_m: f64,
    sat: &EcefPosition,
) -> Result<f64, SolverError> {
    let range = sat.distance(rx);
    if !(range > MIN_RANGE_M) {
        return Err(SolverError::DegenerateGeometry(range));
    }
    Ok(range + clock_m)
}

/// Partial derivatives of the predicted pseudorange with respect to the
/// receiver position and clock: `(-u, 1)` with `u` the unit vector from
/// receiver to satellite.
pub fn jacobian_row(rx: &EcefPosition, sat: &EcefPosition) -> Result<[f64; 4], SolverError> {
    let los = sat.to_vector() - rx.to_vector();
    let range = los.norm();
    if !(range > MIN_RANGE_M) {
        return Err(SolverError::DegenerateGeometry(range));
    }
    let u = los / range;
    Ok([-u.x, -u.y, -u.z, 1.0])
}

fn clock_layout(observations: &[WeightedObservation], mode: ClockMode) -> Vec<ClockGroup> {
    match mode {
        ClockMode::Single => vec![ClockGroup::Common],
        ClockMode::PerConstellation => {
            let mut groups: Vec<_> = observations
                .iter()
                .map(|o| ClockGroup::System(o.observation.constellation))
                .collect();
            groups.sort();
            groups.dedup();
            groups
        }
    }
}

fn clock_column(group_of: &[ClockGroup], obs: &SatelliteObservation, mode: ClockMode) -> usize {
    let key = match mode {
        ClockMode::Single => ClockGroup::Common,
        ClockMode::PerConstellation => ClockGroup::System(obs.constellation),
    };
    3 + group_of.iter().position(|g| *g == key).unwrap_or(0)
}

/// Design matrix, weighted residuals and weights at a state.
fn linearize(
    observations: &[WeightedObservation],
    state: &DVector<f64>,
    groups: &[ClockGroup],
    mode: ClockMode,
) -> Result<(DMatrix<f64>, DVector<f64>), SolverError> {
    let n = observations.len();
    let m = 3 + groups.len();
    let rx = EcefPosition::new(state[0], state[1], state[2]);
    let mut g = DMatrix::zeros(n, m);
    let mut r = DVector::zeros(n);
    for (i, o) in observations.iter().enumerate() {
        let col = clock_column(groups, &o.observation, mode);
        let row = jacobian_row(&rx, &o.observation.sat_pos_ecef)?;
        g[(i, 0)] = row[0];
        g[(i, 1)] = row[1];
        g[(i, 2)] = row[2];
        g[(i, col)] = row[3];
        let predicted = predict_pseudorange(&rx, state[col], &o.observation.sat_pos_ecef)?;
        r[i] = o.corrected_pseudorange_m - predicted;
    }
    Ok((g, r))
}

/// Weights relative to the largest, snapped to a 2^-40 grid so that
/// uniformly scaled weight sets give bit-identical normal equations.
fn normalized_weights(observations: &[WeightedObservation]) -> DVector<f64> {
    const GRID: f64 = (1u64 << 40) as f64;
    let max = observations.iter().fold(0.0_f64, |a, o| a.max(o.weight));
    DVector::from_iterator(
        observations.len(),
        observations
            .iter()
            .map(|o| ((o.weight / max * GRID).round() / GRID).max(1.0 / GRID)),
    )
}

fn condition_number(normal: &DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new(normal.clone());
    let max = eig.eigenvalues.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let min = eig.eigenvalues.iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

/// Gauss-Newton iterations of the weighted normal equations.
///
/// Fewer satellites than unknowns gives `Unavailable`; a singular or
/// ill-conditioned normal matrix, three successive growing steps, or
/// exhausting `max_iterations` gives `Diverged`.
pub fn wls_solve(observations: &[WeightedObservation], cfg: &SolverConfig) -> ReceiverSolution {
    let usable: Vec<WeightedObservation> = observations
        .iter()
        .filter(|o| o.weight > 0.0 && o.weight.is_finite() && o.corrected_pseudorange_m.is_finite())
        .cloned()
        .collect();
    let groups = clock_layout(&usable, cfg.clock_mode);
    let unknowns = 3 + groups.len();
    if usable.len() < unknowns || usable.is_empty() {
        return ReceiverSolution::unavailable(cfg);
    }

    let w = normalized_weights(&usable);
    let mut state = DVector::zeros(unknowns);
    state[0] = cfg.initial_guess.x;
    state[1] = cfg.initial_guess.y;
    state[2] = cfg.initial_guess.z;

    let mut status = SolveStatus::Diverged;
    let mut iterations = 0;
    let mut last_step = f64::INFINITY;
    let mut growth = 0;
    let mut failed = false;
    while iterations < cfg.max_iterations {
        iterations += 1;
        let Ok((g, r)) = linearize(&usable, &state, &groups, cfg.clock_mode) else {
            failed = true;
            break;
        };
        let gtw = g.transpose() * DMatrix::from_diagonal(&w);
        let normal = &gtw * &g;
        if condition_number(&normal) > MAX_CONDITION {
            failed = true;
            break;
        }
        let Some(step) = normal.clone().cholesky().map(|c| c.solve(&(&gtw * &r))) else {
            failed = true;
            break;
        };
        state += &step;
        let step_norm = step.norm();
        if step_norm < cfg.convergence_m {
            status = SolveStatus::Converged;
            break;
        }
        if step_norm > last_step {
            growth += 1;
            if growth >= 3 {
                break;
            }
        } else {
            growth = 0;
        }
        last_step = step_norm;
    }

    let position = EcefPosition::new(state[0], state[1], state[2]);
    let covariance = if failed {
        DMatrix::zeros(unknowns, unknowns)
    } else {
        linearize(&usable, &state, &groups, cfg.clock_mode)
            .ok()
            .and_then(|(g, _)| {
                let w_raw = DVector::from_iterator(usable.len(), usable.iter().map(|o| o.weight));
                let gtw = g.transpose() * DMatrix::from_diagonal(&w_raw);
                (&gtw * &g).try_inverse()
            })
            .map(|c| (&c + c.transpose()) * 0.5)
            .unwrap_or_else(|| DMatrix::zeros(unknowns, unknowns))
    };
    if failed {
        status = SolveStatus::Diverged;
    }
    let clock_bias_m = groups
        .iter()
        .enumerate()
        .map(|(i, g)| (*g, state[3 + i]))
        .collect();
    ReceiverSolution {
        position_ecef: position,
        clock_bias_m,
        covariance,
        iterations,
        status,
    }
}

/// Unweighted geometry matrix with a single clock column.
pub fn geometry_matrix(rx: &EcefPosition, sats: &[EcefPosition]) -> Result<DMatrix<f64>, SolverError> {
    let mut g = DMatrix::zeros(sats.len(), 4);
    for (i, s) in sats.iter().enumerate() {
        let row = jacobian_row(rx, s)?;
        for (j, v) in row.iter().enumerate() {
            g[(i, j)] = *v;
        }
    }
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dop {
    pub gdop: f64,
    pub pdop: f64,
    pub hdop: f64,
    pub vdop: f64,
    pub tdop: f64,
}

/// Dilution of precision from a geometry matrix whose first three columns
/// are ECEF position partials; horizontal/vertical split in ENU at `rx`.
pub fn dilution_of_precision(g: &DMatrix<f64>, rx: &EcefPosition) -> Result<Dop, SolverError> {
    if g.nrows() < g.ncols() {
        return Err(SolverError::SingularGeometry);
    }
    let normal = g.transpose() * g;
    if condition_number(&normal) > MAX_CONDITION {
        return Err(SolverError::SingularGeometry);
    }
    let q = normal.try_inverse().ok_or(SolverError::SingularGeometry)?;
    let geo = ecef_to_geodetic(rx)?;
    let r: Matrix3<f64> = enu_rotation(geo.latitude_rad, geo.longitude_rad).transpose();
    let q_pos: Matrix3<f64> = q.fixed_view::<3, 3>(0, 0).into_owned();
    let q_enu = r * q_pos * r.transpose();
    let clock_var: f64 = (3..q.ncols()).map(|i| q[(i, i)]).sum();
    Ok(Dop {
        gdop: q.trace().sqrt(),
        pdop: q_pos.trace().sqrt(),
        hdop: (q_enu[(0, 0)] + q_enu[(1, 1)]).sqrt(),
        vdop: q_enu[(2, 2)].sqrt(),
        tdop: clock_var.sqrt(),
    })
}
