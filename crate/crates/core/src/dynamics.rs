//! Linear flows `ẋ = J∇H = K x`, their exact propagator and step integrators.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::brackets::{casimir_basis, PhaseChart};
use crate::error::{Error, PartialTrajectory, Result};
use crate::lagrangian::{chart_builder, HamiltonianStructure, QuadraticModel};
use crate::linalg::{self, Mat, Vector, SINGULAR_CUTOFF};

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_T_END: f64 = 10.0;
pub const DEFAULT_EQUIV_TOL: f64 = 1e-8;

/// Exact propagators are recomputed from scratch every this many grid steps.
const RESYNC_EVERY: usize = 256;

/// `K = J M`.
pub fn flow_matrix(structure: &HamiltonianStructure) -> Mat {
    structure.j() * &structure.m
}

#[derive(Debug, Clone, PartialEq)]
pub struct Propagation {
    pub state: Vector,
    /// Set when the propagated state is not finite (runaway growth).
    pub overflowed: bool,
}

/// `exp(tK) x0` by scaling and squaring.
pub fn exact_propagate(structure: &HamiltonianStructure, x0: &Vector, t: f64) -> Result<Propagation> {
    if !t.is_finite() {
        return Err(Error::InvalidParameter(format!("propagation time {t} is not finite")));
    }
    if x0.len() != structure.dim() {
        return Err(Error::ShapeMismatch(format!("state of length {} for a {}-dimensional chart", x0.len(), structure.dim())));
    }
    let state = linalg::expm(&(flow_matrix(structure) * t)) * x0;
    let overflowed = state.iter().any(|v| !v.is_finite());
    Ok(Propagation { state, overflowed })
}

/// Samples `exp(t_k K) x0` on `t_k = k dt`, k = 0..=steps.
///
/// Steps with the one-step propagator and resynchronizes from the full
/// exponential every few hundred steps so rounding does not accumulate.
pub fn exact_samples(flow: &Mat, x0: &Vector, dt: f64, steps: usize) -> Vec<Vector> {
    let step = linalg::expm(&(flow * dt));
    let mut out = Vec::with_capacity(steps + 1);
    let mut x = x0.clone();
    out.push(x.clone());
    for k in 1..=steps {
        x = if k % RESYNC_EVERY == 0 {
            linalg::expm(&(flow * (k as f64 * dt))) * x0
        } else {
            &step * &x
        };
        out.push(x.clone());
    }
    out
}

fn step_count(t_end: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParameter(format!("time step {dt} must be positive")));
    }
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Error::InvalidParameter(format!("end time {t_end} must be positive")));
    }
    Ok((t_end / dt - 1e-9).ceil().max(1.0) as usize)
}

/// One fixed step of a linear integrator.
pub trait Stepper {
    fn step(&self, x: &Vector) -> Vector;
}

/// A fixed-step scheme for `ẋ = Kx`, registered by name.
pub trait Integrator: Send + Sync {
    fn name(&self) -> &'static str;
    fn order(&self) -> u32;
    fn stepper(&self, flow: &Mat, dt: f64) -> Result<Box<dyn Stepper>>;
}

pub struct Rk4;
pub struct ImplicitMidpoint;

struct Rk4Stepper {
    k: Mat,
    dt: f64,
}

impl Stepper for Rk4Stepper {
    fn step(&self, x: &Vector) -> Vector {
        let h = self.dt;
        let k1 = &self.k * x;
        let k2 = &self.k * (x + &k1 * (h / 2.0));
        let k3 = &self.k * (x + &k2 * (h / 2.0));
        let k4 = &self.k * (x + &k3 * h);
        x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
    }
}

impl Integrator for Rk4 {
    fn name(&self) -> &'static str {
        "rk4"
    }

    fn order(&self) -> u32 {
        4
    }

    fn stepper(&self, flow: &Mat, dt: f64) -> Result<Box<dyn Stepper>> {
        Ok(Box::new(Rk4Stepper { k: flow.clone(), dt }))
    }
}

struct MidpointStepper {
    lhs: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    rhs: Mat,
}

impl Stepper for MidpointStepper {
    // (I − h/2 K) x' = (I + h/2 K) x: the stage equation of the midpoint rule
    // is linear, so each step is one triangular solve pair.
    fn step(&self, x: &Vector) -> Vector {
        self.lhs.solve(&(&self.rhs * x)).expect("midpoint matrix was checked invertible")
    }
}

impl Integrator for ImplicitMidpoint {
    fn name(&self) -> &'static str {
        "implicit_midpoint"
    }

    fn order(&self) -> u32 {
        2
    }

    fn stepper(&self, flow: &Mat, dt: f64) -> Result<Box<dyn Stepper>> {
        let n = flow.nrows();
        let half = flow * (dt / 2.0);
        let lhs_m = Mat::identity(n, n) - &half;
        if linalg::singular_ratio(&lhs_m) < SINGULAR_CUTOFF {
            return Err(Error::InvalidParameter(format!("midpoint stage matrix is singular at dt = {dt}")));
        }
        Ok(Box::new(MidpointStepper { lhs: lhs_m.lu(), rhs: Mat::identity(n, n) + half }))
    }
}

static INTEGRATORS: [&dyn Integrator; 2] = [&Rk4, &ImplicitMidpoint];

pub fn integrators() -> &'static [&'static dyn Integrator] {
    &INTEGRATORS
}

pub fn integrator(name: &str) -> Result<&'static dyn Integrator> {
    INTEGRATORS
        .iter()
        .copied()
        .find(|i| i.name() == name)
        .ok_or_else(|| Error::Unknown { kind: "integrator", name: name.to_string() })
}

/// Sampled phase-space trajectory with energy and Casimir audit columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub chart: PhaseChart,
    pub times: Vec<f64>,
    pub states: Vec<Vector>,
    pub energies: Vec<f64>,
    /// `casimirs[k][i]`: value of the i-th Casimir at sample k.
    pub casimirs: Vec<Vec<f64>>,
}

impl Trajectory {
    fn empty(chart: PhaseChart) -> Self {
        Self { chart, times: Vec::new(), states: Vec::new(), energies: Vec::new(), casimirs: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn push(&mut self, t: f64, x: Vector, structure: &HamiltonianStructure, kernel: &[Vector]) {
        self.energies.push(structure.energy(&x));
        self.casimirs.push(kernel.iter().map(|k| k.dot(&x)).collect());
        self.times.push(t);
        self.states.push(x);
    }

    /// Builds a trajectory with audit columns from sampled states.
    pub fn from_states(structure: &HamiltonianStructure, times: Vec<f64>, states: Vec<Vector>) -> Result<Self> {
        if times.len() != states.len() {
            return Err(Error::ShapeMismatch(format!("{} times for {} states", times.len(), states.len())));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("sample times must be strictly increasing".into()));
        }
        let kernel = casimir_basis(&structure.poisson, SINGULAR_CUTOFF);
        let mut traj = Self::empty(structure.chart().clone());
        for (t, x) in times.into_iter().zip(states) {
            traj.push(t, x, structure, &kernel);
        }
        Ok(traj)
    }

    /// Coordinates `q` (first half of every state).
    pub fn positions(&self) -> impl Iterator<Item = Vector> + '_ {
        let n = self.chart.dof();
        self.states.iter().map(move |x| x.rows(0, n).into_owned())
    }

    /// CSV with header `t,<labels>,H,casimir_1,...` at 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let ncas = self.casimirs.first().map(Vec::len).unwrap_or(0);
        let mut header = vec!["t".to_string()];
        header.extend(self.chart.labels().iter().cloned());
        header.push("H".into());
        header.extend((1..=ncas).map(|i| format!("casimir_{i}")));
        writeln!(w, "{}", header.join(","))?;
        for k in 0..self.len() {
            let mut row = vec![fmt17(self.times[k])];
            row.extend(self.states[k].iter().map(|&v| fmt17(v)));
            row.push(fmt17(self.energies[k]));
            row.extend(self.casimirs[k].iter().map(|&v| fmt17(v)));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Float formatted with 17 significant digits.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Integrates `ẋ = Kx` on the grid `k·dt` up to `t_end`.
pub fn integrate(
    structure: &HamiltonianStructure,
    x0: &Vector,
    t_end: f64,
    dt: f64,
    method: &dyn Integrator,
) -> Result<Trajectory> {
    let steps = step_count(t_end, dt)?;
    if x0.len() != structure.dim() {
        return Err(Error::ShapeMismatch(format!("state of length {} for a {}-dimensional chart", x0.len(), structure.dim())));
    }
    let stepper = method.stepper(&flow_matrix(structure), dt)?;
    let kernel = casimir_basis(&structure.poisson, SINGULAR_CUTOFF);
    let mut traj = Trajectory::empty(structure.chart().clone());
    let mut x = x0.clone();
    traj.push(0.0, x.clone(), structure, &kernel);
    for k in 1..=steps {
        x = stepper.step(&x);
        let t = k as f64 * dt;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState(Box::new(PartialTrajectory { time: t, partial: traj })));
        }
        traj.push(t, x.clone(), structure, &kernel);
    }
    Ok(traj)
}

/// Exact-propagator trajectory on the grid `k·dt`.
pub fn exact_trajectory(structure: &HamiltonianStructure, x0: &Vector, t_end: f64, dt: f64) -> Result<Trajectory> {
    let steps = step_count(t_end, dt)?;
    if x0.len() != structure.dim() {
        return Err(Error::ShapeMismatch(format!("state of length {} for a {}-dimensional chart", x0.len(), structure.dim())));
    }
    let states = exact_samples(&flow_matrix(structure), x0, dt, steps);
    let times = (0..=steps).map(|k| k as f64 * dt).collect();
    Trajectory::from_states(structure, times, states)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditTable {
    /// `|H(t) − H(0)|` per sample.
    pub energy_drift: Vec<f64>,
    /// `|kᵀx(t) − kᵀx(0)|` per sample and Casimir.
    pub casimir_drift: Vec<Vec<f64>>,
    pub max_energy_drift: f64,
    pub max_casimir_drift: f64,
    pub casimir_count: usize,
}

/// Drift of `H` and of the linear Casimirs of `structure` along `trajectory`.
pub fn conservation_audit(trajectory: &Trajectory, structure: &HamiltonianStructure) -> Result<AuditTable> {
    if trajectory.chart.dim() != structure.dim() {
        return Err(Error::ShapeMismatch("trajectory and structure charts differ in dimension".into()));
    }
    let kernel = casimir_basis(&structure.poisson, SINGULAR_CUTOFF);
    let Some(x0) = trajectory.states.first() else {
        return Ok(AuditTable {
            energy_drift: Vec::new(),
            casimir_drift: Vec::new(),
            max_energy_drift: 0.0,
            max_casimir_drift: 0.0,
            casimir_count: kernel.len(),
        });
    };
    let h0 = structure.energy(x0);
    let c0: Vec<f64> = kernel.iter().map(|k| k.dot(x0)).collect();
    let energy_drift: Vec<f64> = trajectory.states.iter().map(|x| (structure.energy(x) - h0).abs()).collect();
    let casimir_drift: Vec<Vec<f64>> = trajectory
        .states
        .iter()
        .map(|x| kernel.iter().zip(&c0).map(|(k, c)| (k.dot(x) - c).abs()).collect())
        .collect();
    let max_energy_drift = energy_drift.iter().copied().fold(0.0, f64::max);
    let max_casimir_drift = casimir_drift.iter().flatten().copied().fold(0.0, f64::max);
    Ok(AuditTable { energy_drift, casimir_drift, max_energy_drift, max_casimir_drift, casimir_count: kernel.len() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartDrift {
    pub chart: String,
    pub energy_drift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub charts: Vec<String>,
    pub max_q_deviation: f64,
    pub energy_drift: Vec<ChartDrift>,
    pub tolerance: f64,
    pub passed: bool,
}

/// Propagates every chart from the same `(q0, q̇0)` and compares the `q`
/// projections on the common grid.
pub fn s_equivalence_with_trajectories(
    model: &QuadraticModel,
    charts: &[&str],
    q0: &Vector,
    qdot0: &Vector,
    t_end: f64,
    dt: f64,
    tol: f64,
) -> Result<(EquivalenceReport, Vec<Trajectory>)> {
    if charts.is_empty() {
        return Err(Error::InvalidParameter("no charts requested".into()));
    }
    let mut trajectories = Vec::with_capacity(charts.len());
    let mut drifts = Vec::with_capacity(charts.len());
    for name in charts {
        let builder = chart_builder(name)?;
        let structure = builder.structure(model)?;
        let x0 = builder.initial_state(model, q0, qdot0)?;
        let traj = exact_trajectory(&structure, &x0, t_end, dt)?;
        let audit = conservation_audit(&traj, &structure)?;
        drifts.push(ChartDrift { chart: name.to_string(), energy_drift: audit.max_energy_drift });
        trajectories.push(traj);
    }
    let positions: Vec<Vec<Vector>> = trajectories.iter().map(|t| t.positions().collect()).collect();
    let mut max_q_deviation: f64 = 0.0;
    for a in 0..positions.len() {
        for b in (a + 1)..positions.len() {
            for (qa, qb) in positions[a].iter().zip(&positions[b]) {
                let d = (qa - qb).amax();
                max_q_deviation = if d.is_nan() { f64::INFINITY } else { max_q_deviation.max(d) };
            }
        }
    }
    let report = EquivalenceReport {
        charts: charts.iter().map(|s| s.to_string()).collect(),
        max_q_deviation,
        energy_drift: drifts,
        tolerance: tol,
        passed: max_q_deviation < tol,
    };
    Ok((report, trajectories))
}

pub fn s_equivalence(
    model: &QuadraticModel,
    charts: &[&str],
    q0: &Vector,
    qdot0: &Vector,
    t_end: f64,
    dt: f64,
    tol: f64,
) -> Result<EquivalenceReport> {
    s_equivalence_with_trajectories(model, charts, q0, qdot0, t_end, dt, tol).map(|(r, _)| r)
}
