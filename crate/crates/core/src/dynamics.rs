//! Geodesics of a semi-spray and trajectory-level checks.

use std::io::Write;

use log::debug;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::deform::{DeformError, DeformedLagrangian};
use crate::expr::EvalError;
use crate::geometry::{homogeneity_degree, liouville_apply, PhasePoint, ScalarField, SemiSpray};
use crate::theorem::LagrangeSystem;

#[derive(Debug, Clone, Error)]
pub enum DynamicsError {
    #[error("invalid integrator configuration: {0}")]
    InvalidConfig(String),
    #[error("step {step}: {source}")]
    DomainViolation { step: usize, source: EvalError },
    #[error("step {step}: state is no longer finite")]
    NonFinite { step: usize },
    #[error("trajectory has {len} states, at least 3 are needed")]
    TooShort { len: usize },
    #[error(transparent)]
    Deform(#[from] DeformError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("csv export failed: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub step: f64,
    pub horizon: f64,
    pub initial: PhasePoint,
    /// Chart box `[lo, hi]` for `x1..xn, y1..yn`; leaving it truncates the run.
    pub bounds: Option<Vec<(f64, f64)>>,
}

impl IntegratorConfig {
    pub fn new(step: f64, horizon: f64, initial: PhasePoint) -> Self {
        IntegratorConfig {
            step,
            horizon,
            initial,
            bounds: None,
        }
    }

    pub fn within(mut self, bounds: Vec<(f64, f64)>) -> Self {
        self.bounds = Some(bounds);
        self
    }

    /// Number of steps `T/h`.
    pub fn steps(&self) -> Result<usize, DynamicsError> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(DynamicsError::InvalidConfig(format!("step {} is not positive", self.step)));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(DynamicsError::InvalidConfig(format!(
                "horizon {} is not positive",
                self.horizon
            )));
        }
        let ratio = self.horizon / self.step;
        let k = ratio.round();
        if k < 1.0 || (ratio - k).abs() > 1e-9 * ratio {
            return Err(DynamicsError::InvalidConfig(format!(
                "horizon {} is not a whole number of steps {}",
                self.horizon, self.step
            )));
        }
        if !self.initial.is_finite() {
            return Err(DynamicsError::InvalidConfig("initial state is not finite".into()));
        }
        Ok(k as usize)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub step: f64,
    pub times: Vec<f64>,
    pub states: Vec<PhasePoint>,
    /// Set when the run stopped early on leaving the chart box.
    pub truncated: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn last(&self) -> &PhasePoint {
        &self.states[self.states.len() - 1]
    }
}

fn vector_field(s: &SemiSpray, state: &[f64], step: usize) -> Result<Vec<f64>, DynamicsError> {
    let p = PhasePoint::from_flat(state);
    let acc = s
        .acceleration(&p)
        .map_err(|source| DynamicsError::DomainViolation { step, source })?;
    Ok(p.y.iter().copied().chain(acc).collect())
}

fn axpy(base: &[f64], h: f64, k: &[f64]) -> Vec<f64> {
    base.iter().zip(k).map(|(b, v)| b + h * v).collect()
}

/// Classical fourth-order Runge-Kutta for `ẋ = y`, `ẏ = −2G(x, y)`.
pub fn integrate_geodesic(s: &SemiSpray, cfg: &IntegratorConfig) -> Result<Trajectory, DynamicsError> {
    let steps = cfg.steps()?;
    if cfg.initial.dim() != s.dim() {
        return Err(DynamicsError::InvalidConfig(format!(
            "initial state has dimension {}, spray has {}",
            cfg.initial.dim(),
            s.dim()
        )));
    }
    let h = cfg.step;
    let inside = |p: &PhasePoint| {
        cfg.bounds.as_ref().is_none_or(|b| {
            p.x.iter().chain(&p.y).zip(b).all(|(v, (lo, hi))| lo <= v && v <= hi)
        })
    };
    let mut state = cfg.initial.to_flat();
    let mut times = vec![0.0];
    let mut states = vec![cfg.initial.clone()];
    let mut truncated = false;
    for k in 1..=steps {
        let k1 = vector_field(s, &state, k)?;
        let k2 = vector_field(s, &axpy(&state, 0.5 * h, &k1), k)?;
        let k3 = vector_field(s, &axpy(&state, 0.5 * h, &k2), k)?;
        let k4 = vector_field(s, &axpy(&state, h, &k3), k)?;
        for i in 0..state.len() {
            state[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let p = PhasePoint::from_flat(&state);
        if !p.is_finite() {
            return Err(DynamicsError::NonFinite { step: k });
        }
        if !inside(&p) {
            debug!("trajectory left the chart box at t = {}; truncated", k as f64 * h);
            truncated = true;
            break;
        }
        times.push(k as f64 * h);
        states.push(p);
    }
    Ok(Trajectory {
        step: h,
        times,
        states,
        truncated,
    })
}

/// A Lagrangian that can be evaluated along a trajectory.
pub trait TrajectoryLagrangian {
    /// `∂L/∂y^i`
    fn momenta(&self, p: &PhasePoint) -> Result<Vec<f64>, DynamicsError>;
    /// `∂L/∂x^i`
    fn position_gradient(&self, p: &PhasePoint) -> Result<Vec<f64>, DynamicsError>;
    /// `C(L) − L`
    fn energy(&self, p: &PhasePoint) -> Result<f64, DynamicsError>;
}

impl TrajectoryLagrangian for LagrangeSystem {
    fn momenta(&self, p: &PhasePoint) -> Result<Vec<f64>, DynamicsError> {
        Ok(self.vertical.eval(p)?)
    }

    fn position_gradient(&self, p: &PhasePoint) -> Result<Vec<f64>, DynamicsError> {
        let b = p.binding();
        Ok(self
            .position_gradient
            .iter()
            .map(|g| g.eval(&b))
            .collect::<Result<_, _>>()?)
    }

    fn energy(&self, p: &PhasePoint) -> Result<f64, DynamicsError> {
        Ok(self.energy.eval(&p.binding())?)
    }
}

impl TrajectoryLagrangian for DeformedLagrangian {
    fn momenta(&self, p: &PhasePoint) -> Result<Vec<f64>, DynamicsError> {
        Ok(DeformedLagrangian::momenta(self, p)?)
    }

    fn position_gradient(&self, p: &PhasePoint) -> Result<Vec<f64>, DynamicsError> {
        Ok(DeformedLagrangian::position_gradient(self, p)?)
    }

    fn energy(&self, p: &PhasePoint) -> Result<f64, DynamicsError> {
        Ok(DeformedLagrangian::energy(self, p)?)
    }
}

/// Max over interior states and components of
/// `|d/dt(∂L/∂y^i) − ∂L/∂x^i|`, with `d/dt` by central differences.
pub fn el_residual_along<L: TrajectoryLagrangian + ?Sized>(
    traj: &Trajectory,
    lag: &L,
) -> Result<f64, DynamicsError> {
    if traj.len() < 3 {
        return Err(DynamicsError::TooShort { len: traj.len() });
    }
    let momenta: Vec<Vec<f64>> = traj
        .states
        .iter()
        .map(|p| lag.momenta(p))
        .collect::<Result<_, _>>()?;
    let mut worst: f64 = 0.0;
    for k in 1..traj.len() - 1 {
        let grad = lag.position_gradient(&traj.states[k])?;
        for i in 0..grad.len() {
            let dp = (momenta[k + 1][i] - momenta[k - 1][i]) / (2.0 * traj.step);
            worst = worst.max((dp - grad[i]).abs());
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergySeries {
    pub values: Vec<f64>,
    /// `max_k |E(t_k) − E(t_0)|`
    pub drift: f64,
}

impl EnergySeries {
    pub fn strictly_decreasing(&self) -> bool {
        self.values.windows(2).all(|w| w[1] < w[0])
    }
}

pub fn energy_along<L: TrajectoryLagrangian + ?Sized>(
    traj: &Trajectory,
    lag: &L,
) -> Result<EnergySeries, DynamicsError> {
    let values: Vec<f64> = traj
        .states
        .iter()
        .map(|p| lag.energy(p))
        .collect::<Result<_, _>>()?;
    let e0 = values.first().copied().unwrap_or(0.0);
    let drift = values.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max);
    Ok(EnergySeries { values, drift })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DissipationSeries {
    /// `S(E_L)(t_k)`
    pub spray_energy: Vec<f64>,
    /// `C(D)(t_k)`
    pub liouville_dissipation: Vec<f64>,
    /// `2D(t_k)`
    pub twice_dissipation: Vec<f64>,
    /// `max_k |S(E_L) − C(D)|`
    pub balance_max: f64,
    /// `D` is fiber-homogeneous of degree 2.
    pub rayleigh: bool,
    /// `max_k |S(E_L) − 2D|` when `rayleigh`.
    pub rayleigh_max: Option<f64>,
    /// `D < 0` at every state with `y ≠ 0`.
    pub negative: bool,
}

pub fn dissipation_along(
    traj: &Trajectory,
    system: &LagrangeSystem,
    dissipation: &ScalarField,
) -> Result<DissipationSeries, DynamicsError> {
    let cd = liouville_apply(dissipation);
    let mut out = DissipationSeries {
        spray_energy: Vec::with_capacity(traj.len()),
        liouville_dissipation: Vec::with_capacity(traj.len()),
        twice_dissipation: Vec::with_capacity(traj.len()),
        balance_max: 0.0,
        rayleigh: homogeneity_degree(std::slice::from_ref(dissipation.expr()), &traj.states)
            .is_some_and(|p| (p - 2.0).abs() <= 1e-9),
        rayleigh_max: None,
        negative: true,
    };
    let mut rayleigh_max: f64 = 0.0;
    for p in &traj.states {
        let b = p.binding();
        let se = system.spray_energy.eval(&b)?;
        let c = cd.expr().eval(&b)?;
        let d = dissipation.expr().eval(&b)?;
        out.balance_max = out.balance_max.max((se - c).abs());
        rayleigh_max = rayleigh_max.max((se - 2.0 * d).abs());
        if !p.velocity_is_zero() {
            out.negative &= d < 0.0;
        }
        out.spray_energy.push(se);
        out.liouville_dissipation.push(c);
        out.twice_dissipation.push(2.0 * d);
    }
    if out.rayleigh {
        out.rayleigh_max = Some(rayleigh_max);
    }
    Ok(out)
}

/// Write `t, x1..xn, y1..yn, E_L, E_PhiL`; the last column is empty without
/// a deformation or where it cannot be evaluated.
pub fn write_csv<W: Write>(
    out: W,
    traj: &Trajectory,
    system: &LagrangeSystem,
    deformed: Option<&DeformedLagrangian>,
) -> Result<(), DynamicsError> {
    let csv_err = |e: csv::Error| DynamicsError::Csv(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    let n = system.dim();
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("x{i}")));
    header.extend((1..=n).map(|i| format!("y{i}")));
    header.push("E_L".into());
    header.push("E_PhiL".into());
    w.write_record(&header).map_err(csv_err)?;
    for (t, p) in traj.times.iter().zip(&traj.states) {
        let mut row = vec![t.to_string()];
        row.extend(p.x.iter().chain(&p.y).map(|v| v.to_string()));
        row.push(TrajectoryLagrangian::energy(system, p)?.to_string());
        row.push(
            deformed
                .and_then(|d| DeformedLagrangian::energy(d, p).ok())
                .map(|e| e.to_string())
                .unwrap_or_default(),
        );
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| DynamicsError::Csv(e.to_string()))
}
