//! Segment integrators for the altitude-domain system.
//!
//! Every stepper advances `(m, v)` across one segment `[h', h' + Δh]` with the
//! control held constant. Explicit tableaus are evaluated stage by stage;
//! implicit ones solve for the speed slopes `k` by damped fixed-point
//! iteration, recovering the mass slopes from the converged speeds.

mod convergence;
mod tableau;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::dynamics::{mass_rate, speed_rate, DynamicsError, ModelParams, RocketState};

pub use convergence::{convergence_study, integrate, ConvergenceRow, ConvergenceSetup, ConvergenceStudy};
pub use tableau::ButcherTableau;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StepError {
    #[error(transparent)]
    Domain(#[from] DynamicsError),
    #[error("stage left the admissible region (m = {m}, v = {v})")]
    Infeasible { m: f64, v: f64 },
    #[error("implicit stage solve did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepResult {
    pub m_next: f64,
    pub v_next: f64,
    /// Fixed-point iterations spent on the stage solve; 0 for explicit methods.
    pub iterations: usize,
}

/// Stopping rule for implicit stage solves.
///
/// The residual is `max_i |k_i^{new} − k_i| / (1 + |k_i^{new}|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImplicitSolveConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub damping: f64,
}

impl Default for ImplicitSolveConfig {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 100,
            damping: 1.0,
        }
    }
}

/// Right-hand side of a two-component altitude-domain system.
///
/// The mass slope depends on speed only and the speed slope on
/// `(h, m, v)`, which is the structure the stage equations rely on.
pub trait AltitudeField {
    fn mass_slope(&self, v: f64) -> Result<f64, StepError>;
    fn speed_slope(&self, h: f64, m: f64, v: f64) -> Result<f64, StepError>;
}

/// The Goddard field under a fixed control. Stage states with `v <= 0` or
/// `m < m_p` are rejected as infeasible.
#[derive(Debug, Clone, Copy)]
pub struct GoddardField<'a> {
    pub u: f64,
    pub params: &'a ModelParams,
}

impl AltitudeField for GoddardField<'_> {
    fn mass_slope(&self, v: f64) -> Result<f64, StepError> {
        if !(v > 0.0) {
            return Err(StepError::Infeasible { m: f64::NAN, v });
        }
        Ok(mass_rate(self.u, v, self.params)?)
    }

    fn speed_slope(&self, h: f64, m: f64, v: f64) -> Result<f64, StepError> {
        if !(v > 0.0) || m < self.params.m_payload {
            return Err(StepError::Infeasible { m, v });
        }
        Ok(speed_rate(h, m, self.u, v, self.params)?)
    }
}

/// One explicit Euler step.
pub fn euler_step(start: RocketState, u: f64, dh: f64, p: &ModelParams) -> Result<StepResult, StepError> {
    let RocketState { h, m, v } = start;
    let dm = mass_rate(u, v, p)?;
    let dv = speed_rate(h, m, u, v, p)?;
    Ok(StepResult {
        m_next: m + dh * dm,
        v_next: v + dh * dv,
        iterations: 0,
    })
}

/// One Runge–Kutta step of the Goddard system with an arbitrary tableau.
pub fn rk_step(
    start: RocketState,
    u: f64,
    dh: f64,
    tab: &ButcherTableau,
    p: &ModelParams,
    cfg: &ImplicitSolveConfig,
) -> Result<StepResult, StepError> {
    rk_step_field(start, dh, tab, cfg, &GoddardField { u, params: p })
}

/// Runge–Kutta step of any [`AltitudeField`].
pub fn rk_step_field<F: AltitudeField>(
    start: RocketState,
    dh: f64,
    tab: &ButcherTableau,
    cfg: &ImplicitSolveConfig,
    field: &F,
) -> Result<StepResult, StepError> {
    let s = tab.stages();
    let RocketState { h, m, v } = start;
    let mut ell = vec![0.0; s];
    let mut k = vec![0.0; s];
    let mut iterations = 0;

    if tab.is_explicit() {
        for i in 0..s {
            let mut dv = 0.0;
            let mut dm = 0.0;
            for j in 0..i {
                dv += tab.a[i][j] * k[j];
                dm += tab.a[i][j] * ell[j];
            }
            let vi = v + dh * dv;
            ell[i] = field.mass_slope(vi)?;
            let mi = m + dh * dm;
            k[i] = field.speed_slope(h + tab.z[i] * dh, mi, vi)?;
        }
    } else {
        k.fill(field.speed_slope(h, m, v)?);
        let mut stage_v = vec![0.0; s];
        let mut k_new = vec![0.0; s];
        let mut residual = f64::INFINITY;
        while residual >= cfg.tol {
            if iterations == cfg.max_iter {
                return Err(StepError::NotConverged { iterations, residual });
            }
            iterations += 1;
            for i in 0..s {
                let dv: f64 = (0..s).map(|j| tab.a[i][j] * k[j]).sum();
                stage_v[i] = v + dh * dv;
                ell[i] = field.mass_slope(stage_v[i])?;
            }
            residual = 0.0;
            for i in 0..s {
                let dm: f64 = (0..s).map(|j| tab.a[i][j] * ell[j]).sum();
                k_new[i] = field.speed_slope(h + tab.z[i] * dh, m + dh * dm, stage_v[i])?;
                residual = f64::max(residual, (k_new[i] - k[i]).abs() / (1.0 + k_new[i].abs()));
            }
            for i in 0..s {
                k[i] += cfg.damping * (k_new[i] - k[i]);
            }
        }
        for i in 0..s {
            let dv: f64 = (0..s).map(|j| tab.a[i][j] * k[j]).sum();
            ell[i] = field.mass_slope(v + dh * dv)?;
        }
    }

    let mut sum_m = 0.0;
    let mut sum_v = 0.0;
    for i in 0..s {
        sum_m += tab.w[i] * ell[i];
        sum_v += tab.w[i] * k[i];
    }
    Ok(StepResult {
        m_next: m + dh * sum_m,
        v_next: v + dh * sum_v,
        iterations,
    })
}

/// ODE approximation method used inside a segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Euler,
    RungeKutta4,
    GaussLegendre,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Euler, Method::RungeKutta4, Method::GaussLegendre];

    /// Short key used in run names: `E`, `RK` or `G`.
    pub fn key(self) -> &'static str {
        match self {
            Method::Euler => "E",
            Method::RungeKutta4 => "RK",
            Method::GaussLegendre => "G",
        }
    }

    pub fn tableau(self) -> ButcherTableau {
        match self {
            Method::Euler => ButcherTableau::euler(),
            Method::RungeKutta4 => ButcherTableau::rk4(),
            Method::GaussLegendre => ButcherTableau::gauss_legendre2(),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown method {0}")]
pub struct UnknownMethod(pub String);

impl FromStr for Method {
    type Err = UnknownMethod;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "E" => Ok(Method::Euler),
            "RK" => Ok(Method::RungeKutta4),
            "G" => Ok(Method::GaussLegendre),
            other => Err(UnknownMethod(other.to_string())),
        }
    }
}

/// A method bundled with its tableau and implicit-solve settings.
#[derive(Debug, Clone)]
pub struct Stepper {
    method: Method,
    tableau: ButcherTableau,
    cfg: ImplicitSolveConfig,
}

impl Stepper {
    pub fn new(method: Method) -> Self {
        Self::with_config(method, ImplicitSolveConfig::default())
    }

    pub fn with_config(method: Method, cfg: ImplicitSolveConfig) -> Self {
        Self {
            method,
            tableau: method.tableau(),
            cfg,
        }
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn config(&self) -> &ImplicitSolveConfig {
        &self.cfg
    }

    pub fn step(&self, start: RocketState, u: f64, dh: f64, p: &ModelParams) -> Result<StepResult, StepError> {
        match self.method {
            Method::Euler => euler_step(start, u, dh, p),
            _ => rk_step(start, u, dh, &self.tableau, p, &self.cfg),
        }
    }

    /// Steps and applies the path constraints. Returns `None` when the control
    /// is not admissible from `start`.
    pub fn admissible_step(
        &self,
        start: RocketState,
        u: f64,
        dh: f64,
        terminal: bool,
        p: &ModelParams,
    ) -> Option<StepResult> {
        self.step(start, u, dh, p)
            .ok()
            .filter(|r| satisfies_constraints(r, terminal, p))
    }
}

/// `m_next >= m_p` and `v_next > 0` (or `>= 0` on the terminal segment).
pub fn satisfies_constraints(r: &StepResult, terminal: bool, p: &ModelParams) -> bool {
    let speed_ok = if terminal { r.v_next >= 0.0 } else { r.v_next > 0.0 };
    r.m_next >= p.m_payload && speed_ok && r.m_next.is_finite() && r.v_next.is_finite()
}

/// The subset of `candidates` whose one-segment step keeps the rocket above
/// the payload mass and moving upward.
pub fn feasible_controls(
    start: RocketState,
    dh: f64,
    candidates: &[f64],
    terminal: bool,
    stepper: &Stepper,
    p: &ModelParams,
) -> Vec<f64> {
    candidates
        .iter()
        .copied()
        .filter(|&u| {
            debug_assert!(p.contains_control(u), "control {u} outside [u_min, 0]");
            stepper.admissible_step(start, u, dh, terminal, p).is_some()
        })
        .collect()
}
