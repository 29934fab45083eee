//! Normalized Goddard ascent model in the altitude domain.
//!
//! Altitude is measured in Earth radii from the Earth's centre (`h = 1` is the
//! surface), mass in units of the launch mass, and speed so that surface
//! gravity equals one. The independent variable is altitude, so the state is
//! `(m, v)` and the two right-hand sides are `dm/dh` and `dv/dh`.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("speed must be positive, got v = {0}")]
    NonPositiveSpeed(f64),
    #[error("mass must be positive, got m = {0}")]
    NonPositiveMass(f64),
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),
    #[error("unknown quantity kind `{0}`")]
    UnknownQuantity(String),
}

/// Normalized physical constants and boundary values of the ascent problem.
///
/// `s_rho0` is the product of cross-section and surface air density; only the
/// product enters the model. Controls are signed mass-rate quantities in
/// `[u_min, 0]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub beta: f64,
    pub s_rho0: f64,
    pub c_d: f64,
    pub c: f64,
    pub u_min: f64,
    pub h0: f64,
    pub h_t: f64,
    pub m0: f64,
    pub v0: f64,
    pub m_payload: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            beta: 500.0,
            s_rho0: 12400.0,
            c_d: 0.05,
            c: 0.5,
            u_min: -3.5,
            h0: 1.0,
            h_t: 1.01,
            m0: 1.0,
            v0: 0.0,
            m_payload: 0.6,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        let bad = |msg: &str| Err(DynamicsError::InvalidParams(msg.to_string()));
        if !(self.beta > 0.0 && self.s_rho0 > 0.0 && self.c_d > 0.0 && self.c > 0.0) {
            return bad("beta, s_rho0, c_d and c must be positive");
        }
        if !(self.u_min <= 0.0) {
            return bad("u_min must be <= 0");
        }
        if !(self.h0 < self.h_t) {
            return bad("h0 must be below hT");
        }
        if !(self.h0 >= 1.0) {
            return bad("h0 must be at or above the surface (h >= 1)");
        }
        if !(0.0 < self.m_payload && self.m_payload < self.m0) {
            return bad("payload mass must satisfy 0 < m_p < m0");
        }
        Ok(())
    }

    /// `½·s·ρ0·c_D`, the drag coefficient at the surface.
    pub fn drag_coefficient(&self) -> f64 {
        0.5 * self.s_rho0 * self.c_d
    }

    pub fn contains_control(&self, u: f64) -> bool {
        self.u_min <= u && u <= 0.0
    }
}

/// Altitude, mass and speed in normalized units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocketState {
    pub h: f64,
    pub m: f64,
    pub v: f64,
}

impl RocketState {
    pub fn new(h: f64, m: f64, v: f64) -> Self {
        Self { h, m, v }
    }
}

/// Normalized drag `½·s·c_D·ρ0·exp(β(1−h))·v²`.
pub fn drag(v: f64, h: f64, p: &ModelParams) -> f64 {
    debug_assert!(h >= 1.0, "altitude below the surface: h = {h}");
    p.drag_coefficient() * (p.beta * (1.0 - h)).exp() * v * v
}

/// Normalized gravitational acceleration `1/h²`.
pub fn gravity(h: f64) -> f64 {
    1.0 / (h * h)
}

/// `dm/dh = u / (c·v)`.
pub fn mass_rate(u: f64, v: f64, p: &ModelParams) -> Result<f64, DynamicsError> {
    if !(v > 0.0) {
        return Err(DynamicsError::NonPositiveSpeed(v));
    }
    Ok(u / (p.c * v))
}

/// `dv/dh = −u/(m·v) − (s·c_D·ρ0/(2m))·exp(β(1−h))·v − 1/(v·h²)`.
pub fn speed_rate(h: f64, m: f64, u: f64, v: f64, p: &ModelParams) -> Result<f64, DynamicsError> {
    if !(v > 0.0) {
        return Err(DynamicsError::NonPositiveSpeed(v));
    }
    if !(m > 0.0) {
        return Err(DynamicsError::NonPositiveMass(m));
    }
    debug_assert!(h >= 1.0, "altitude below the surface: h = {h}");
    let thrust = -u / (m * v);
    let drag = p.drag_coefficient() / m * (p.beta * (1.0 - h)).exp() * v;
    let weight = 1.0 / (v * h * h);
    Ok(thrust - drag - weight)
}

/// Dimensional reference constants (SI units) for converting to and from the
/// normalized model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimensionalConstants {
    /// Earth radius in metres.
    pub r: f64,
    /// Surface gravity in m/s².
    pub g0: f64,
    /// Launch mass in kg.
    pub m0_dim: f64,
}

impl Default for DimensionalConstants {
    fn default() -> Self {
        Self {
            r: 6_371_000.0,
            g0: 9.81,
            m0_dim: 1.0,
        }
    }
}

impl DimensionalConstants {
    /// `G = g0·R²`.
    pub fn big_g(&self) -> f64 {
        self.g0 * self.r * self.r
    }

    fn scale(&self, kind: QuantityKind) -> f64 {
        let g = self.big_g();
        match kind {
            QuantityKind::Mass => 1.0 / self.m0_dim,
            QuantityKind::Altitude => 1.0 / self.r,
            QuantityKind::Time => (g / self.r.powi(3)).sqrt(),
            QuantityKind::Speed => (self.r / g).sqrt(),
            QuantityKind::Acceleration => self.r * self.r / g,
        }
    }

    pub fn nondimensionalize(&self, kind: QuantityKind, value: f64) -> f64 {
        value * self.scale(kind)
    }

    pub fn dimensionalize(&self, kind: QuantityKind, value: f64) -> f64 {
        value / self.scale(kind)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuantityKind {
    Mass,
    Altitude,
    Time,
    Speed,
    Acceleration,
}

impl FromStr for QuantityKind {
    type Err = DynamicsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mass" | "m" => Ok(Self::Mass),
            "altitude" | "h" => Ok(Self::Altitude),
            "time" | "t" => Ok(Self::Time),
            "speed" | "v" => Ok(Self::Speed),
            "acceleration" | "a" => Ok(Self::Acceleration),
            other => Err(DynamicsError::UnknownQuantity(other.to_string())),
        }
    }
}

impl fmt::Display for QuantityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Mass => "mass",
            Self::Altitude => "altitude",
            Self::Time => "time",
            Self::Speed => "speed",
            Self::Acceleration => "acceleration",
        };
        f.write_str(s)
    }
}
