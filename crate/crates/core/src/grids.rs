//! Uniform state and control grids and the interpolation weights that turn a
//! continuous step result into a distribution over grid cells.

use thiserror::Error;

use crate::dynamics::ModelParams;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("a grid needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("grid bounds must satisfy lo < hi, got [{lo}, {hi}]")]
    EmptyRange { lo: f64, hi: f64 },
    #[error("speed grid must start above zero, got v_eps = {0}")]
    NonPositiveSpeedFloor(f64),
}

/// `n` equally spaced points on `[lo, hi]`; the last point is `hi` exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformGrid {
    lo: f64,
    hi: f64,
    n: usize,
}

impl UniformGrid {
    pub fn new(lo: f64, hi: f64, n: usize) -> Result<Self, GridError> {
        if n < 2 {
            return Err(GridError::TooFewPoints(n));
        }
        if !(lo < hi) {
            return Err(GridError::EmptyRange { lo, hi });
        }
        Ok(Self { lo, hi, n })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / (self.n - 1) as f64
    }

    pub fn point(&self, k: usize) -> f64 {
        debug_assert!(k < self.n);
        if k == self.n - 1 {
            self.hi
        } else {
            self.lo + k as f64 * self.spacing()
        }
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(|k| self.point(k))
    }

    /// Linear interpolation weights of `x` between its two bracketing points.
    /// Values outside the grid put all mass on the nearest endpoint.
    pub fn locate(&self, x: f64) -> GridWeights {
        let last = self.n - 2;
        if x <= self.lo {
            return GridWeights { idx_lo: 0, p_hi: 0.0 };
        }
        if x >= self.hi {
            return GridWeights {
                idx_lo: last,
                p_hi: 1.0,
            };
        }
        let t = (x - self.lo) / self.spacing();
        let mut idx = (t.floor() as usize).min(last);
        while idx < last && x >= self.point(idx + 1) {
            idx += 1;
        }
        while idx > 0 && x < self.point(idx) {
            idx -= 1;
        }
        let a = self.point(idx);
        let b = self.point(idx + 1);
        let p_hi = ((x - a) / (b - a)).clamp(0.0, 1.0);
        GridWeights { idx_lo: idx, p_hi }
    }

    /// Index of the grid point closest to `x` (ties go to the lower index).
    pub fn nearest(&self, x: f64) -> usize {
        let w = self.locate(x);
        if w.p_hi > 0.5 {
            w.idx_lo + 1
        } else {
            w.idx_lo
        }
    }
}

/// Two-point distribution `{idx_lo: 1 − p_hi, idx_lo + 1: p_hi}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridWeights {
    pub idx_lo: usize,
    pub p_hi: f64,
}

impl GridWeights {
    /// Non-zero `(index, probability)` pairs, lower index first.
    pub fn support(&self) -> impl Iterator<Item = (usize, f64)> {
        [(self.idx_lo, 1.0 - self.p_hi), (self.idx_lo + 1, self.p_hi)]
            .into_iter()
            .filter(|&(_, p)| p > 0.0)
    }

    pub fn expectation(&self, grid: &UniformGrid) -> f64 {
        (1.0 - self.p_hi) * grid.point(self.idx_lo) + self.p_hi * grid.point(self.idx_lo + 1)
    }
}

/// Speed-grid bounds. The dynamics are singular at `v = 0`, so the grid starts
/// at a small positive `v_eps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedBounds {
    pub v_eps: f64,
    pub v_max: f64,
}

impl Default for SpeedBounds {
    fn default() -> Self {
        Self {
            v_eps: 1e-3,
            v_max: 0.2,
        }
    }
}

/// The speed, mass and control grids of one discretization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grids {
    pub speed: UniformGrid,
    pub mass: UniformGrid,
    pub control: UniformGrid,
}

impl Grids {
    pub fn new(p: &ModelParams, bounds: SpeedBounds, nv: usize, nm: usize, nu: usize) -> Result<Self, GridError> {
        if !(bounds.v_eps > 0.0) {
            return Err(GridError::NonPositiveSpeedFloor(bounds.v_eps));
        }
        Ok(Self {
            speed: UniformGrid::new(bounds.v_eps, bounds.v_max, nv)?,
            mass: UniformGrid::new(p.m_payload, p.m0, nm)?,
            control: UniformGrid::new(p.u_min, 0.0, nu)?,
        })
    }

    pub fn cells(&self) -> usize {
        self.speed.len() * self.mass.len()
    }

    /// Flattened cell index, speed-major.
    pub fn cell(&self, v_idx: usize, m_idx: usize) -> usize {
        v_idx * self.mass.len() + m_idx
    }

    pub fn cell_coords(&self, cell: usize) -> (usize, usize) {
        (cell / self.mass.len(), cell % self.mass.len())
    }

    pub fn cell_state(&self, cell: usize) -> (f64, f64) {
        let (vi, mi) = self.cell_coords(cell);
        (self.speed.point(vi), self.mass.point(mi))
    }

    pub fn controls(&self) -> Vec<f64> {
        self.control.points().collect()
    }

    /// Cell closest to `(v, m)`, axis by axis.
    pub fn nearest_cell(&self, v: f64, m: f64) -> usize {
        self.cell(self.speed.nearest(v), self.mass.nearest(m))
    }
}

/// Grids on `[v_eps, v_max] × [m_p, m0]` with controls on `[u_min, 0]`,
/// using the default speed bounds.
pub fn default_grids(p: &ModelParams, nv: usize, nm: usize, nu: usize) -> Result<Grids, GridError> {
    Grids::new(p, SpeedBounds::default(), nv, nm, nu)
}
