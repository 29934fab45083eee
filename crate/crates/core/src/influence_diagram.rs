//! The segmented influence diagram of the ascent and its evaluation.
//!
//! Segment `i` carries chance nodes `V_i`, `M_i`, a decision `U_i` and a fuel
//! utility `f_i`. Conditional tables `P(V_{i+1}, M_{i+1} | V_i, M_i, U_i)` are
//! built by stepping each grid cell once with the chosen integrator and
//! spreading the continuous result over the neighbouring grid cells. The
//! diagram is solved by backward induction on expected terminal mass, which is
//! the fuel objective up to the constant launch mass.

use thiserror::Error;

use crate::dynamics::{ModelParams, RocketState};
use crate::grids::{GridWeights, Grids};
use crate::steppers::Stepper;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("segment length must be positive, got {0}")]
    NonPositiveLength(f64),
    #[error("segment length {dh} does not divide the altitude span {span}")]
    NotADivisor { dh: f64, span: f64 },
    #[error("at least one segment is required")]
    NoSegments,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("problem infeasible at this discretization: every initial cell is dead")]
    Infeasible,
    #[error("start cell {cell} is dead")]
    DeadStart { cell: usize },
    #[error("policy prescribes no control at segment {segment}, cell {cell}")]
    DeadPolicyCell { segment: usize, cell: usize },
}

/// Division of `[h0, hT]` into `N` segments of equal length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentPlan {
    n_segments: usize,
    h0: f64,
    h_t: f64,
    dh: f64,
}

impl SegmentPlan {
    /// Plan with segment length `dh`, which must divide `hT − h0` to within a
    /// relative tolerance of 1e-9.
    pub fn new(h0: f64, h_t: f64, dh: f64) -> Result<Self, PlanError> {
        if !(dh > 0.0) {
            return Err(PlanError::NonPositiveLength(dh));
        }
        let span = h_t - h0;
        let n = (span / dh).round();
        if n < 1.0 || (n * dh - span).abs() > 1e-9 * span {
            return Err(PlanError::NotADivisor { dh, span });
        }
        Self::with_segments(h0, h_t, n as usize)
    }

    pub fn with_segments(h0: f64, h_t: f64, n_segments: usize) -> Result<Self, PlanError> {
        if n_segments == 0 {
            return Err(PlanError::NoSegments);
        }
        if !(h_t > h0) {
            return Err(PlanError::NonPositiveLength(h_t - h0));
        }
        Ok(Self {
            n_segments,
            h0,
            h_t,
            dh: (h_t - h0) / n_segments as f64,
        })
    }

    pub fn for_params(p: &ModelParams, dh: f64) -> Result<Self, PlanError> {
        Self::new(p.h0, p.h_t, dh)
    }

    pub fn n_segments(&self) -> usize {
        self.n_segments
    }

    pub fn dh(&self) -> f64 {
        self.dh
    }

    /// Altitude of segment boundary `i`; boundary `N` is `hT` exactly.
    pub fn h_of(&self, i: usize) -> f64 {
        if i == self.n_segments {
            self.h_t
        } else {
            self.h0 + i as f64 * self.dh
        }
    }

    /// The same plan with its last segment removed; earlier boundaries are
    /// unchanged bit for bit.
    pub fn truncated(&self) -> Option<Self> {
        (self.n_segments > 1).then(|| Self {
            n_segments: self.n_segments - 1,
            h0: self.h0,
            h_t: self.h_of(self.n_segments - 1),
            dh: self.dh,
        })
    }
}

/// Conditional table row for one (segment, cell, control) triple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub speed: GridWeights,
    pub mass: GridWeights,
    /// Continuous step result the row was interpolated from.
    pub v_next: f64,
    pub m_next: f64,
}

impl Transition {
    /// Successor cells with non-zero probability: at most four, speed-major.
    pub fn successors(&self, grids: &Grids) -> impl Iterator<Item = (usize, f64)> + '_ {
        let nm = grids.mass.len();
        let mass = self.mass;
        self.speed
            .support()
            .flat_map(move |(vi, pv)| mass.support().map(move |(mi, pm)| (vi * nm + mi, pv * pm)))
    }
}

/// All conditional tables of the diagram; `None` marks an inadmissible control.
#[derive(Debug, Clone)]
pub struct TransitionModel {
    grids: Grids,
    plan: SegmentPlan,
    controls: Vec<f64>,
    entries: Vec<Option<Transition>>,
}

impl TransitionModel {
    pub fn grids(&self) -> &Grids {
        &self.grids
    }

    pub fn plan(&self) -> &SegmentPlan {
        &self.plan
    }

    pub fn controls(&self) -> &[f64] {
        &self.controls
    }

    fn index(&self, segment: usize, cell: usize, control: usize) -> usize {
        (segment * self.grids.cells() + cell) * self.controls.len() + control
    }

    pub fn get(&self, segment: usize, cell: usize, control: usize) -> Option<&Transition> {
        self.entries[self.index(segment, cell, control)].as_ref()
    }

    /// Control indices ordered by preference on ties: smaller thrust first,
    /// then lower index.
    pub fn control_priority(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.controls.len()).collect();
        order.sort_by(|&a, &b| {
            self.controls[a]
                .abs()
                .total_cmp(&self.controls[b].abs())
                .then(a.cmp(&b))
        });
        order
    }

    pub fn feasible_count(&self) -> usize {
        self.entries.iter().filter(|e| e.is_some()).count()
    }
}

/// Step every cell under every control once per segment and record the
/// interpolated successor distribution of each admissible pair.
pub fn build_transitions(plan: &SegmentPlan, grids: &Grids, stepper: &Stepper, p: &ModelParams) -> TransitionModel {
    let controls = grids.controls();
    let dh = plan.dh();
    let mut entries = Vec::with_capacity(plan.n_segments() * grids.cells() * controls.len());
    for segment in 0..plan.n_segments() {
        let h = plan.h_of(segment);
        let terminal = segment + 1 == plan.n_segments();
        for cell in 0..grids.cells() {
            let (v, m) = grids.cell_state(cell);
            let start = RocketState::new(h, m, v);
            for &u in &controls {
                let entry = stepper.admissible_step(start, u, dh, terminal, p).map(|r| Transition {
                    speed: grids.speed.locate(r.v_next),
                    mass: grids.mass.locate(r.m_next),
                    v_next: r.v_next,
                    m_next: r.m_next,
                });
                entries.push(entry);
            }
        }
    }
    TransitionModel {
        grids: *grids,
        plan: *plan,
        controls,
        entries,
    }
}

/// Optimal expected terminal mass per boundary layer and cell; `None` marks
/// a dead cell from which no admissible control sequence exists.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable {
    cells: usize,
    values: Vec<Option<f64>>,
}

impl ValueTable {
    pub fn value(&self, layer: usize, cell: usize) -> Option<f64> {
        self.values[layer * self.cells + cell]
    }

    pub fn layer(&self, layer: usize) -> &[Option<f64>] {
        &self.values[layer * self.cells..(layer + 1) * self.cells]
    }

    pub fn layers(&self) -> usize {
        self.values.len() / self.cells
    }
}

/// Optimal control index per segment and cell; `None` on dead cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    cells: usize,
    controls: Vec<f64>,
    choice: Vec<Option<usize>>,
}

impl Policy {
    /// Policy from explicit choices laid out segment-major, `cells` per segment.
    pub fn from_choices(cells: usize, controls: Vec<f64>, choice: Vec<Option<usize>>) -> Self {
        assert!(
            cells > 0 && choice.len().is_multiple_of(cells),
            "choices must fill whole segments"
        );
        assert!(
            choice.iter().flatten().all(|&k| k < controls.len()),
            "control index out of range"
        );
        Self {
            cells,
            controls,
            choice,
        }
    }

    pub fn control_index(&self, segment: usize, cell: usize) -> Option<usize> {
        self.choice[segment * self.cells + cell]
    }

    pub fn control(&self, segment: usize, cell: usize) -> Option<f64> {
        self.control_index(segment, cell).map(|k| self.controls[k])
    }

    pub fn segments(&self) -> usize {
        self.choice.len() / self.cells
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn controls(&self) -> &[f64] {
        &self.controls
    }
}

/// Expected next-layer value of a row, or `None` if any reachable successor is dead.
fn row_value(tr: &Transition, grids: &Grids, next: &[Option<f64>]) -> Option<f64> {
    let mut acc = 0.0;
    for (cell, prob) in tr.successors(grids) {
        acc += prob * next[cell]?;
    }
    Some(acc)
}

/// Backward induction without the feasibility check on the first layer.
pub fn backward_induction(tm: &TransitionModel) -> (ValueTable, Policy) {
    let grids = tm.grids();
    let cells = grids.cells();
    let n = tm.plan().n_segments();
    let priority = tm.control_priority();

    let mut values = vec![None; (n + 1) * cells];
    for cell in 0..cells {
        values[n * cells + cell] = Some(grids.cell_state(cell).1);
    }
    let mut choice = vec![None; n * cells];

    for segment in (0..n).rev() {
        let (head, tail) = values.split_at_mut((segment + 1) * cells);
        let next = &tail[..cells];
        let current = &mut head[segment * cells..];
        for cell in 0..cells {
            let mut best: Option<(usize, f64)> = None;
            for &k in &priority {
                let Some(tr) = tm.get(segment, cell, k) else { continue };
                let Some(q) = row_value(tr, grids, next) else { continue };
                if best.is_none_or(|(_, b)| q > b) {
                    best = Some((k, q));
                }
            }
            if let Some((k, q)) = best {
                current[cell] = Some(q);
                choice[segment * cells + cell] = Some(k);
            }
        }
    }

    (
        ValueTable { cells, values },
        Policy {
            cells,
            controls: tm.controls().to_vec(),
            choice,
        },
    )
}

/// Solve the diagram; fails when no initial cell can reach the terminal altitude.
pub fn solve(tm: &TransitionModel) -> Result<(ValueTable, Policy), SolveError> {
    let (vt, pol) = backward_induction(tm);
    if vt.layer(0).iter().all(Option::is_none) {
        return Err(SolveError::Infeasible);
    }
    Ok((vt, pol))
}

/// Per-segment expected fuel use under a policy.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentUtilities {
    /// `f_i = E[M_i − M_{i+1}]`.
    pub fuel: Vec<f64>,
    /// `E[M_i]` for every boundary `i = 0..=N`.
    pub expected_mass: Vec<f64>,
}

impl SegmentUtilities {
    pub fn total_fuel(&self) -> f64 {
        self.fuel.iter().sum()
    }

    pub fn expected_terminal_mass(&self) -> f64 {
        *self.expected_mass.last().expect("at least one layer")
    }
}

/// Propagate the cell distribution forward from `start_cell` under `pol` and
/// report the expected fuel burned in each segment.
pub fn segment_utilities(
    tm: &TransitionModel,
    vt: &ValueTable,
    pol: &Policy,
    start_cell: usize,
) -> Result<SegmentUtilities, SolveError> {
    if vt.value(0, start_cell).is_none() {
        return Err(SolveError::DeadStart { cell: start_cell });
    }
    let grids = tm.grids();
    let cells = grids.cells();
    let expected = |dist: &[f64]| -> f64 {
        dist.iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(c, &p)| p * grids.cell_state(c).1)
            .sum()
    };

    let mut dist = vec![0.0; cells];
    dist[start_cell] = 1.0;
    let mut expected_mass = vec![expected(&dist)];
    let mut fuel = Vec::with_capacity(tm.plan().n_segments());
    for segment in 0..tm.plan().n_segments() {
        let mut next = vec![0.0; cells];
        let mut burned = 0.0;
        for (cell, &p) in dist.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let tr = pol
                .control_index(segment, cell)
                .and_then(|k| tm.get(segment, cell, k))
                .ok_or(SolveError::DeadPolicyCell { segment, cell })?;
            let m = grids.cell_state(cell).1;
            for (succ, q) in tr.successors(grids) {
                next[succ] += p * q;
                burned += p * q * (m - grids.cell_state(succ).1);
            }
        }
        dist = next;
        fuel.push(burned);
        expected_mass.push(expected(&dist));
    }
    Ok(SegmentUtilities { fuel, expected_mass })
}
