//! Deterministic execution of a solved policy and profile comparison.

use std::fmt;

use thiserror::Error;

use crate::dynamics::{ModelParams, RocketState};
use crate::grids::Grids;
use crate::influence_diagram::{Policy, SegmentPlan, ValueTable};
use crate::steppers::{satisfies_constraints, StepError, Stepper};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RolloutError {
    #[error("rollout must start at h0 = {expected}, got {got}")]
    WrongStartAltitude { expected: f64, got: f64 },
    #[error("start speed {v} is below the speed grid floor {v_eps}")]
    StartBelowGrid { v: f64, v_eps: f64 },
    #[error("segment {segment}: state (v = {v}, m = {m}) maps to a dead policy cell")]
    DeadCell { segment: usize, v: f64, m: f64 },
    #[error("segment {segment}: step failed: {source}")]
    Step { segment: usize, source: StepError },
    #[error("segment {segment}: control {u} violates the path constraints (m = {m}, v = {v})")]
    Constraint { segment: usize, u: f64, m: f64, v: f64 },
    #[error("no live cell at launch mass: the problem is infeasible at this discretization")]
    NoLiveStart,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompareError {
    #[error("altitude span mismatch: run covers [{run_lo}, {run_hi}] but reference covers [{ref_lo}, {ref_hi}]")]
    SpanMismatch {
        run_lo: f64,
        run_hi: f64,
        ref_lo: f64,
        ref_hi: f64,
    },
    #[error("trajectory `{0}` needs at least two samples")]
    TooShort(String),
}

/// One profile point. For the segment starting at `h`, `u` is the control
/// applied on it; the final sample repeats the last applied control.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub h: f64,
    pub u: f64,
    pub v: f64,
    pub m: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub label: String,
    pub samples: Vec<Sample>,
}

impl Trajectory {
    pub fn new(label: impl Into<String>, samples: Vec<Sample>) -> Self {
        Self {
            label: label.into(),
            samples,
        }
    }

    /// Controls applied on each segment.
    pub fn controls(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples[..self.samples.len().saturating_sub(1)].iter().map(|s| s.u)
    }

    pub fn terminal_mass(&self) -> f64 {
        self.samples.last().map_or(f64::NAN, |s| s.m)
    }

    pub fn terminal_speed(&self) -> f64 {
        self.samples.last().map_or(f64::NAN, |s| s.v)
    }

    pub fn fuel_burned(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => a.m - b.m,
            _ => 0.0,
        }
    }

    pub fn peak_speed(&self) -> f64 {
        self.samples.iter().map(|s| s.v).fold(f64::NEG_INFINITY, f64::max)
    }

    /// First violated trajectory invariant, if any: altitude strictly
    /// increasing, mass non-increasing and above the payload, speed positive
    /// inside and non-negative at the end.
    pub fn check_invariants(&self, p: &ModelParams) -> Result<(), String> {
        let n = self.samples.len();
        for (i, s) in self.samples.iter().enumerate() {
            if s.m < p.m_payload {
                return Err(format!("sample {i}: mass {} below payload {}", s.m, p.m_payload));
            }
            if i + 1 < n && i > 0 && !(s.v > 0.0) {
                return Err(format!("sample {i}: interior speed {} not positive", s.v));
            }
            if !(s.v >= 0.0) {
                return Err(format!("sample {i}: negative speed {}", s.v));
            }
            if i > 0 {
                let prev = &self.samples[i - 1];
                if !(s.h > prev.h) {
                    return Err(format!("sample {i}: altitude not increasing"));
                }
                if s.m > prev.m {
                    return Err(format!("sample {i}: mass increased"));
                }
            }
        }
        Ok(())
    }
}

/// The lowest grid speed whose launch-mass cell is alive at the first layer.
///
/// The altitude-domain model is singular at rest, so a launch from `v0 = 0`
/// is realized as the slowest grid state from which the ascent is feasible.
pub fn launch_state(vt: &ValueTable, grids: &Grids, p: &ModelParams) -> Result<RocketState, RolloutError> {
    let mi = grids.mass.nearest(p.m0);
    (0..grids.speed.len())
        .find(|&vi| vt.value(0, grids.cell(vi, mi)).is_some())
        .map(|vi| RocketState::new(p.h0, grids.mass.point(mi), grids.speed.point(vi)))
        .ok_or(RolloutError::NoLiveStart)
}

/// Fly the policy from `start`, looking up the control at the nearest grid
/// cell and integrating one continuous step per segment.
pub fn simulate(
    pol: &Policy,
    grids: &Grids,
    plan: &SegmentPlan,
    stepper: &Stepper,
    p: &ModelParams,
    start: RocketState,
    label: impl Into<String>,
) -> Result<Trajectory, RolloutError> {
    if (start.h - plan.h_of(0)).abs() > 1e-12 {
        return Err(RolloutError::WrongStartAltitude {
            expected: plan.h_of(0),
            got: start.h,
        });
    }
    if start.v < grids.speed.lo() {
        return Err(RolloutError::StartBelowGrid {
            v: start.v,
            v_eps: grids.speed.lo(),
        });
    }
    let n = plan.n_segments();
    let dh = plan.dh();
    let mut samples = Vec::with_capacity(n + 1);
    let (mut m, mut v) = (start.m, start.v);
    let mut u = 0.0;
    for segment in 0..n {
        let h = plan.h_of(segment);
        u = pol
            .control(segment, grids.nearest_cell(v, m))
            .ok_or(RolloutError::DeadCell { segment, v, m })?;
        samples.push(Sample { h, u, v, m });
        let r = stepper
            .step(RocketState::new(h, m, v), u, dh, p)
            .map_err(|source| RolloutError::Step { segment, source })?;
        if !satisfies_constraints(&r, segment + 1 == n, p) {
            return Err(RolloutError::Constraint {
                segment,
                u,
                m: r.m_next,
                v: r.v_next,
            });
        }
        m = r.m_next;
        v = r.v_next;
    }
    samples.push(Sample {
        h: plan.h_of(n),
        u,
        v,
        m,
    });
    Ok(Trajectory::new(label, samples))
}

/// Full thrust until the next step would cross the payload floor, then
/// coasting, one step per segment. Used to check that the speed grid cap
/// is not binding.
pub fn max_thrust_pilot(stepper: &Stepper, plan: &SegmentPlan, p: &ModelParams, start: RocketState) -> Trajectory {
    let n = plan.n_segments();
    let dh = plan.dh();
    let mut samples = Vec::with_capacity(n + 1);
    let (mut m, mut v) = (start.m, start.v);
    for segment in 0..n {
        let h = plan.h_of(segment);
        let terminal = segment + 1 == n;
        let s = RocketState::new(h, m, v);
        let Some((u, r)) = [p.u_min, 0.0]
            .into_iter()
            .find_map(|u| stepper.admissible_step(s, u, dh, terminal, p).map(|r| (u, r)))
        else {
            break;
        };
        samples.push(Sample { h, u, v, m });
        m = r.m_next;
        v = r.v_next;
        if terminal {
            samples.push(Sample {
                h: plan.h_of(n),
                u,
                v,
                m,
            });
        }
    }
    Trajectory::new("max-thrust pilot", samples)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Deviation {
    pub max_abs: f64,
    pub rms: f64,
}

impl Deviation {
    fn from_diffs(diffs: impl Iterator<Item = f64>) -> Self {
        let (mut max_abs, mut sq, mut n) = (0.0f64, 0.0, 0usize);
        for d in diffs {
            max_abs = max_abs.max(d.abs());
            sq += d * d;
            n += 1;
        }
        Self {
            max_abs,
            rms: if n == 0 { 0.0 } else { (sq / n as f64).sqrt() },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub run_label: String,
    pub reference_label: String,
    pub control: Deviation,
    pub speed: Deviation,
    pub mass: Deviation,
    /// Run terminal mass minus reference terminal mass.
    pub terminal_mass_diff: f64,
}

impl ComparisonReport {
    pub fn profiles(&self) -> [(&'static str, Deviation); 3] {
        [("control", self.control), ("speed", self.speed), ("mass", self.mass)]
    }
}

/// Linear interpolation of `samples` at altitude `h` (inside the span).
fn resample(samples: &[Sample], h: f64) -> Sample {
    let i = samples.partition_point(|s| s.h < h);
    if i == 0 {
        return Sample { h, ..samples[0] };
    }
    if i == samples.len() {
        return Sample { h, ..samples[i - 1] };
    }
    let (a, b) = (&samples[i - 1], &samples[i]);
    if b.h == h {
        return *b;
    }
    let t = (h - a.h) / (b.h - a.h);
    let lerp = |x: f64, y: f64| x + t * (y - x);
    Sample {
        h,
        u: lerp(a.u, b.u),
        v: lerp(a.v, b.v),
        m: lerp(a.m, b.m),
    }
}

/// Deviation of `run` from `reference`. Both profiles are read as piecewise
/// linear in altitude and compared at every knot of either one inside the
/// run's span, so the maximum deviation is the exact sup-norm distance.
pub fn compare(run: &Trajectory, reference: &Trajectory) -> Result<ComparisonReport, CompareError> {
    for t in [run, reference] {
        if t.samples.len() < 2 {
            return Err(CompareError::TooShort(t.label.clone()));
        }
    }
    let (run_lo, run_hi) = (run.samples[0].h, run.samples[run.samples.len() - 1].h);
    let (ref_lo, ref_hi) = (reference.samples[0].h, reference.samples[reference.samples.len() - 1].h);
    let slack = 1e-9 * (run_hi - run_lo).abs().max(1e-12);
    if ref_lo > run_lo + slack || ref_hi < run_hi - slack {
        return Err(CompareError::SpanMismatch {
            run_lo,
            run_hi,
            ref_lo,
            ref_hi,
        });
    }
    let mut knots: Vec<f64> = run
        .samples
        .iter()
        .chain(&reference.samples)
        .map(|s| s.h)
        .filter(|&h| h >= run_lo && h <= run_hi)
        .collect();
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    let pairs: Vec<(Sample, Sample)> = knots
        .iter()
        .map(|&h| (resample(&run.samples, h), resample(&reference.samples, h)))
        .collect();
    Ok(ComparisonReport {
        run_label: run.label.clone(),
        reference_label: reference.label.clone(),
        control: Deviation::from_diffs(pairs.iter().map(|(a, b)| a.u - b.u)),
        speed: Deviation::from_diffs(pairs.iter().map(|(a, b)| a.v - b.v)),
        mass: Deviation::from_diffs(pairs.iter().map(|(a, b)| a.m - b.m)),
        terminal_mass_diff: run.terminal_mass() - reference.terminal_mass(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubarcKind {
    MaxThrust,
    Variable,
    Coast,
}

impl fmt::Display for SubarcKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SubarcKind::MaxThrust => "max-thrust",
            SubarcKind::Variable => "variable",
            SubarcKind::Coast => "coast",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Subarc {
    pub kind: SubarcKind,
    pub h_start: f64,
    pub h_end: f64,
}

/// Split the segments into maximal runs of max-thrust, variable-thrust and
/// coasting controls.
pub fn subarc_classify(t: &Trajectory, u_min: f64, tol: f64) -> Vec<Subarc> {
    let kind = |u: f64| {
        if u.abs() <= tol {
            SubarcKind::Coast
        } else if (u - u_min).abs() <= tol {
            SubarcKind::MaxThrust
        } else {
            SubarcKind::Variable
        }
    };
    let mut arcs: Vec<Subarc> = Vec::new();
    for w in t.samples.windows(2) {
        let k = kind(w[0].u);
        match arcs.last_mut() {
            Some(last) if last.kind == k => last.h_end = w[1].h,
            _ => arcs.push(Subarc {
                kind: k,
                h_start: w[0].h,
                h_end: w[1].h,
            }),
        }
    }
    arcs
}
