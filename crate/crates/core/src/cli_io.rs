//! Run naming, CSV formats and the build → solve → rollout → compare pipeline.
//!
//! A run is named `v.u.m.M.h`: speed, control and mass state counts, the
//! method key (`E`, `RK` or `G`) and the segment length, e.g.
//! `101.11.101.E.0.0005`. The name is also the stem of every output file.

use std::fmt::{self, Write as _};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use thiserror::Error;

use crate::dynamics::{DynamicsError, ModelParams, RocketState};
use crate::grids::{GridError, Grids, SpeedBounds};
use crate::influence_diagram::{build_transitions, solve, PlanError, Policy, SegmentPlan, SolveError};
use crate::rollout::{
    compare, launch_state, max_thrust_pilot, simulate, subarc_classify, CompareError, ComparisonReport, RolloutError,
    Sample, Trajectory,
};
use crate::steppers::{ImplicitSolveConfig, Method, Stepper};

/// Controls are grid points, so subarcs are classified with a tight tolerance.
pub const SUBARC_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RunSpecError {
    #[error("run name `{name}` is missing the {field} field (expected v.u.m.M.h)")]
    Missing { name: String, field: &'static str },
    #[error("{field}: `{value}` is not a state count >= 2")]
    BadCount { field: &'static str, value: String },
    #[error("unknown method {0}")]
    UnknownMethod(String),
    #[error("dh: `{0}` is not a positive segment length")]
    BadLength(String),
}

/// Discretization of one experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSpec {
    pub nv: usize,
    pub nu: usize,
    pub nm: usize,
    pub method: Method,
    pub dh: f64,
}

impl RunSpec {
    pub fn name(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for RunSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}.{}.{}.{}", self.nv, self.nu, self.nm, self.method, self.dh)
    }
}

impl FromStr for RunSpec {
    type Err = RunSpecError;

    fn from_str(name: &str) -> Result<Self, Self::Err> {
        parse_runspec(name)
    }
}

/// Parse `<int>.<int>.<int>.<METHOD>.<float>`; the float is everything after
/// the method token, decimal point included.
pub fn parse_runspec(name: &str) -> Result<RunSpec, RunSpecError> {
    const FIELDS: [&str; 5] = ["nv", "nu", "nm", "method", "dh"];
    let parts: Vec<&str> = name.trim().splitn(5, '.').collect();
    if parts.len() < 5 {
        return Err(RunSpecError::Missing {
            name: name.to_string(),
            field: FIELDS[parts.len()],
        });
    }
    let count = |i: usize| -> Result<usize, RunSpecError> {
        match parts[i].parse::<usize>() {
            Ok(n) if n >= 2 => Ok(n),
            _ => Err(RunSpecError::BadCount {
                field: FIELDS[i],
                value: parts[i].to_string(),
            }),
        }
    };
    let (nv, nu, nm) = (count(0)?, count(1)?, count(2)?);
    let method = parts[3]
        .parse::<Method>()
        .map_err(|e| RunSpecError::UnknownMethod(e.0))?;
    let dh = match parts[4].parse::<f64>() {
        Ok(x) if x > 0.0 && x.is_finite() => x,
        _ => return Err(RunSpecError::BadLength(parts[4].to_string())),
    };
    Ok(RunSpec { nv, nu, nm, method, dh })
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: missing column `{column}`")]
    MissingColumn { path: PathBuf, column: &'static str },
    #[error("{path}: row {row}: cannot parse `{value}` in column `{column}`")]
    BadFloat {
        path: PathBuf,
        row: usize,
        column: &'static str,
        value: String,
    },
    #[error("{path}: row {row}: altitude {h} does not increase")]
    NonMonotone { path: PathBuf, row: usize, h: f64 },
    #[error("{path}: fewer than two rows")]
    TooShort { path: PathBuf },
}

/// A profile produced elsewhere, e.g. exported from a direct-collocation
/// optimal-control solver.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceProfile {
    pub trajectory: Trajectory,
    pub provenance: String,
}

impl ReferenceProfile {
    /// Check that the profile covers `[h0, hT]`.
    pub fn check_span(&self, p: &ModelParams) -> Result<(), RunError> {
        let s = &self.trajectory.samples;
        let (lo, hi) = (s[0].h, s[s.len() - 1].h);
        let slack = 1e-9 * (p.h_t - p.h0);
        if lo > p.h0 + slack || hi < p.h_t - slack {
            return Err(RunError::ReferenceSpan {
                lo,
                hi,
                h0: p.h0,
                h_t: p.h_t,
            });
        }
        Ok(())
    }
}

/// Read a `h,u,v,m` CSV. Extra columns are ignored; rows are numbered from 1
/// after the header.
pub fn load_reference(path: impl AsRef<Path>) -> Result<ReferenceProfile, LoadError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.into(),
        source,
    })?;
    let trajectory = parse_profile_csv(&text, path)?;
    Ok(ReferenceProfile {
        trajectory,
        provenance: path.display().to_string(),
    })
}

fn parse_profile_csv(text: &str, path: &Path) -> Result<Trajectory, LoadError> {
    let csv_err = |source| LoadError::Csv {
        path: path.into(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(csv_err)?.clone();
    const COLUMNS: [&str; 4] = ["h", "u", "v", "m"];
    let mut idx = [0usize; 4];
    for (k, col) in COLUMNS.iter().enumerate() {
        idx[k] = headers.iter().position(|h| h == *col).ok_or(LoadError::MissingColumn {
            path: path.into(),
            column: col,
        })?;
    }
    let mut samples: Vec<Sample> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(csv_err)?;
        let mut vals = [0.0; 4];
        for k in 0..4 {
            let raw = record.get(idx[k]).unwrap_or("");
            vals[k] = raw.parse::<f64>().map_err(|_| LoadError::BadFloat {
                path: path.into(),
                row,
                column: COLUMNS[k],
                value: raw.to_string(),
            })?;
        }
        let [h, u, v, m] = vals;
        if let Some(prev) = samples.last() {
            if !(h > prev.h) {
                return Err(LoadError::NonMonotone {
                    path: path.into(),
                    row,
                    h,
                });
            }
        }
        samples.push(Sample { h, u, v, m });
    }
    if samples.len() < 2 {
        return Err(LoadError::TooShort { path: path.into() });
    }
    let label = path
        .file_stem()
        .map_or_else(String::new, |s| s.to_string_lossy().into_owned());
    Ok(Trajectory::new(label, samples))
}

/// 17 significant digits in exponent form; parses back to the same bits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn trajectory_csv(t: &Trajectory) -> String {
    let mut out = String::from("h,u,v,m\n");
    for s in &t.samples {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            fmt_f64(s.h),
            fmt_f64(s.u),
            fmt_f64(s.v),
            fmt_f64(s.m)
        );
    }
    out
}

/// One row per live `(segment, cell)`.
pub fn policy_csv(pol: &Policy, grids: &Grids) -> String {
    let mut out = String::from("segment,v_idx,m_idx,u\n");
    for segment in 0..pol.segments() {
        for cell in 0..grids.cells() {
            if let Some(u) = pol.control(segment, cell) {
                let (vi, mi) = grids.cell_coords(cell);
                let _ = writeln!(out, "{segment},{vi},{mi},{}", fmt_f64(u));
            }
        }
    }
    out
}

pub fn comparison_csv(r: &ComparisonReport) -> String {
    let mut out = String::from("profile,max_abs_dev,rms_dev\n");
    for (name, d) in r.profiles() {
        let _ = writeln!(out, "{name},{},{}", fmt_f64(d.max_abs), fmt_f64(d.rms));
    }
    out
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Spec(#[from] RunSpecError),
    #[error(transparent)]
    Params(#[from] DynamicsError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error("reference altitude span mismatch: reference covers [{lo}, {hi}], run needs [{h0}, {h_t}]")]
    ReferenceSpan { lo: f64, hi: f64, h0: f64, h_t: f64 },
    #[error(transparent)]
    Compare(#[from] CompareError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Rollout(#[from] RolloutError),
    #[error("rollout speed {peak} exceeds the speed grid cap v_max = {v_max}")]
    SpeedCap { peak: f64, v_max: f64 },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl RunError {
    /// 1 usage or input, 2 infeasible discretization, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Solve(_) | RunError::Rollout(_) | RunError::SpeedCap { .. } => 2,
            RunError::Io { .. } => 3,
            RunError::Load(LoadError::Io { .. }) => 3,
            _ => 1,
        }
    }
}

/// Problem constants and grid/solver settings shared by all runs.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunConfig {
    pub params: ModelParams,
    pub speed_bounds: SpeedBounds,
    pub implicit: ImplicitSolveConfig,
    /// Launch speed; defaults to the slowest live grid speed at launch mass.
    pub v_start: Option<f64>,
}

/// Everything a run computes, before anything is written.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub name: String,
    pub start: RocketState,
    /// Optimal expected terminal mass of the start cell.
    pub expected_terminal_mass: f64,
    pub trajectory: Trajectory,
    pub pilot_peak_speed: f64,
    pub comparison: Option<ComparisonReport>,
    pub solve_seconds: f64,
    pub policy_csv: String,
}

impl RunOutcome {
    pub fn summary(&self, cfg: &RunConfig) -> String {
        let t = &self.trajectory;
        let mut out = String::new();
        let _ = writeln!(out, "run: {}", self.name);
        let _ = writeln!(out, "segments: {}", t.samples.len() - 1);
        let _ = writeln!(
            out,
            "start: h={} v={} m={}",
            fmt_f64(self.start.h),
            fmt_f64(self.start.v),
            fmt_f64(self.start.m)
        );
        let _ = writeln!(out, "expected_terminal_mass: {}", fmt_f64(self.expected_terminal_mass));
        let _ = writeln!(out, "terminal_mass: {}", fmt_f64(t.terminal_mass()));
        let _ = writeln!(out, "terminal_speed: {}", fmt_f64(t.terminal_speed()));
        let _ = writeln!(out, "fuel_burned: {}", fmt_f64(t.fuel_burned()));
        let _ = writeln!(out, "peak_speed: {}", fmt_f64(t.peak_speed()));
        let _ = writeln!(out, "pilot_peak_speed: {}", fmt_f64(self.pilot_peak_speed));
        let _ = writeln!(out, "subarcs:");
        for arc in subarc_classify(t, cfg.params.u_min, SUBARC_TOL) {
            let _ = writeln!(out, "  {} [{}, {}]", arc.kind, fmt_f64(arc.h_start), fmt_f64(arc.h_end));
        }
        if let Some(c) = &self.comparison {
            let _ = writeln!(out, "reference: {}", c.reference_label);
            let _ = writeln!(out, "terminal_mass_diff: {}", fmt_f64(c.terminal_mass_diff));
        }
        let _ = writeln!(out, "solve_wall_time_s: {:.3}", self.solve_seconds);
        out
    }
}

/// Build, solve and fly one discretization without touching the filesystem.
pub fn execute(spec: &RunSpec, cfg: &RunConfig, reference: Option<&ReferenceProfile>) -> Result<RunOutcome, RunError> {
    let p = &cfg.params;
    p.validate()?;
    if let Some(r) = reference {
        r.check_span(p)?;
    }
    let plan = SegmentPlan::for_params(p, spec.dh)?;
    let grids = Grids::new(p, cfg.speed_bounds, spec.nv, spec.nm, spec.nu)?;
    let stepper = Stepper::with_config(spec.method, cfg.implicit);

    let clock = Instant::now();
    let tm = build_transitions(&plan, &grids, &stepper, p);
    let (vt, pol) = solve(&tm)?;
    let solve_seconds = clock.elapsed().as_secs_f64();

    let start = match cfg.v_start {
        Some(v) => RocketState::new(p.h0, p.m0, v),
        None => launch_state(&vt, &grids, p)?,
    };
    let name = spec.name();
    let trajectory = simulate(&pol, &grids, &plan, &stepper, p, start, name.clone())?;
    let peak = trajectory.peak_speed();
    if peak > cfg.speed_bounds.v_max {
        return Err(RunError::SpeedCap {
            peak,
            v_max: cfg.speed_bounds.v_max,
        });
    }
    let expected_terminal_mass = vt.value(0, grids.nearest_cell(start.v, start.m)).unwrap_or(f64::NAN);
    let pilot_peak_speed = max_thrust_pilot(&stepper, &plan, p, start).peak_speed();
    let comparison = reference
        .map(|r| {
            let mut rt = r.trajectory.clone();
            rt.label = r.provenance.clone();
            compare(&trajectory, &rt)
        })
        .transpose()?;
    Ok(RunOutcome {
        name,
        start,
        expected_terminal_mass,
        trajectory,
        pilot_peak_speed,
        comparison,
        solve_seconds,
        policy_csv: policy_csv(&pol, &grids),
    })
}

/// Run one experiment and write `<name>.trajectory.csv`, `<name>.policy.csv`,
/// `<name>.summary.txt` and, with a reference, `<name>.compare.csv` into
/// `out_dir`. Files appear only if every one of them was written.
pub fn run(
    spec: &RunSpec,
    cfg: &RunConfig,
    reference: Option<&ReferenceProfile>,
    out_dir: &Path,
) -> Result<(RunOutcome, Vec<PathBuf>), RunError> {
    let outcome = execute(spec, cfg, reference)?;
    let mut files = vec![
        ("trajectory.csv", trajectory_csv(&outcome.trajectory)),
        ("policy.csv", outcome.policy_csv.clone()),
        ("summary.txt", outcome.summary(cfg)),
    ];
    if let Some(c) = &outcome.comparison {
        files.push(("compare.csv", comparison_csv(c)));
    }
    let paths = write_all_or_nothing(out_dir, &outcome.name, &files)?;
    Ok((outcome, paths))
}

fn write_all_or_nothing(dir: &Path, stem: &str, files: &[(&str, String)]) -> Result<Vec<PathBuf>, RunError> {
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| RunError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut staged: Vec<(PathBuf, PathBuf)> = Vec::new();
    let cleanup = |staged: &[(PathBuf, PathBuf)]| {
        for (tmp, _) in staged {
            let _ = fs::remove_file(tmp);
        }
    };
    for (suffix, contents) in files {
        let target = dir.join(format!("{stem}.{suffix}"));
        let tmp = dir.join(format!(".{stem}.{suffix}.tmp"));
        if let Err(e) = fs::write(&tmp, contents) {
            cleanup(&staged);
            let _ = fs::remove_file(&tmp);
            return Err(io_err(&tmp)(e));
        }
        staged.push((tmp, target));
    }
    for (tmp, target) in &staged {
        fs::rename(tmp, target).map_err(io_err(target))?;
    }
    Ok(staged.into_iter().map(|(_, t)| t).collect())
}
