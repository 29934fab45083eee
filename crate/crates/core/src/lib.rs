//! Bounded-thrust Goddard ascent solved as a finite-horizon influence diagram.
//!
//! The altitude window `[h0, hT]` is cut into segments. In every segment the
//! normalized dynamics are advanced with an Euler, RK4 or Gauss–Legendre step
//! from each point of a speed × mass grid, the continuous result is spread
//! over neighbouring grid cells, and the resulting chain is solved backward
//! for the thrust policy that maximizes expected terminal mass.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli_io;
pub mod dynamics;
pub mod grids;
pub mod influence_diagram;
pub mod rollout;
pub mod steppers;

pub use cli_io::{parse_runspec, RunConfig, RunSpec};
pub use dynamics::{ModelParams, RocketState};
pub use grids::{default_grids, Grids, SpeedBounds, UniformGrid};
pub use influence_diagram::{build_transitions, solve, SegmentPlan, TransitionModel};
pub use steppers::{Method, Stepper};
