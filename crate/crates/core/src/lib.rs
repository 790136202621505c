//! Heavy-ball momentum laboratory.
//!
//! The crate trains convex quadratics and small multilayer perceptrons with
//! classic momentum, records the alignment and scale of the momentum buffer,
//! matches loss curves across momentum values, and sweeps learning-rate and
//! transition-epoch grids for two-phase schedules.

pub mod diagnostics;
pub mod equivalence;
pub mod error;
pub mod optim;
pub mod problems;
pub mod report;
pub mod seed;
pub mod sweep;
pub mod vecops;

pub use diagnostics::{Granularity, ReferencePoint, TraceRow, TrainTrace};
pub use error::{Error, Result};
pub use optim::{HyperParams, MomentumState, PhaseSpec, ScheduleSpec, TrainConfig, TrainOutcome};
pub use problems::{Dataset, MlpModel, MlpProblem, Problem, QuadraticProblem};
